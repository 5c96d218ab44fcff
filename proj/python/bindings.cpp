// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "actflow/analysis.hpp"
#include "actflow/classifier.hpp"
#include "actflow/error.hpp"
#include "actflow/steering.hpp"
#include "actflow/trainer.hpp"

namespace py = pybind11;
using namespace actflow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vector> rows_of(const Array& a, std::size_t expected_dim = 0) {
    if (a.ndim() != 2) {
        throw py::value_error("expected a 2-D array");
    }
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto d = static_cast<std::size_t>(a.shape(1));
    if (expected_dim != 0 && d != expected_dim) {
        throw py::value_error("expected " + std::to_string(expected_dim) + " columns, got " + std::to_string(d));
    }
    std::vector<Vector> out(n, Vector(d));
    const double* p = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(p + i * d, p + (i + 1) * d, out[i].begin());
    }
    return out;
}

Array to_array(const std::vector<Vector>& rows, std::size_t dim) {
    Array out({rows.size(), dim});
    double* p = out.mutable_data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), p + i * dim);
    }
    return out;
}

std::vector<std::uint32_t> broadcast_u32(const std::optional<std::vector<std::uint32_t>>& v, std::size_t n,
                                         const char* name) {
    if (!v) {
        return std::vector<std::uint32_t>(n, 0);
    }
    if (v->size() != n) {
        throw py::value_error(std::string(name) + " must have one entry per row");
    }
    return *v;
}

struct Model {
    Checkpoint checkpoint;
    TrainReport report;
};

const ConditionEntry& condition_or_throw(const Corpus& corpus, std::uint32_t id) {
    for (const auto& c : corpus.conditions) {
        if (c.id == id) {
            return c;
        }
    }
    throw py::value_error("unknown condition id " + std::to_string(id));
}

}  // namespace

PYBIND11_MODULE(_actflow, m) {
    m.doc() = "actflow core bindings";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    py::class_<Corpus>(m, "Corpus")
        .def_static("load", &read_corpus, py::arg("path"))
        .def("save", [](const Corpus& c, const std::filesystem::path& p) { write_corpus(c, p); }, py::arg("path"))
        .def_property_readonly("activation_dim", [](const Corpus& c) { return c.header.activation_dim; })
        .def_property_readonly("condition_dim", [](const Corpus& c) { return c.header.condition_dim; })
        .def("__len__", [](const Corpus& c) { return c.records.size(); })
        .def_property_readonly("activations",
                               [](const Corpus& c) {
                                   std::vector<Vector> rows;
                                   rows.reserve(c.records.size());
                                   for (const auto& r : c.records) {
                                       rows.push_back(r.activation);
                                   }
                                   return to_array(rows, c.header.activation_dim);
                               })
        .def_property_readonly("labels",
                               [](const Corpus& c) {
                                   std::vector<std::uint32_t> v;
                                   for (const auto& r : c.records) {
                                       v.push_back(r.condition_id);
                                   }
                                   return v;
                               })
        .def_property_readonly("layers",
                               [](const Corpus& c) {
                                   std::vector<std::uint32_t> v;
                                   for (const auto& r : c.records) {
                                       v.push_back(r.layer);
                                   }
                                   return v;
                               })
        .def_property_readonly("positions",
                               [](const Corpus& c) {
                                   std::vector<std::uint32_t> v;
                                   for (const auto& r : c.records) {
                                       v.push_back(r.position);
                                   }
                                   return v;
                               })
        .def_property_readonly("condition_texts", [](const Corpus& c) {
            std::vector<std::string> v;
            for (const auto& e : c.conditions) {
                v.push_back(e.text);
            }
            return v;
        });

    m.def(
        "synth",
        [](std::uint32_t conditions, std::uint32_t dim, std::uint32_t records, double separation, double scale,
           std::uint32_t positions, std::uint64_t seed, std::optional<Array> means) {
            SynthSpec s;
            s.num_conditions = conditions;
            s.activation_dim = dim;
            s.records_per_condition = records;
            s.scale = scale;
            s.positions_per_record = positions;
            s.seed = seed;
            if (means) {
                s.means = rows_of(*means, dim);
            } else {
                for (std::uint32_t k = 0; k < conditions; ++k) {
                    const double sign = conditions == 1 ? 1.0 : 1.0 - 2.0 * k / (conditions - 1.0);
                    s.means.emplace_back(dim, separation * sign);
                }
            }
            return synth_corpus(s);
        },
        py::arg("conditions") = 2, py::arg("dim") = 2, py::arg("records") = 1000, py::arg("separation") = 3.0,
        py::arg("scale") = 1.0, py::arg("positions") = 1, py::arg("seed") = 0, py::arg("means") = py::none(),
        "Synthetic Gaussian corpus; default means run from +separation to -separation on every axis.");

    py::class_<Model>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& p) { return Model{load_checkpoint(p), {}}; }, py::arg("path"))
        .def("save", [](const Model& md, const std::filesystem::path& p) { save_checkpoint(md.checkpoint, p); },
             py::arg("path"))
        .def_property_readonly("num_params", [](const Model& md) { return md.checkpoint.params.size(); })
        .def_property_readonly("final_loss", [](const Model& md) { return md.report.final_loss; })
        .def_property_readonly("epoch_losses",
                               [](const Model& md) {
                                   std::vector<double> v;
                                   for (const auto& e : md.report.epochs) {
                                       v.push_back(e.mean_loss);
                                   }
                                   return v;
                               })
        .def(
            "velocity",
            [](const Model& md, const Array& a, double t, const Corpus& corpus, std::optional<std::uint32_t> cond,
               double guidance) {
                const auto rows = rows_of(a, md.checkpoint.params.config().activation_dim);
                Condition c;
                if (cond) {
                    c = Condition::of(condition_or_throw(corpus, *cond));
                }
                std::vector<Vector> out;
                for (const auto& r : rows) {
                    out.push_back(guided_velocity(md.checkpoint.params, r, t, c, 0, 0, guidance));
                }
                return to_array(out, md.checkpoint.params.config().activation_dim);
            },
            py::arg("activations"), py::arg("t"), py::arg("corpus"), py::arg("condition") = py::none(),
            py::arg("guidance") = 1.0, "Guided velocity in model space at layer 0, position 0.");

    m.def(
        "train",
        [](const Corpus& corpus, std::uint32_t hidden, std::uint32_t blocks, std::uint32_t time_dim,
           std::uint32_t epochs, std::uint32_t batch_size, double lr, double weight_decay, double p_drop,
           std::uint64_t seed) {
            ModelConfig mc;
            mc.activation_dim = corpus.header.activation_dim;
            mc.condition_dim = corpus.header.condition_dim;
            mc.hidden_dim = hidden;
            mc.num_blocks = blocks;
            mc.time_embed_dim = time_dim;
            for (const auto& r : corpus.records) {
                mc.max_layers = std::max(mc.max_layers, r.layer + 1);
            }
            TrainConfig tc;
            tc.epochs = epochs;
            tc.batch_size = batch_size;
            tc.peak_lr = lr;
            tc.weight_decay = weight_decay;
            tc.p_drop = p_drop;
            tc.seed = seed;
            std::optional<TrainResult> r;
            {
                py::gil_scoped_release release;
                r.emplace(train(corpus, mc, tc));
            }
            return Model{std::move(r->checkpoint), std::move(r->report)};
        },
        py::arg("corpus"), py::arg("hidden") = 64, py::arg("blocks") = 2, py::arg("time_dim") = 16,
        py::arg("epochs") = 10, py::arg("batch_size") = 64, py::arg("lr") = 4e-5, py::arg("weight_decay") = 0.01,
        py::arg("p_drop") = 0.1, py::arg("seed") = 0);

    m.def(
        "edit",
        [](const Model& md, const Corpus& corpus, const Array& a, std::uint32_t source, std::uint32_t target,
           double strength, std::uint32_t steps, double guidance, std::optional<std::uint32_t> inversion_steps,
           double inversion_guidance, std::optional<std::vector<std::uint32_t>> layers,
           std::optional<std::vector<std::uint32_t>> positions) {
            const auto rows = rows_of(a, corpus.header.activation_dim);
            const auto ls = broadcast_u32(layers, rows.size(), "layers");
            const auto ps = broadcast_u32(positions, rows.size(), "positions");
            EditSpec spec;
            spec.source = Condition::of(condition_or_throw(corpus, source));
            spec.target = Condition::of(condition_or_throw(corpus, target));
            spec.strength = strength;
            spec.forward = SolveSpec{steps, guidance, 1.0};
            spec.inversion =
                SolveSpec{inversion_steps.value_or(leg_steps(steps, spec.tau(), 1.0)), 1.0, inversion_guidance};
            std::vector<Vector> out;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                out.push_back(edit_activation(md.checkpoint, rows[i], spec, ls[i], ps[i]));
            }
            return to_array(out, corpus.header.activation_dim);
        },
        py::arg("model"), py::arg("corpus"), py::arg("activations"), py::arg("source"), py::arg("target"),
        py::arg("strength") = 0.5, py::arg("steps") = 30, py::arg("guidance") = 1.0,
        py::arg("inversion_steps") = py::none(), py::arg("inversion_guidance") = 1.0, py::arg("layers") = py::none(),
        py::arg("positions") = py::none(),
        "Inverts each row under the source condition and regenerates it under the target.");

    m.def(
        "generate",
        [](const Model& md, const Corpus& corpus, std::uint32_t condition, std::size_t count, std::uint32_t steps,
           double guidance, std::uint64_t seed) {
            const auto& params = md.checkpoint.params;
            const ModelField field(params);
            const Condition c = Condition::of(condition_or_throw(corpus, condition));
            std::vector<Vector> out;
            for (std::size_t i = 0; i < count; ++i) {
                Rng rng = Rng::substream(seed, i);
                const Vector x =
                    generate(field, rng, params.config().activation_dim, c, 0, 0, SolveSpec{steps, guidance, 1.0});
                out.push_back(from_model_space(md.checkpoint, x, 0));
            }
            return to_array(out, params.config().activation_dim);
        },
        py::arg("model"), py::arg("corpus"), py::arg("condition"), py::arg("count") = 100, py::arg("steps") = 30,
        py::arg("guidance") = 1.0, py::arg("seed") = 0);

    m.def(
        "classify",
        [](const Model& md, const Corpus& corpus, const Array& a, double tau, std::uint32_t steps,
           std::optional<std::vector<std::uint32_t>> layers, std::optional<std::vector<std::uint32_t>> positions) {
            const auto rows = rows_of(a, corpus.header.activation_dim);
            const auto ls = broadcast_u32(layers, rows.size(), "layers");
            const auto ps = broadcast_u32(positions, rows.size(), "positions");
            std::vector<std::uint32_t> predicted;
            std::vector<Vector> energies;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const Vector x = to_model_space(md.checkpoint, rows[i], ls[i]);
                const EnergyReport r =
                    classify(md.checkpoint.params, x, corpus.conditions, ls[i], ps[i], tau, SolveSpec{steps, 1.0, 1.0});
                predicted.push_back(r.predicted);
                Vector e;
                for (const auto& c : r.energies) {
                    e.push_back(c.energy);
                }
                energies.push_back(e);
            }
            return py::make_tuple(predicted, to_array(energies, corpus.conditions.size()));
        },
        py::arg("model"), py::arg("corpus"), py::arg("activations"), py::arg("tau") = 0.5, py::arg("steps") = 10,
        py::arg("layers") = py::none(), py::arg("positions") = py::none(),
        "Returns (predicted ids, energies[n, conditions]) by minimum reconstruction energy.");

    m.def(
        "auc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "caa_direction", [](const Array& pos, const Array& neg) { return caa_direction(rows_of(pos), rows_of(neg)); },
        py::arg("positive"), py::arg("negative"));
    m.def(
        "repe_direction",
        [](const Array& pos, const Array& neg) { return repe_direction(rows_of(pos), rows_of(neg)); },
        py::arg("positive"), py::arg("negative"));
}
