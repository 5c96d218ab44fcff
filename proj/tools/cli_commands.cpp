// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "actflow/analysis.hpp"
#include "actflow/binary_io.hpp"
#include "actflow/classifier.hpp"
#include "actflow/corpus.hpp"
#include "actflow/error.hpp"
#include "actflow/flow.hpp"
#include "actflow/protocol.hpp"
#include "actflow/steering.hpp"
#include "actflow/trainer.hpp"

namespace actflow::cli {

namespace {

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

Vector parse_vector(const std::string& text, const std::string& flag) {
    Vector out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || !std::isfinite(v)) {
                throw std::invalid_argument(item);
            }
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError(flag + ": '" + item + "' is not a finite number");
        }
    }
    if (out.empty()) {
        throw UsageError(flag + ": expected a comma-separated list of numbers");
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    io::write_file(path, bytes);
}

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

const ConditionEntry& require_condition(const Corpus& corpus, std::uint32_t id, const std::string& flag) {
    for (const auto& c : corpus.conditions) {
        if (c.id == id) {
            return c;
        }
    }
    throw UsageError(flag + ": unknown condition id " + std::to_string(id) + " (corpus has " +
                     std::to_string(corpus.conditions.size()) + " conditions)");
}

Corpus load_corpus(const std::string& path) { return read_corpus(path); }

/// Loads a checkpoint and checks it against the corpus it will be applied to.
Checkpoint load_model_for(const std::string& path, const Corpus& corpus) {
    Checkpoint ckpt = load_checkpoint(path);
    const ModelConfig& mc = ckpt.params.config();
    if (mc.activation_dim != corpus.header.activation_dim) {
        throw UsageError("--model: checkpoint activation dim " + std::to_string(mc.activation_dim) +
                         " does not match corpus dim " + std::to_string(corpus.header.activation_dim));
    }
    if (mc.condition_dim != corpus.header.condition_dim) {
        throw UsageError("--model: checkpoint condition dim " + std::to_string(mc.condition_dim) +
                         " does not match corpus condition dim " + std::to_string(corpus.header.condition_dim));
    }
    return ckpt;
}

void require_layers(const Checkpoint& ckpt, std::span<const ActivationRecord> records) {
    const std::uint32_t max_layers = ckpt.params.config().max_layers;
    for (const auto& r : records) {
        if (r.layer >= max_layers) {
            throw UsageError("record layer " + std::to_string(r.layer) + " is outside the model's " +
                             std::to_string(max_layers) + " layers");
        }
    }
}

std::vector<ActivationRecord> records_of(const Corpus& corpus, std::uint32_t condition_id, std::uint64_t limit) {
    std::vector<ActivationRecord> out;
    for (const auto& r : corpus.records) {
        if (limit != 0 && out.size() >= limit) {
            break;
        }
        if (r.condition_id == condition_id) {
            out.push_back(r);
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// edit flags shared by edit, sweep, analyze and edit-server
// ---------------------------------------------------------------------------

struct EditFlags {
    std::uint32_t source = 0;
    std::uint32_t target = 1;
    std::string preset;
    double strength = 0.5;
    std::uint32_t steps = 30;
    std::uint32_t inversion_steps = 0;
    double cfg = 1.0;
    double inversion_cfg = 1.0;

    CLI::Option* strength_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* inversion_steps_opt = nullptr;
};

void add_edit_flags(CLI::App* sub, EditFlags& f) {
    sub->add_option("--source", f.source, "Source condition id")->required();
    sub->add_option("--target", f.target, "Target condition id")->required();
    sub->add_option("--preset", f.preset, "Solver preset: persona, truthfulqa, concept (axbench), constraint (recast)")
        ->check([](const std::string& name) {
            return find_preset(name) ? std::string() : "unknown preset '" + name + "'";
        });
    f.strength_opt = sub->add_option("--strength", f.strength, "Edit strength lambda in [0, 1]; tau = 1 - lambda")
                         ->check(CLI::Range(0.0, 1.0));
    f.steps_opt = sub->add_option("--steps", f.steps, "ODE grid resolution over [0, 1] (default 30)")
                      ->check(CLI::PositiveNumber);
    f.inversion_steps_opt =
        sub->add_option("--inversion-steps", f.inversion_steps, "Euler steps of the inversion leg 1 -> tau")
            ->check(CLI::PositiveNumber);
    sub->add_option("--cfg", f.cfg, "Guidance scale w of the regeneration leg (default 1)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--inversion-cfg", f.inversion_cfg, "Guidance scale of the inversion leg (default 1)")
        ->check(CLI::NonNegativeNumber);
}

EditSpec resolve_edit(const EditFlags& f, const Corpus& corpus) {
    EditSpec spec;
    spec.source = Condition::of(require_condition(corpus, f.source, "--source"));
    spec.target = Condition::of(require_condition(corpus, f.target, "--target"));
    std::uint32_t steps = 30;
    double strength = 0.5;
    std::optional<std::uint32_t> inversion_steps;
    if (!f.preset.empty()) {
        const Preset p = *find_preset(f.preset);
        steps = p.ode_steps;
        strength = 1.0 - p.tau;
        inversion_steps = p.inversion_steps;
    }
    if (given(f.steps_opt)) {
        steps = f.steps;
    }
    if (given(f.strength_opt)) {
        strength = f.strength;
    }
    if (given(f.inversion_steps_opt)) {
        inversion_steps = f.inversion_steps;
    }
    spec.strength = strength;
    spec.forward = SolveSpec{steps, f.cfg, 1.0};
    spec.inversion = SolveSpec{inversion_steps.value_or(leg_steps(steps, 1.0 - strength, 1.0)), 1.0, f.inversion_cfg};
    spec.validate();
    return spec;
}

std::vector<double> preset_grid(const EditFlags& f) {
    if (f.preset.empty()) {
        return {f.cfg};
    }
    return find_preset(f.preset)->guidance_grid;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
    std::string out;
    std::uint32_t conditions = 2;
    std::uint32_t dim = 2;
    std::uint32_t cond_dim = 0;
    std::uint32_t records = 1000;
    double separation = 3.0;
    std::vector<std::string> means;
    double scale = 1.0;
    std::vector<std::uint32_t> layers{0};
    std::uint32_t positions = 1;
    std::uint32_t plant_condition = 0;
    std::string plant_offset;
    std::uint32_t plant_positions = 4;
    bool normalize = false;
    std::vector<std::string> labels;
    std::string label_template = "Be [trait].";
    std::uint64_t seed = 0;
};

void run_synth(const SynthOptions& o) {
    SynthSpec spec;
    spec.num_conditions = o.conditions;
    spec.activation_dim = o.dim;
    spec.condition_dim = o.cond_dim;
    spec.scale = o.scale;
    spec.records_per_condition = o.records;
    spec.layers = o.layers;
    spec.positions_per_record = o.positions;
    spec.seed = o.seed;
    spec.with_normalization = o.normalize;
    spec.labels = o.labels;
    spec.label_template = o.label_template;
    if (!o.means.empty()) {
        if (o.means.size() != o.conditions) {
            throw UsageError("--mean: expected one mean per condition (" + std::to_string(o.conditions) + "), got " +
                             std::to_string(o.means.size()));
        }
        for (const auto& m : o.means) {
            Vector v = parse_vector(m, "--mean");
            if (v.size() != o.dim) {
                throw UsageError("--mean: each mean needs " + std::to_string(o.dim) + " values");
            }
            spec.means.push_back(std::move(v));
        }
    } else {
        for (std::uint32_t k = 0; k < o.conditions; ++k) {
            const double sign =
                o.conditions == 1 ? 1.0 : 1.0 - 2.0 * static_cast<double>(k) / static_cast<double>(o.conditions - 1);
            spec.means.emplace_back(o.dim, o.separation * sign);
        }
    }
    if (!o.plant_offset.empty()) {
        Vector off = parse_vector(o.plant_offset, "--plant-offset");
        if (off.size() != o.dim) {
            throw UsageError("--plant-offset: needs " + std::to_string(o.dim) + " values");
        }
        spec.planted = PlantedOffset{o.plant_condition, std::move(off), o.plant_positions};
    }
    spec.validate();
    const Corpus corpus = synth_corpus(spec);
    write_corpus(corpus, o.out);
    std::cout << "wrote " << corpus.records.size() << " records (d=" << corpus.header.activation_dim
              << ", e=" << corpus.header.condition_dim << ") to " << o.out << "\n";
}

void add_synth(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<SynthOptions>();
    auto* sub = app.add_subcommand("synth", "Write a synthetic Gaussian-mixture corpus in UAFC1 format");
    sub->add_option("--out", o->out, "Output corpus path")->required();
    sub->add_option("--conditions", o->conditions, "Number of conditions")->check(CLI::PositiveNumber);
    sub->add_option("--dim", o->dim, "Activation dimension")->check(CLI::PositiveNumber);
    sub->add_option("--cond-dim", o->cond_dim, "Condition embedding dimension (0: number of conditions)");
    sub->add_option("--records", o->records, "Records per condition")->check(CLI::PositiveNumber);
    sub->add_option("--separation", o->separation,
                    "Default means run from +separation (first condition) to -separation (last) on every axis");
    sub->add_option("--mean", o->means, "Explicit mean per condition, comma-separated; repeat once per condition");
    sub->add_option("--scale", o->scale, "Per-coordinate standard deviation")->check(CLI::NonNegativeNumber);
    sub->add_option("--layers", o->layers, "Layer indices");
    sub->add_option("--positions", o->positions, "Token positions per record cycle")->check(CLI::PositiveNumber);
    sub->add_option("--plant-condition", o->plant_condition, "Condition that receives the planted offset");
    sub->add_option("--plant-offset", o->plant_offset, "Offset added at start positions, comma-separated");
    sub->add_option("--plant-positions", o->plant_positions, "Number of start positions carrying the offset")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--normalize", o->normalize, "Store per-layer normalization statistics");
    sub->add_option("--labels", o->labels, "Condition labels");
    sub->add_option("--label-template", o->label_template, "Template with one [placeholder] for each label");
    sub->add_option("--seed", o->seed, "Random seed");
    sub->callback([o, &selected] { selected = [o] { run_synth(*o); }; });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string corpus;
    std::string out;
    std::string loss_csv_path;
    TrainConfig train;
    std::uint64_t warmup = 0;
    CLI::Option* warmup_opt = nullptr;
    std::uint32_t hidden = 64;
    std::uint32_t blocks = 2;
    std::uint32_t time_dim = 16;
    std::uint32_t position_buckets = 1;
    std::uint32_t bucket_width = 4;
    bool no_learned_null = false;
    bool quiet = false;
};

void run_train(const TrainOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    TrainConfig config = o.train;
    if (given(o.warmup_opt)) {
        config.warmup_steps = o.warmup;
    }
    config.validate();
    ModelConfig mc;
    mc.activation_dim = corpus.header.activation_dim;
    mc.condition_dim = corpus.header.condition_dim;
    mc.hidden_dim = o.hidden;
    mc.num_blocks = o.blocks;
    mc.time_embed_dim = o.time_dim;
    mc.max_positions = o.position_buckets;
    mc.position_bucket_width = o.bucket_width;
    mc.learned_null = !o.no_learned_null;
    std::uint32_t max_layer = 0;
    for (const auto& r : corpus.records) {
        max_layer = std::max(max_layer, r.layer);
    }
    mc.max_layers = max_layer + 1;
    try {
        mc.validate();
    } catch (const Error& e) {
        throw UsageError(e.detail());
    }
    const bool quiet = o.quiet;
    const TrainResult result = train(corpus, mc, config, [quiet](const EpochStats& s) {
        if (!quiet) {
            std::printf("epoch %u loss %.6g lr %.6g\n", s.epoch, s.mean_loss, s.lr);
        }
    });
    save_checkpoint(result.checkpoint, o.out);
    const std::string csv_path = o.loss_csv_path.empty() ? o.out + ".loss.csv" : o.loss_csv_path;
    write_text(csv_path, loss_csv(result.report));
    std::printf("final_loss %.6g\n", result.report.final_loss);
    std::printf("steps %llu\n", static_cast<unsigned long long>(result.report.steps));
    std::fprintf(stderr, "wall_seconds %.2f\n", result.report.wall_seconds);
}

void add_train(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<TrainOptions>();
    auto* sub = app.add_subcommand("train", "Train a conditional velocity field on a UAFC1 corpus");
    sub->add_option("--corpus", o->corpus, "Training corpus (UAFC1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Output checkpoint path")->required();
    sub->add_option("--loss-csv", o->loss_csv_path, "Per-epoch loss CSV (default: <out>.loss.csv)");
    sub->add_option("--epochs", o->train.epochs, "Training epochs")->check(CLI::PositiveNumber);
    sub->add_option("--batch-size", o->train.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
    sub->add_option("--lr", o->train.peak_lr, "Peak learning rate")->check(CLI::PositiveNumber);
    o->warmup_opt = sub->add_option("--warmup", o->warmup, "Warmup steps (default: 5% of all steps)");
    sub->add_option("--p-drop", o->train.p_drop, "Condition dropout probability")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--weight-decay", o->train.weight_decay, "AdamW decoupled weight decay")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", o->train.seed, "Random seed");
    sub->add_option("--hidden", o->hidden, "Hidden width")->check(CLI::PositiveNumber);
    sub->add_option("--blocks", o->blocks, "Residual blocks")->check(CLI::PositiveNumber);
    sub->add_option("--time-dim", o->time_dim, "Time embedding width (even)")->check(CLI::PositiveNumber);
    sub->add_option("--position-buckets", o->position_buckets, "Number of learned position buckets")
        ->check(CLI::PositiveNumber);
    sub->add_option("--bucket-width", o->bucket_width, "Positions per bucket")->check(CLI::PositiveNumber);
    sub->add_flag("--no-learned-null", o->no_learned_null, "Use a zero null embedding instead of a learned one");
    sub->add_flag("--quiet", o->quiet, "Do not print per-epoch lines");
    sub->callback([o, &selected] { selected = [o] { run_train(*o); }; });
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::string model;
    std::string corpus;
    std::string out;
    std::uint32_t condition = 0;
    std::uint32_t count = 100;
    std::uint32_t steps = 30;
    double cfg = 1.0;
    std::uint32_t layer = 0;
    std::uint32_t position = 0;
    std::uint64_t seed = 0;
};

void run_generate(const GenerateOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    const ConditionEntry& entry = require_condition(corpus, o.condition, "--condition");
    const Checkpoint ckpt = load_model_for(o.model, corpus);
    if (o.layer >= ckpt.params.config().max_layers) {
        throw UsageError("--layer: model has " + std::to_string(ckpt.params.config().max_layers) + " layers");
    }
    const SolveSpec spec{o.steps, o.cfg, 1.0};
    const ModelField field(ckpt.params);
    Corpus out;
    out.conditions = corpus.conditions;
    out.header = corpus.header;
    for (std::uint32_t i = 0; i < o.count; ++i) {
        Rng rng = Rng::substream(o.seed, i);
        const Vector x = generate(field, rng, corpus.header.activation_dim, Condition::of(entry), o.layer,
                                  o.position, spec);
        out.records.push_back(
            {o.layer, o.position, o.condition, to_storage_precision(from_model_space(ckpt, x, o.layer))});
    }
    out.header = make_header(corpus.header.activation_dim, corpus.header.condition_dim, out.conditions, out.records);
    out.header.normalization = corpus.header.normalization;
    write_corpus(out, o.out);
    std::cout << "wrote " << out.records.size() << " samples to " << o.out << "\n";
}

void add_generate(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<GenerateOptions>();
    auto* sub = app.add_subcommand("generate", "Transport prior samples to activations under one condition");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", o->corpus, "Corpus whose condition table names the condition")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Output corpus path (UAFC1)")->required();
    sub->add_option("--condition", o->condition, "Condition id")->required();
    sub->add_option("--count", o->count, "Number of samples")->check(CLI::PositiveNumber);
    sub->add_option("--steps", o->steps, "Euler steps")->check(CLI::PositiveNumber);
    sub->add_option("--cfg", o->cfg, "Guidance scale")->check(CLI::NonNegativeNumber);
    sub->add_option("--layer", o->layer, "Layer index");
    sub->add_option("--position", o->position, "Token position");
    sub->add_option("--seed", o->seed, "Random seed");
    sub->callback([o, &selected] { selected = [o] { run_generate(*o); }; });
}

// ---------------------------------------------------------------------------
// edit
// ---------------------------------------------------------------------------

struct EditOptions {
    std::string model;
    std::string in;
    std::string out;
    EditFlags flags;
    bool only_source = false;
};

void run_edit(const EditOptions& o) {
    const Corpus corpus = load_corpus(o.in);
    const EditSpec spec = resolve_edit(o.flags, corpus);
    const Checkpoint ckpt = load_model_for(o.model, corpus);
    require_layers(ckpt, corpus.records);

    Corpus out = corpus;
    if (o.only_source) {
        for (std::size_t i = 0; i < out.records.size(); ++i) {
            auto& rec = out.records[i];
            if (rec.condition_id != o.flags.source) {
                continue;
            }
            try {
                rec.activation = to_storage_precision(edit_activation(ckpt, rec.activation, spec, rec.layer, rec.position));
            } catch (const Error& e) {
                throw Error(e.kind(), "record " + std::to_string(i) + ": " + e.detail());
            }
        }
    } else {
        out.records = edit_records(ckpt, corpus.records, spec);
    }
    write_corpus(out, o.out);
    std::printf("edited %zu records (lambda %.6g, inversion steps %u, grid %u, w %.6g) -> %s\n", out.records.size(),
                spec.strength, spec.inversion.steps, spec.forward.steps, spec.forward.guidance_scale, o.out.c_str());
}

void add_edit(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<EditOptions>();
    auto* sub = app.add_subcommand("edit", "Invert activations under the source condition and regenerate under the target");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--in", o->in, "Input activations (UAFC1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Output activations (UAFC1)")->required();
    add_edit_flags(sub, o->flags);
    sub->add_flag("--only-source", o->only_source, "Edit only records labelled with the source condition");
    sub->callback([o, &selected] { selected = [o] { run_edit(*o); }; });
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

struct ClassifyOptions {
    std::string model;
    std::string corpus;
    std::string out;
    std::vector<std::uint32_t> candidates;
    double tau = 0.5;
    std::uint32_t steps = 10;
    double cfg = 1.0;
    double inversion_cfg = 1.0;
    std::uint32_t positive = 0;
    std::uint32_t negative = 0;
    CLI::Option* positive_opt = nullptr;
    CLI::Option* negative_opt = nullptr;
    bool require_auc = false;
    std::uint64_t max_records = 0;
};

void run_classify(const ClassifyOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    std::vector<ConditionEntry> candidates;
    if (o.candidates.empty()) {
        candidates = corpus.conditions;
    } else {
        for (std::uint32_t id : o.candidates) {
            candidates.push_back(require_condition(corpus, id, "--candidates"));
        }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const ConditionEntry& a, const ConditionEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].id == candidates[i - 1].id) {
            throw UsageError("--candidates: duplicate condition id " + std::to_string(candidates[i].id));
        }
    }
    if (candidates.empty()) {
        throw UsageError("--candidates: the corpus has no conditions");
    }
    const Checkpoint ckpt = load_model_for(o.model, corpus);

    std::vector<ActivationRecord> records = corpus.records;
    if (o.max_records != 0 && records.size() > o.max_records) {
        records.resize(o.max_records);
    }
    require_layers(ckpt, records);

    const bool binary = candidates.size() == 2;
    std::uint32_t neg = binary ? candidates[0].id : 0;
    std::uint32_t pos = binary ? candidates[1].id : 0;
    if (given(o.negative_opt) || given(o.positive_opt)) {
        if (!binary) {
            throw UsageError("--positive/--negative need exactly two candidates");
        }
        if (given(o.positive_opt)) {
            pos = o.positive;
            neg = pos == candidates[0].id ? candidates[1].id : candidates[0].id;
        }
        if (given(o.negative_opt)) {
            neg = o.negative;
            if (!given(o.positive_opt)) {
                pos = neg == candidates[0].id ? candidates[1].id : candidates[0].id;
            }
        }
        const auto is_cand = [&](std::uint32_t id) { return id == candidates[0].id || id == candidates[1].id; };
        if (!is_cand(pos) || !is_cand(neg) || pos == neg) {
            throw UsageError("--positive/--negative must name the two candidates");
        }
    }

    std::vector<int> labels;
    bool has_pos = false;
    bool has_neg = false;
    if (binary) {
        for (const auto& r : records) {
            if (r.condition_id == pos) {
                has_pos = true;
            } else if (r.condition_id == neg) {
                has_neg = true;
            }
        }
    }
    const bool auc_possible = binary && has_pos && has_neg;
    if (o.require_auc && !auc_possible) {
        throw UsageError(binary ? "--auc: labels contain only one of the two classes"
                                : "--auc: AUC needs exactly two candidates");
    }
    if (!(o.tau >= 0.0 && o.tau < 1.0)) {
        throw UsageError("--tau: must lie in [0, 1)");
    }
    const SolveSpec spec{o.steps, o.cfg, o.inversion_cfg};

    std::string csv = "index,layer,position,label";
    for (const auto& c : candidates) {
        csv += ",energy_" + std::to_string(c.id);
    }
    csv += ",predicted";
    if (binary) {
        csv += ",score";
    }
    csv += '\n';

    const ModelField field(ckpt.params);
    std::uint64_t labelled = 0;
    std::uint64_t correct = 0;
    std::vector<double> scores;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        const Vector a = to_model_space(ckpt, rec.activation, rec.layer);
        EnergyReport report;
        try {
            report = classify(field, a, candidates, rec.layer, rec.position, o.tau, spec);
        } catch (const Error& e) {
            throw Error(e.kind(), "record " + std::to_string(i) + ": " + e.detail());
        }
        csv += std::to_string(i) + ',' + std::to_string(rec.layer) + ',' + std::to_string(rec.position) + ',' +
               std::to_string(rec.condition_id);
        for (const auto& ce : report.energies) {
            csv += ',' + fmt(ce.energy);
        }
        csv += ',' + std::to_string(report.predicted);
        const bool in_candidates = std::any_of(candidates.begin(), candidates.end(),
                                               [&](const ConditionEntry& c) { return c.id == rec.condition_id; });
        if (in_candidates) {
            ++labelled;
            correct += report.predicted == rec.condition_id ? 1 : 0;
        }
        if (binary) {
            const double score = binary_score(report, neg, pos);
            csv += ',' + fmt(score);
            if (in_candidates) {
                scores.push_back(score);
                labels.push_back(rec.condition_id == pos ? 1 : 0);
            }
        }
        csv += '\n';
    }
    if (!o.out.empty()) {
        write_text(o.out, csv);
    }
    std::printf("records %zu\n", records.size());
    if (labelled > 0) {
        std::printf("accuracy %.6f\n", static_cast<double>(correct) / static_cast<double>(labelled));
    } else {
        std::printf("accuracy n/a\n");
    }
    if (auc_possible) {
        std::printf("auc %.6f (positive %u, negative %u)\n", auc(scores, labels), pos, neg);
    }
}

void add_classify(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<ClassifyOptions>();
    auto* sub = app.add_subcommand("classify", "Pick the condition with the lowest reconstruction energy per record");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", o->corpus, "Labelled corpus (UAFC1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Per-record CSV");
    sub->add_option("--candidates", o->candidates, "Candidate condition ids (default: all)");
    sub->add_option("--tau", o->tau, "Inversion depth in [0, 1)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--steps", o->steps, "ODE grid resolution; each leg gets round(steps * (1 - tau))")
        ->check(CLI::PositiveNumber);
    sub->add_option("--cfg", o->cfg, "Guidance on the regeneration leg")->check(CLI::NonNegativeNumber);
    sub->add_option("--inversion-cfg", o->inversion_cfg, "Guidance on the inversion leg")
        ->check(CLI::NonNegativeNumber);
    o->positive_opt = sub->add_option("--positive", o->positive, "Positive class id for the binary score");
    o->negative_opt = sub->add_option("--negative", o->negative, "Negative class id for the binary score");
    sub->add_flag("--auc", o->require_auc, "Fail unless an AUC can be computed");
    sub->add_option("--max-records", o->max_records, "Classify only the first N records");
    sub->callback([o, &selected] { selected = [o] { run_classify(*o); }; });
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
    std::string model;
    std::string corpus;
    std::string out;
    EditFlags flags;
    std::vector<double> grid;
    double w_min = 0.0;
    double w_max = 0.0;
    double w_step = 0.0;
    CLI::Option* w_min_opt = nullptr;
    CLI::Option* w_max_opt = nullptr;
    CLI::Option* w_step_opt = nullptr;
    std::string metric = "target-accuracy";
    std::uint64_t max_records = 0;
};

void run_sweep(const SweepOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    const EditSpec spec = resolve_edit(o.flags, corpus);
    const int range_flags = static_cast<int>(given(o.w_min_opt)) + static_cast<int>(given(o.w_max_opt)) +
                            static_cast<int>(given(o.w_step_opt));
    if (range_flags != 0 && range_flags != 3) {
        throw UsageError("--w-min, --w-max and --w-step must be given together");
    }
    if (range_flags == 3 && !o.grid.empty()) {
        throw UsageError("--w-grid cannot be combined with --w-min/--w-max/--w-step");
    }
    std::vector<double> grid = o.grid;
    if (range_flags == 3) {
        if (!(o.w_step > 0.0) || o.w_max < o.w_min) {
            throw UsageError("--w-step must be positive and --w-max >= --w-min");
        }
        grid = arithmetic_grid(o.w_min, o.w_max, o.w_step);
    }
    if (grid.empty()) {
        grid = preset_grid(o.flags);
    }
    for (double w : grid) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw UsageError("--w-grid: guidance scales must be finite and >= 0");
        }
    }
    const auto metric = parse_steering_metric(o.metric);
    const Checkpoint ckpt = load_model_for(o.model, corpus);
    const auto src_centroid = condition_centroid(corpus.records, o.flags.source);
    const auto tgt_centroid = condition_centroid(corpus.records, o.flags.target);
    if (!src_centroid || !tgt_centroid) {
        throw UsageError("the corpus needs records of both the source and the target condition");
    }
    const auto sources = records_of(corpus, o.flags.source, o.max_records);
    require_layers(ckpt, sources);
    const auto rows = sweep_guidance(ckpt, sources, spec, grid, *metric, {*src_centroid, *tgt_centroid});
    const std::string csv = sweep_csv(rows, *metric);
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_text(o.out, csv);
        std::printf("wrote %zu rows to %s\n", rows.size(), o.out.c_str());
    }
}

void add_sweep(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<SweepOptions>();
    auto* sub = app.add_subcommand("sweep", "Edit source records over a grid of guidance scales and score each run");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", o->corpus, "Corpus with source and target records")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "CSV output (default: stdout)");
    add_edit_flags(sub, o->flags);
    sub->add_option("--w-grid", o->grid, "Explicit guidance values");
    o->w_min_opt = sub->add_option("--w-min", o->w_min, "Grid start");
    o->w_max_opt = sub->add_option("--w-max", o->w_max, "Grid end (inclusive)");
    o->w_step_opt = sub->add_option("--w-step", o->w_step, "Grid step");
    sub->add_option("--metric", o->metric, "target-accuracy, target-distance or edit-distance")
        ->check([](const std::string& m) {
            return parse_steering_metric(m) ? std::string() : "unknown metric '" + m + "'";
        });
    sub->add_option("--max-records", o->max_records, "Use only the first N source records");
    sub->callback([o, &selected] { selected = [o] { run_sweep(*o); }; });
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    std::string model;
    std::string corpus;
    EditFlags flags;
    std::string method = "caa";
    std::uint32_t direction_bucket = 0;
    CLI::Option* bucket_opt = nullptr;
    std::string directions_in;
    std::string out_profile;
    std::string out_directions;
    std::string directions_csv_path;
    std::uint64_t max_records = 0;
};

DirectionSet estimate_directions(const Corpus& corpus, const AnalyzeOptions& o, const ModelConfig& bucketing) {
    DirectionSet set;
    set.method = o.method == "repe" ? DirectionMethod::RepE : DirectionMethod::Caa;
    set.label = std::to_string(o.flags.source) + "->" + std::to_string(o.flags.target);
    std::map<std::uint32_t, std::pair<std::vector<Vector>, std::vector<Vector>>> by_layer;
    for (const auto& r : corpus.records) {
        if (given(o.bucket_opt) && bucketing.position_bucket(r.position) != o.direction_bucket) {
            continue;
        }
        if (r.condition_id == o.flags.target) {
            by_layer[r.layer].first.push_back(r.activation);
        } else if (r.condition_id == o.flags.source) {
            by_layer[r.layer].second.push_back(r.activation);
        }
    }
    for (auto& [layer, pn] : by_layer) {
        auto& [positive, negative] = pn;
        if (positive.empty() || negative.empty()) {
            continue;
        }
        try {
            if (set.method == DirectionMethod::Caa) {
                set.directions[layer] = caa_direction(positive, negative);
            } else {
                const std::size_t n = std::min(positive.size(), negative.size());
                positive.resize(n);
                negative.resize(n);
                set.directions[layer] = repe_direction(positive, negative);
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "layer " + std::to_string(layer) + ": " + e.detail());
        }
        // Same values the UADR1 file will hold, so a profile from --directions reproduces this one.
        set.directions[layer] = to_storage_precision(set.directions[layer]);
    }
    if (set.directions.empty()) {
        throw UsageError("no layer has records of both the source and the target condition");
    }
    return set;
}

void run_analyze(const AnalyzeOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    const EditSpec spec = resolve_edit(o.flags, corpus);
    const Checkpoint ckpt = load_model_for(o.model, corpus);
    const auto sources = records_of(corpus, o.flags.source, o.max_records);
    if (sources.empty()) {
        throw UsageError("--source: the corpus has no records of condition " + std::to_string(o.flags.source));
    }
    require_layers(ckpt, sources);
    const DirectionSet directions = o.directions_in.empty()
                                        ? estimate_directions(corpus, o, ckpt.params.config())
                                        : load_directions(o.directions_in);
    for (const auto& r : sources) {
        if (!directions.directions.count(r.layer)) {
            throw UsageError("no direction for layer " + std::to_string(r.layer));
        }
        if (directions.directions.at(r.layer).size() != corpus.header.activation_dim) {
            throw UsageError("direction dimension does not match the corpus");
        }
    }
    const AlignmentProfile profile = position_alignment_profile(sources, ckpt, spec, directions);
    const std::string csv = profile_csv(profile);
    if (o.out_profile.empty()) {
        std::cout << csv;
    } else {
        write_text(o.out_profile, csv);
    }
    if (!o.out_directions.empty()) {
        save_directions(directions, o.out_directions);
    }
    if (!o.directions_csv_path.empty()) {
        write_text(o.directions_csv_path, directions_csv(directions));
    }
    for (const auto& row : profile.rows) {
        std::fprintf(stderr, "bucket %u mean_cosine %.6f count %llu\n", row.bucket, row.mean_cosine,
                     static_cast<unsigned long long>(row.count));
    }
    if (profile.skipped > 0) {
        std::fprintf(stderr, "skipped %llu records with a zero edit\n", static_cast<unsigned long long>(profile.skipped));
    }
}

void add_analyze(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<AnalyzeOptions>();
    auto* sub = app.add_subcommand("analyze", "Per-position alignment of edit deltas with a reference direction");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", o->corpus, "Corpus with source and target records")
        ->required()
        ->check(CLI::ExistingFile);
    add_edit_flags(sub, o->flags);
    sub->add_option("--method", o->method, "Reference direction: caa or repe")
        ->check(CLI::IsMember({"caa", "repe"}));
    o->bucket_opt = sub->add_option("--direction-bucket", o->direction_bucket,
                                    "Estimate directions from this position bucket only (default: all)");
    sub->add_option("--directions", o->directions_in, "Use directions from a UADR1 file")->check(CLI::ExistingFile);
    sub->add_option("--out-profile", o->out_profile, "Profile CSV (default: stdout)");
    sub->add_option("--out-directions", o->out_directions, "Write the directions as UADR1");
    sub->add_option("--directions-csv", o->directions_csv_path, "Write the directions as CSV");
    sub->add_option("--max-records", o->max_records, "Edit only the first N source records");
    sub->callback([o, &selected] { selected = [o] { run_analyze(*o); }; });
}

// ---------------------------------------------------------------------------
// edit-server
// ---------------------------------------------------------------------------

struct ServerOptions {
    std::string model;
    std::string corpus;
    EditFlags flags;
};

void run_server(const ServerOptions& o) {
    const Corpus corpus = load_corpus(o.corpus);
    const EditSpec spec = resolve_edit(o.flags, corpus);
    const Checkpoint ckpt = load_model_for(o.model, corpus);
    std::ios::sync_with_stdio(false);
    const protocol::ServeStats stats = protocol::serve_edits(std::cin, std::cout, ckpt, spec);
    std::fprintf(stderr, "served %llu requests, %llu errors\n", static_cast<unsigned long long>(stats.requests),
                 static_cast<unsigned long long>(stats.errors));
}

void add_server(CLI::App& app, Runner& selected) {
    auto o = std::make_shared<ServerOptions>();
    auto* sub = app.add_subcommand("edit-server", "Answer framed edit requests on stdin with edited frames on stdout");
    sub->add_option("--model", o->model, "Checkpoint (UAFM1)")->required()->check(CLI::ExistingFile);
    sub->add_option("--corpus", o->corpus, "Corpus providing the condition table")
        ->required()
        ->check(CLI::ExistingFile);
    add_edit_flags(sub, o->flags);
    sub->callback([o, &selected] { selected = [o] { run_server(*o); }; });
}

}  // namespace

void add_commands(CLI::App& app, Runner& selected) {
    add_synth(app, selected);
    add_train(app, selected);
    add_generate(app, selected);
    add_edit(app, selected);
    add_classify(app, selected);
    add_sweep(app, selected);
    add_analyze(app, selected);
    add_server(app, selected);
    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--config", "JSON object of flag values; flags on the command line take precedence")
            ->check(CLI::ExistingFile);
    }
}

}  // namespace actflow::cli
