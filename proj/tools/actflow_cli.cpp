// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "actflow/error.hpp"
#include "cli_commands.hpp"
#include "json.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

bool flag_present(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args) {
        if (a == flag || a.rfind(flag + "=", 0) == 0) {
            return true;
        }
    }
    return false;
}

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number()) {
        return v.dump();
    }
    throw actflow::cli::UsageError("--config: value of '" + key + "' must be a string, number, bool or array");
}

// Appends the flags from a JSON config file that the command line does not already set.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    if (path.empty()) {
        return args;
    }
    std::ifstream in(path);
    if (!in) {
        return args;  // the --config validator reports the missing file
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw actflow::cli::UsageError("--config: " + std::string(e.what()));
    }
    if (!doc.is_object()) {
        throw actflow::cli::UsageError("--config: expected a JSON object of flag values");
    }
    std::vector<std::string> extra;
    for (const auto& [key, value] : doc.items()) {
        const std::string flag = "--" + key;
        if (flag_present(args, flag) || value.is_null()) {
            continue;
        }
        if (value.is_boolean()) {
            if (value.get<bool>()) {
                extra.push_back(flag);
            }
        } else if (value.is_array()) {
            extra.push_back(flag);
            for (const auto& item : value) {
                extra.push_back(scalar_text(item, key));
            }
        } else {
            extra.push_back(flag);
            extra.push_back(scalar_text(value, key));
        }
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"actflow: conditional flow matching on model activations"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    actflow::cli::Runner selected;
    actflow::cli::add_commands(app, selected);

    try {
        std::vector<std::string> args = merge_config(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const actflow::cli::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }

    try {
        selected();
    } catch (const actflow::cli::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const actflow::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.kind()) {
            case actflow::ErrorKind::Config:
            case actflow::ErrorKind::Argument:
            case actflow::ErrorKind::InvalidDimension:
            case actflow::ErrorKind::Template:
                return kExitUsage;
            default:
                return kExitRuntime;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
