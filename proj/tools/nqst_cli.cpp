// Copyright 2026 The nqst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "nqst/cli.hpp"

namespace {

struct Subcommand {
    CLI::App *app = nullptr;
    std::map<std::string, std::string> values;
    std::string config_file;
    std::string preset;
};

const std::map<std::string, std::string> kHelp = {
    {"state", "target: ghz:N, random-clifford:N[:SEED] or noisy-ghz:N:P"},
    {"ensemble", "measurement ensemble: pauli or clifford"},
    {"ensembles", "comma-separated ensembles"},
    {"n", "number of snapshots"},
    {"seed", "master seed (required)"},
    {"out", "output directory (required)"},
    {"dataset", "dataset file"},
    {"checkpoint", "checkpoint file"},
    {"trials", "independent training trials"},
    {"loss", "inf-clifford, inf-pauli, ece or sce"},
    {"sampler", "ns, ss or exact"},
    {"epochs", "training epochs"},
    {"lr", "initial learning rate"},
    {"minibatch", "minibatch size"},
    {"mc", "Monte Carlo samples per estimate"},
    {"patience", "early-stopping patience in epochs"},
    {"validation", "records held out for validation"},
    {"n-anc", "ancilla qubits"},
    {"layers", "transformer layers"},
    {"embed-dim", "embedding dimension"},
    {"heads", "attention heads"},
    {"ff-dim", "feed-forward width (0 = 4 x embed-dim)"},
    {"init-std", "standard deviation of the initial weights"},
    {"swap-pairs", "sample pairs for the swap purity estimate"},
    {"instances", "random targets per grid point"},
    {"qubits", "qubit count(s)"},
    {"shadows", "snapshot count(s)"},
    {"strings", "random Pauli strings"},
    {"letters", "Pauli letters per qubit: IXYZ or XYZ"},
    {"study", "kl, gradient-angle or pauli-prediction"},
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Neural quantum state tomography from classical shadows"};
    app.set_version_flag("--version", NQST_VERSION);
    app.require_subcommand(1);
    std::map<std::string, Subcommand> subs;
    const std::map<std::string, std::string> descriptions = {
        {"generate", "simulate measurements and write a dataset"},
        {"train", "train neural states on a dataset"},
        {"evaluate", "compare a checkpoint with a target state"},
        {"study", "run an analysis study"},
    };
    for (const auto &[name, keys] : nqst::cli::command_keys()) {
        Subcommand &sub = subs[name];
        sub.app = app.add_subcommand(name, descriptions.at(name));
        if (name == "study") {
            sub.app->add_option("study", sub.values["study"], kHelp.at("study"));
        }
        for (const auto &key : keys) {
            if (name == "study" && key == "study") continue;
            sub.app->add_option("--" + key, sub.values[key], kHelp.count(key) ? kHelp.at(key) : key);
        }
        sub.app->add_option("--config", sub.config_file, "key=value configuration file");
        if (name == "train") {
            sub.app->add_option("--preset", sub.preset, "table1-pure or table1-mixed");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return nqst::cli::kExitUsage;
    }

    for (auto &[name, sub] : subs) {
        if (!sub.app->parsed()) continue;
        try {
            nqst::cli::RunConfig cfg;
            if (!sub.preset.empty()) {
                for (const auto &[k, v] : nqst::cli::preset(sub.preset)) cfg.set(k, v);
            }
            if (!sub.config_file.empty()) {
                cfg.merge_file(sub.config_file, nqst::cli::command_keys().at(name));
            }
            for (const auto &[key, value] : sub.values) {
                const std::string flag = key == "study" ? "study" : "--" + key;
                if (sub.app->count(flag) > 0) cfg.set(key, value);
            }
            nqst::cli::run(name, cfg);
        } catch (const nqst::cli::UsageError &e) {
            std::cerr << "nqst " << name << ": " << e.what() << "\n";
            return nqst::cli::kExitUsage;
        } catch (const std::exception &e) {
            std::cerr << "nqst " << name << ": " << e.what() << "\n";
            return nqst::cli::kExitFailure;
        }
    }
    return nqst::cli::kExitOk;
}
