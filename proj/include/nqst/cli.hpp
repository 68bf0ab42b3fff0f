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


#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nqst/evaluation.hpp"
#include "nqst/parallel.hpp"
#include "nqst/training.hpp"

#ifndef NQST_VERSION
#define NQST_VERSION "dev"
#endif

namespace nqst::cli {

namespace fs = std::filesystem;

/// Bad command line or configuration. The front end maps it to exit code 2.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// ---- configuration ----

/// Flat key=value settings for one subcommand.
class RunConfig {
   public:
    void set(const std::string &key, const std::string &value) { values_[key] = value; }
    bool has(const std::string &key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string> &values() const { return values_; }

    std::string str(const std::string &key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw UsageError("missing required key '" + key + "'");
        return it->second;
    }
    std::string str(const std::string &key, const std::string &fallback) const {
        return has(key) ? str(key) : fallback;
    }

    std::uint64_t u64(const std::string &key) const { return parse_unsigned(key, str(key)); }
    std::uint64_t u64(const std::string &key, std::uint64_t fallback) const {
        return has(key) ? u64(key) : fallback;
    }
    std::size_t size(const std::string &key, std::size_t fallback) const { return std::size_t(u64(key, fallback)); }

    double real(const std::string &key, double fallback) const {
        if (!has(key)) return fallback;
        const std::string v = str(key);
        try {
            std::size_t used = 0;
            const double out = std::stod(v, &used);
            if (used == v.size()) return out;
        } catch (const std::exception &) {
        }
        throw UsageError("key '" + key + "': expected a number, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string &key, const std::string &fallback) const {
        std::vector<std::string> out;
        std::stringstream ss(str(key, fallback));
        for (std::string item; std::getline(ss, item, ',');) {
            if (!item.empty()) out.push_back(item);
        }
        if (out.empty()) throw UsageError("key '" + key + "': empty list");
        return out;
    }
    std::vector<std::size_t> size_list(const std::string &key, const std::string &fallback) const {
        std::vector<std::size_t> out;
        for (const auto &item : list(key, fallback)) out.push_back(std::size_t(parse_unsigned(key, item)));
        return out;
    }

    /// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
    void merge_file(const std::string &path, const std::set<std::string> &allowed) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file '" + path + "'");
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            line_no++;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            const auto eq = line.find('=');
            const std::string where = path + ":" + std::to_string(line_no) + ": ";
            if (eq == std::string::npos) throw UsageError(where + "expected key=value");
            const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
            if (key.empty()) throw UsageError(where + "empty key");
            if (!allowed.count(key)) throw UsageError(where + "unknown key '" + key + "'");
            set(key, value);
        }
    }

    /// Sorted key=value lines that can be fed back through --config.
    std::string echo(const std::string &command) const {
        std::ostringstream out;
        out << "# nqst " << command << "\n";
        for (const auto &[k, v] : values_) out << k << "=" << v << "\n";
        return out.str();
    }

   private:
    static std::string trim(const std::string &s) {
        const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    static std::uint64_t parse_unsigned(const std::string &key, const std::string &v) {
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
        }
        try {
            return std::stoull(v);
        } catch (const std::out_of_range &) {
            throw UsageError("key '" + key + "': value out of range");
        }
    }

    std::map<std::string, std::string> values_;
};

/// Keys each subcommand understands.
inline const std::map<std::string, std::set<std::string>> &command_keys() {
    static const std::set<std::string> model = {"n-anc", "layers", "embed-dim", "heads", "ff-dim", "init-std"};
    static const std::map<std::string, std::set<std::string>> keys = [] {
        std::map<std::string, std::set<std::string>> k;
        k["generate"] = {"state", "ensemble", "n", "seed", "out"};
        k["train"] = {"dataset", "out", "seed", "trials", "loss", "sampler", "epochs", "lr", "minibatch", "mc",
                      "patience", "validation", "state"};
        k["train"].insert(model.begin(), model.end());
        k["evaluate"] = {"checkpoint", "state", "dataset", "out", "seed", "swap-pairs"};
        k["study"] = {"study", "out", "seed", "instances", "qubits", "shadows", "ensembles", "ensemble", "mc", "epochs",
                      "minibatch", "lr", "loss", "dataset", "state", "checkpoint", "strings", "letters"};
        k["study"].insert(model.begin(), model.end());
        return k;
    }();
    return keys;
}

/// The two experiment columns: a pure GHZ benchmark and a noisy-GHZ reconstruction with a
/// train/validation split.
inline std::map<std::string, std::string> preset(const std::string &name) {
    std::map<std::string, std::string> common = {
        {"layers", "2"}, {"embed-dim", "8"}, {"heads", "4"}, {"lr", "0.01"}, {"mc", "500"}, {"loss", "sce"},
        {"sampler", "ss"}};
    if (name == "table1-pure") {
        common.insert({{"n-anc", "0"}, {"epochs", "50"}, {"minibatch", "100"}, {"validation", "0"}});
    } else if (name == "table1-mixed") {
        common.insert({{"n-anc", "3"}, {"epochs", "100"}, {"minibatch", "20"}, {"validation", "1250"}, {"patience", "25"}});
    } else {
        throw UsageError("unknown preset '" + name + "' (expected table1-pure or table1-mixed)");
    }
    return common;
}

// ---- target states ----

struct StateSpec {
    enum class Kind { Ghz, RandomClifford, NoisyGhz } kind = Kind::Ghz;
    std::size_t n = 0;
    double p = 0;
    std::uint64_t seed = 0;  // random-clifford only
};

/// ghz:N, random-clifford:N[:SEED] or noisy-ghz:N:P. A random Clifford target without an explicit
/// seed is drawn from `run_seed`.
inline StateSpec parse_state(const std::string &text, std::uint64_t run_seed) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    auto bad = [&](const std::string &why) { return UsageError("state '" + text + "': " + why); };
    if (parts.size() < 2) throw bad("expected ghz:N, random-clifford:N[:SEED] or noisy-ghz:N:P");
    StateSpec spec;
    RunConfig tmp;
    tmp.set("n", parts[1]);
    try {
        spec.n = tmp.size("n", 0);
    } catch (const UsageError &) {
        throw bad("qubit count must be a positive integer");
    }
    if (spec.n < 1 || spec.n > kMaxQubits) throw bad("qubit count out of range");
    if (parts[0] == "ghz" && parts.size() == 2) {
        spec.kind = StateSpec::Kind::Ghz;
    } else if (parts[0] == "random-clifford" && parts.size() <= 3) {
        spec.kind = StateSpec::Kind::RandomClifford;
        spec.seed = derive_seed(run_seed, "target", 0);
        if (parts.size() == 3) {
            tmp.set("seed", parts[2]);
            spec.seed = tmp.u64("seed");
        }
    } else if (parts[0] == "noisy-ghz" && parts.size() == 3) {
        spec.kind = StateSpec::Kind::NoisyGhz;
        tmp.set("p", parts[2]);
        spec.p = tmp.real("p", 0);
        if (!(spec.p >= 0 && spec.p <= kMaxDepolarizing)) throw bad("noise strength must lie in [0, 15/16]");
    } else {
        throw bad("expected ghz:N, random-clifford:N[:SEED] or noisy-ghz:N:P");
    }
    return spec;
}

inline StabilizerState random_clifford_target(const StateSpec &spec) {
    Rng rng(spec.seed);
    return StabilizerState::from_circuit(random_clifford(spec.n, rng));
}

inline StatePreparation preparation(const StateSpec &spec) {
    switch (spec.kind) {
        case StateSpec::Kind::Ghz: {
            const StabilizerState s = StabilizerState::from_circuit(ghz_circuit(spec.n));
            return [s](Rng &) { return s; };
        }
        case StateSpec::Kind::RandomClifford: {
            const StabilizerState s = random_clifford_target(spec);
            return [s](Rng &) { return s; };
        }
        case StateSpec::Kind::NoisyGhz:
            return [n = spec.n, p = spec.p](Rng &rng) { return prepare_noisy_ghz(n, p, rng); };
    }
    throw std::logic_error("unreachable");
}

inline DenseOperator truth_operator(const StateSpec &spec) {
    if (spec.n > kMaxTruthQubits) throw UsageError("exact target limited to 10 qubits");
    switch (spec.kind) {
        case StateSpec::Kind::Ghz: return exact_noisy_ghz(spec.n, 0.0).rho;
        case StateSpec::Kind::RandomClifford:
            return DenseOperator::projector(spec.n, dense_state(CanonicalStabilizer(random_clifford_target(spec))));
        case StateSpec::Kind::NoisyGhz: return exact_noisy_ghz(spec.n, spec.p).rho;
    }
    throw std::logic_error("unreachable");
}

// ---- artifacts ----

inline std::string sha256_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 unavailable");
    }
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf, std::size_t(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; i++) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

inline constexpr const char *kManifestName = "manifest.json";

/// Output directory with a single writer. Files are written whole; the manifest lists every file in
/// the directory with its SHA-256.
class ArtifactDir {
   public:
    explicit ArtifactDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path &root() const { return root_; }

    void write(const std::string &name, const std::function<void(std::ostream &)> &body, bool binary = false) {
        const fs::path path = root_ / name;
        std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        body(out);
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + path.string());
    }

    void write_text(const std::string &name, const std::string &text) {
        write(name, [&](std::ostream &o) { o << text; });
    }

    void write_manifest(const std::string &command, const RunConfig &cfg, double wall_seconds) const {
        nlohmann::json m;
        m["tool"] = "nqst";
        m["version"] = NQST_VERSION;
        m["command"] = command;
        m["config"] = cfg.values();
        m["wall_seconds"] = wall_seconds;
        std::vector<fs::path> files;
        for (const auto &entry : fs::recursive_directory_iterator(root_)) {
            if (entry.is_regular_file() && entry.path().filename() != kManifestName) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        m["files"] = nlohmann::json::array();
        for (const auto &f : files) {
            m["files"].push_back({{"path", fs::relative(f, root_).generic_string()},
                                  {"bytes", fs::file_size(f)},
                                  {"sha256", sha256_file(f)}});
        }
        std::ofstream out(root_ / kManifestName, std::ios::trunc);
        out << m.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write manifest");
    }

   private:
    fs::path root_;
};

inline ShadowDataset load_dataset(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

inline std::pair<ModelConfig, std::vector<double>> load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

inline ModelConfig model_config(const RunConfig &cfg, std::size_t n_phys, std::uint64_t seed) {
    ModelConfig m;
    m.n_phys = n_phys;
    m.n_anc = cfg.size("n-anc", 0);
    m.layers = cfg.size("layers", m.layers);
    m.embed_dim = cfg.size("embed-dim", m.embed_dim);
    m.heads = cfg.size("heads", m.heads);
    m.ff_dim = cfg.size("ff-dim", 0);
    m.init_std = cfg.real("init-std", m.init_std);
    m.seed = seed;
    try {
        m.validate();
    } catch (const std::invalid_argument &e) {
        throw UsageError(std::string("model config: ") + e.what());
    }
    return m;
}

template <class F>
auto as_usage(const std::string &key, F &&f) {
    try {
        return f();
    } catch (const std::invalid_argument &e) {
        throw UsageError("key '" + key + "': " + e.what());
    }
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- subcommands ----

inline void cmd_generate(const RunConfig &cfg, ArtifactDir &out) {
    const std::uint64_t seed = cfg.u64("seed");
    const StateSpec spec = parse_state(cfg.str("state"), seed);
    const Ensemble ensemble = as_usage("ensemble", [&] { return parse_ensemble(cfg.str("ensemble")); });
    const std::size_t count = cfg.size("n", 0);
    if (count < 1) throw UsageError("key 'n': need at least one snapshot");
    Rng rng(derive_seed(seed, "generate", 0));
    const ShadowDataset data = acquire_shadows(preparation(spec), spec.n, ensemble, count, rng, seed);
    out.write("dataset.shadows", [&](std::ostream &o) { write_dataset(o, data); });
}

struct TrialResult {
    std::uint64_t seed = 0;
    ModelConfig model;
    TrainRun run;
    double final_infidelity = std::numeric_limits<double>::quiet_NaN();
};

inline TrainConfig train_config(const RunConfig &cfg) {
    TrainConfig t;
    t.epochs = cfg.size("epochs", t.epochs);
    t.initial_lr = cfg.real("lr", t.initial_lr);
    t.minibatch = cfg.size("minibatch", t.minibatch);
    t.mc_samples = cfg.size("mc", t.mc_samples);
    t.patience = cfg.size("patience", t.patience);
    t.validation = cfg.size("validation", t.validation);
    t.loss = as_usage("loss", [&] { return parse_loss(cfg.str("loss", loss_name(t.loss))); });
    t.sampler = as_usage("sampler", [&] { return parse_sampler(cfg.str("sampler", sampler_name(t.sampler))); });
    as_usage("train", [&] {
        t.validate();
        return 0;
    });
    return t;
}

inline void cmd_train(const RunConfig &cfg, ArtifactDir &out) {
    const std::uint64_t seed = cfg.u64("seed");
    const ShadowDataset data = load_dataset(cfg.str("dataset"));
    const std::size_t trials = cfg.size("trials", 1);
    if (trials < 1) throw UsageError("key 'trials': need at least one trial");
    const TrainConfig base = train_config(cfg);
    as_usage("loss", [&] {
        check_compatible(data.ensemble, base.loss);
        return 0;
    });
    if (base.validation >= data.size()) throw UsageError("key 'validation': split leaves no training data");
    std::optional<DenseOperator> truth;
    if (cfg.has("state")) {
        const StateSpec spec = parse_state(cfg.str("state"), seed);
        if (spec.n != data.n) throw UsageError("key 'state': qubit count differs from the dataset");
        truth = truth_operator(spec);
    }
    const ModelConfig shape = model_config(cfg, data.n, 0);

    std::vector<TrialResult> results(trials);
    parallel_for(trials, [&](std::size_t k) {
        TrialResult &r = results[k];
        r.seed = derive_seed(seed, "trial", k);
        r.model = shape;
        r.model.seed = derive_seed(seed, "model", k);
        TrainConfig tc = base;
        tc.seed = r.seed;
        r.run = train(data, r.model, tc, truth);
        if (truth) r.final_infidelity = model_infidelity(NqsModel(r.model), r.run.params, *truth);
    });

    // Trial whose returned parameters have the lowest final (validation, else training) loss.
    std::size_t best = 0;
    auto score = [&](const TrialResult &r) {
        if (r.run.epochs.empty()) return std::numeric_limits<double>::infinity();
        if (base.validation == 0) return r.run.epochs.back().loss;
        double s = std::numeric_limits<double>::infinity();
        for (const auto &e : r.run.epochs) s = std::min(s, e.validation_loss);
        return s;
    };
    for (std::size_t k = 1; k < trials; k++) {
        if (score(results[k]) < score(results[best])) best = k;
    }

    for (std::size_t k = 0; k < trials; k++) {
        const auto &r = results[k];
        out.write("trial-" + std::to_string(k) + ".csv", [&](std::ostream &o) { write_train_csv(o, r.run); });
        out.write("trial-" + std::to_string(k) + "-best.ckpt",
                  [&](std::ostream &o) { write_checkpoint(o, r.model, r.run.params); }, true);
        out.write("trial-" + std::to_string(k) + "-final.ckpt",
                  [&](std::ostream &o) { write_checkpoint(o, r.model, r.run.last_params); }, true);
    }
    out.write("best.ckpt", [&](std::ostream &o) { write_checkpoint(o, results[best].model, results[best].run.params); },
              true);
    out.write("mean.csv", [&](std::ostream &o) {
        o << "epoch,lr,loss,loss_std,infidelity,infidelity_std,trials\n";
        std::size_t longest = 0;
        for (const auto &r : results) longest = std::max(longest, r.run.epochs.size());
        for (std::size_t e = 0; e < longest; e++) {
            std::vector<double> loss, inf;
            double lr = 0;
            for (const auto &r : results) {
                if (e < r.run.epochs.size()) {
                    loss.push_back(r.run.epochs[e].loss);
                    inf.push_back(r.run.epochs[e].infidelity);
                    lr = r.run.epochs[e].lr;
                }
            }
            const StudyRow l = summarize_row("loss", double(e), loss), f = summarize_row("inf", double(e), inf);
            o << e << "," << fmt(lr) << "," << fmt(l.mean) << "," << fmt(l.std) << "," << fmt(f.mean) << ","
              << fmt(f.std) << "," << loss.size() << "\n";
        }
    });
    out.write("summary.csv", [&](std::ostream &o) {
        o << "trial,seed,epochs,stop_reason,final_loss,final_validation_loss,final_infidelity,clamped,best\n";
        for (std::size_t k = 0; k < trials; k++) {
            const auto &r = results[k];
            const double nan = std::numeric_limits<double>::quiet_NaN();
            const double loss = r.run.epochs.empty() ? nan : r.run.epochs.back().loss;
            const double vloss = r.run.epochs.empty() ? nan : r.run.epochs.back().validation_loss;
            o << k << "," << r.seed << "," << r.run.epochs.size() << "," << r.run.stop_reason << "," << fmt(loss) << ","
              << fmt(vloss) << "," << fmt(r.final_infidelity) << "," << r.run.clamped << "," << (k == best) << "\n";
        }
    });
}

inline void cmd_evaluate(const RunConfig &cfg, ArtifactDir &out) {
    const std::uint64_t seed = cfg.u64("seed");
    const auto [model_cfg, params] = load_checkpoint(cfg.str("checkpoint"));
    const NqsModel model(model_cfg);
    const std::string truth_text = cfg.str("state");
    DenseOperator truth;
    if (truth_text.rfind("checkpoint:", 0) == 0) {
        const auto [other_cfg, other_params] = load_checkpoint(truth_text.substr(11));
        truth = density_matrix(NqsModel(other_cfg), other_params);
    } else {
        truth = truth_operator(parse_state(truth_text, seed));
    }
    if (truth.n != model_cfg.n_phys) throw UsageError("key 'state': qubit count differs from the checkpoint");
    const DenseOperator rho = density_matrix(model, params);
    Rng rng(derive_seed(seed, "evaluate", 0));
    const MeanEstimate swap = purity_swap_mc(model, params, cfg.size("swap-pairs", 1000), rng);
    std::vector<std::pair<std::string, double>> rows = {
        {"infidelity", 1.0 - (truth.m * rho.m).trace().real()},
        {"trace_distance", trace_distance(rho, truth)},
        {"purity", purity(rho)},
        {"purity_swap_mc", swap.mean},
        {"purity_swap_mc_std_error", swap.std_error},
        {"truth_purity", purity(truth)},
    };
    if (cfg.has("dataset")) {
        const ShadowDataset data = load_dataset(cfg.str("dataset"));
        if (data.n != truth.n) throw UsageError("key 'dataset': qubit count differs from the checkpoint");
        const DenseOperator raw = shadow_state(data);
        rows.insert(rows.end(), {{"raw_trace_distance", trace_distance(raw, truth)},
                                 {"projected_trace_distance", trace_distance(simplex_project(raw), truth)},
                                 {"raw_purity", shadow_purity(data)},
                                 {"raw_plugin_purity", purity(raw)}});
    }
    out.write("metrics.csv", [&](std::ostream &o) {
        o << "metric,value\n";
        for (const auto &[k, v] : rows) o << k << "," << fmt(v) << "\n";
    });
    out.write("density.csv", [&](std::ostream &o) { write_density_csv(o, rho); });
}

inline void cmd_study(const RunConfig &cfg, ArtifactDir &out) {
    const std::uint64_t seed = cfg.u64("seed");
    const std::string id = cfg.str("study");
    StudyReport report;
    if (id == "kl") {
        KlStudyConfig k;
        k.seed = seed;
        k.instances = cfg.size("instances", k.instances);
        k.qubits = cfg.size_list("qubits", "2,3,4,5,6");
        k.shadow_counts = cfg.size_list("shadows", "250,1000,4000");
        k.ensembles.clear();
        for (const auto &e : cfg.list("ensembles", "pauli,clifford")) {
            k.ensembles.push_back(as_usage("ensembles", [&] { return parse_ensemble(e); }));
        }
        for (std::size_t n : k.qubits) {
            if (n < 1 || n > kDenseWeightQubits) throw UsageError("key 'qubits': KL study supports 1..8 qubits");
        }
        report = study_kl(k);
    } else if (id == "gradient-angle") {
        ShadowDataset data;
        if (cfg.has("dataset")) {
            data = load_dataset(cfg.str("dataset"));
        } else {
            const std::size_t n = cfg.size("qubits", 3);
            const Ensemble e = as_usage("ensemble", [&] { return parse_ensemble(cfg.str("ensemble", "clifford")); });
            const StateSpec spec = parse_state(cfg.str("state", "ghz:" + std::to_string(n)), seed);
            Rng rng(derive_seed(seed, "generate", 0));
            data = acquire_shadows(preparation(spec), spec.n, e, cfg.size("shadows", 1000), rng, seed);
        }
        if (data.n > kMaxAngleQubits) throw UsageError("gradient-angle study supports at most 4 qubits");
        AngleStudyConfig a;
        a.seed = derive_seed(seed, "angle", 0);
        a.epochs = cfg.size("epochs", a.epochs);
        a.minibatch = cfg.size("minibatch", a.minibatch);
        a.mc_samples = cfg.size("mc", a.mc_samples);
        a.initial_lr = cfg.real("lr", a.initial_lr);
        a.loss = as_usage("loss", [&] { return parse_loss(cfg.str("loss", loss_name(a.loss))); });
        as_usage("loss", [&] {
            check_compatible(data.ensemble, a.loss);
            return 0;
        });
        if (a.epochs < 1 || a.minibatch < 1 || a.mc_samples < 1) throw UsageError("epochs, minibatch and mc must be positive");
        ModelConfig m = model_config(cfg, data.n, derive_seed(seed, "model", 0));
        if (m.n_anc != 0) throw UsageError("key 'n-anc': gradient-angle study uses a pure-state model");
        report = study_gradient_angle(data, m, a);
    } else if (id == "pauli-prediction") {
        const StateSpec spec = parse_state(cfg.str("state"), seed);
        const ShadowDataset data = load_dataset(cfg.str("dataset"));
        const auto [model_cfg, params] = load_checkpoint(cfg.str("checkpoint"));
        if (data.n != spec.n || model_cfg.n_phys != spec.n) throw UsageError("state, dataset and checkpoint sizes differ");
        NoisyGhzTruth truth{spec.n, spec.p, truth_operator(spec)};
        PauliStudyConfig p;
        p.seed = derive_seed(seed, "strings", 0);
        p.strings = cfg.size("strings", p.strings);
        const std::string letters = cfg.str("letters", "IXYZ");
        if (letters != "IXYZ" && letters != "XYZ") throw UsageError("key 'letters': expected IXYZ or XYZ");
        p.include_identity = letters == "IXYZ";
        report = study_pauli_prediction(truth, data, NqsModel(model_cfg), params, p);
    } else {
        throw UsageError("unknown study '" + id + "' (expected kl, gradient-angle or pauli-prediction)");
    }
    out.write("report.csv", [&](std::ostream &o) { write_report_csv(o, report); });
}

/// Runs one subcommand into cfg["out"] and writes the config echo and manifest.
inline void run(const std::string &command, const RunConfig &cfg) {
    const auto start = std::chrono::steady_clock::now();
    const auto &known = command_keys();
    if (!known.count(command)) throw UsageError("unknown command '" + command + "'");
    for (const auto &[k, v] : cfg.values()) {
        if (!known.at(command).count(k)) throw UsageError("unknown key '" + k + "' for " + command);
    }
    cfg.u64("seed");
    ArtifactDir out(cfg.str("out"));
    if (command == "generate") {
        cmd_generate(cfg, out);
    } else if (command == "train") {
        cmd_train(cfg, out);
    } else if (command == "evaluate") {
        cmd_evaluate(cfg, out);
    } else {
        cmd_study(cfg, out);
    }
    out.write_text("config.txt", cfg.echo(command));
    out.write_manifest(command, cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

}  // namespace nqst::cli
