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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nqst/dense.hpp"
#include "nqst/nqs_model.hpp"
#include "nqst/parallel.hpp"
#include "nqst/random_clifford.hpp"
#include "nqst/shadow.hpp"
#include "nqst/training.hpp"

namespace nqst {

// ---- dense oracles ----

struct NoisyGhzTruth {
    std::size_t n = 0;
    double p = 0;
    DenseOperator rho;
};

inline constexpr std::size_t kMaxTruthQubits = 10;

namespace detail {

/// rho <- U rho U^dag for the CNOT permutation on dense indices.
inline void conjugate_cnot(Matrix &rho, std::size_t n, std::size_t control, std::size_t target) {
    const std::size_t cbit = std::size_t{1} << (n - 1 - control), tbit = std::size_t{1} << (n - 1 - target);
    const std::size_t dim = std::size_t{1} << n;
    std::vector<Eigen::Index> perm(dim);
    for (std::size_t i = 0; i < dim; i++) perm[i] = Eigen::Index((i & cbit) ? i ^ tbit : i);
    Matrix out(rho.rows(), rho.cols());
    for (std::size_t r = 0; r < dim; r++) {
        for (std::size_t c = 0; c < dim; c++) out(perm[r], perm[c]) = rho(Eigen::Index(r), Eigen::Index(c));
    }
    rho.swap(out);
}

/// Replaces the state of qubits (a, b) by I/4 with probability lambda:
/// rho <- (1 - lambda) rho + lambda Tr_ab(rho) (x) I/4.
inline void depolarize_pair(Matrix &rho, std::size_t n, std::size_t a, std::size_t b, double lambda) {
    const std::size_t abit = std::size_t{1} << (n - 1 - a), bbit = std::size_t{1} << (n - 1 - b);
    const std::size_t mask = abit | bbit;
    const std::size_t dim = std::size_t{1} << n;
    const std::size_t local[4] = {0, bbit, abit, abit | bbit};
    Matrix out = (1.0 - lambda) * rho;
    for (std::size_t r = 0; r < dim; r++) {
        if (r & mask) continue;
        for (std::size_t c = 0; c < dim; c++) {
            if (c & mask) continue;
            Complex reduced = 0;
            for (std::size_t k : local) reduced += rho(Eigen::Index(r | k), Eigen::Index(c | k));
            for (std::size_t k : local) out(Eigen::Index(r | k), Eigen::Index(c | k)) += 0.25 * lambda * reduced;
        }
    }
    rho.swap(out);
}

}  // namespace detail

/// Exact output of the GHZ chain with the two-qubit depolarizing channel
/// rho -> (1 - 16p/15) rho + (16p/15) Tr_pair(rho) (x) I/4 after every CNOT.
inline NoisyGhzTruth exact_noisy_ghz(std::size_t n, double p) {
    if (n < 1 || n > kMaxTruthQubits) throw std::length_error("exact noisy GHZ limited to 1..10 qubits");
    if (!(p >= 0.0 && p <= kMaxDepolarizing)) throw std::invalid_argument("depolarizing strength must lie in [0, 15/16]");
    const std::size_t dim = std::size_t{1} << n;
    // H on qubit 0 of |0...0>: amplitude 1/sqrt2 on indices 0 and 2^(n-1).
    Vector plus = Vector::Zero(Eigen::Index(dim));
    plus(0) = plus(Eigen::Index(dim >> 1)) = 1.0 / std::sqrt(2.0);
    Matrix rho = plus * plus.adjoint();
    const double lambda = 16.0 * p / 15.0;
    for (std::size_t q = 0; q + 1 < n; q++) {
        detail::conjugate_cnot(rho, n, q, q + 1);
        if (lambda > 0) detail::depolarize_pair(rho, n, q, q + 1, lambda);
    }
    return {n, p, DenseOperator(n, std::move(rho))};
}

/// <psi|rho|psi>. Values outside [0, 1] by at most 1e-9 are clamped; larger excursions mean rho is
/// not a state.
inline double fidelity_pure(const Vector &psi, const DenseOperator &rho) {
    if (psi.size() != Eigen::Index(rho.dim())) throw std::invalid_argument("state and operator dimensions differ");
    const double f = psi.dot(rho.m * psi).real();
    constexpr double tol = 1e-9;
    if (f < -tol || f > 1 + tol) throw std::domain_error("fidelity outside [0, 1]; operator is not physical");
    return std::clamp(f, 0.0, 1.0);
}

/// Half the trace norm of a - b.
inline double trace_distance(const DenseOperator &a, const DenseOperator &b) {
    if (a.n != b.n) throw std::invalid_argument("operators act on different qubit counts");
    if (!a.is_hermitian(1e-9) || !b.is_hermitian(1e-9)) throw std::invalid_argument("trace distance needs Hermitian operators");
    const DenseOperator diff(a.n, a.m - b.m);
    return 0.5 * diff.eigenvalues().cwiseAbs().sum();
}

/// Tr(rho^2), unclamped.
inline double purity(const DenseOperator &rho) {
    if (!rho.is_hermitian(1e-9)) throw std::invalid_argument("purity needs a Hermitian operator");
    return rho.m.cwiseAbs2().sum();
}

/// Unbiased purity estimate from the snapshots: the mean of Tr(rho_i rho_j) over pairs i != j of
/// inverse-mapped snapshots. Unlike Tr(rho_hat^2) it can be negative for small, noisy datasets.
inline double shadow_purity(const ShadowDataset &data) {
    const std::size_t count = data.size();
    if (count < 2) throw std::invalid_argument("shadow purity needs at least two snapshots");
    const double big_n = double(count);
    const double all_pairs = big_n * big_n * shadow_state(data).m.cwiseAbs2().sum();
    // Tr(rho_i^2) is the same for every snapshot: 5^n for Pauli, D^2 + D - 1 for Clifford.
    const double dim = std::ldexp(1.0, int(data.n));
    const double self = data.ensemble == Ensemble::Pauli ? std::pow(5.0, double(data.n)) : dim * dim + dim - 1.0;
    return (all_pairs - big_n * self) / (big_n * (big_n - 1.0));
}

/// Monte Carlo estimate of Tr(rho^2) for a purified model from the swap ratio
/// psi(s, a') psi(s', a) / (psi(s, a) psi(s', a')) over independent samples (s, a), (s', a').
/// Returns the mean and its standard error; a model without ancillas is pure and returns exactly 1.
inline MeanEstimate purity_swap_mc(const NqsModel &model, std::span<const double> params, std::size_t n_pairs, Rng &rng) {
    const auto &cfg = model.config();
    if (cfg.n_anc == 0) return {1.0, 0.0};
    if (n_pairs < 1) throw std::invalid_argument("need at least one sample pair");
    std::vector<PackedBits> draws;
    draws.reserve(2 * n_pairs);
    for (const auto &[seq, count] : sample_counts(model, params, 2 * n_pairs, rng)) draws.insert(draws.end(), count, seq);
    std::shuffle(draws.begin(), draws.end(), rng);
    const PackedBits phys = low_mask(cfg.n_phys);
    std::vector<PackedBits> needed;
    needed.reserve(4 * n_pairs);
    for (std::size_t i = 0; i < n_pairs; i++) {
        const PackedBits x = draws[2 * i], y = draws[2 * i + 1];
        needed.insert(needed.end(), {x, y, (x & phys) | (y & ~phys), (y & phys) | (x & ~phys)});
    }
    const auto amps = evaluate(model, params, needed);
    std::vector<double> ratios(n_pairs);
    for (std::size_t i = 0; i < n_pairs; i++) {
        const AmplitudeValue &a = amps[4 * i], &b = amps[4 * i + 1], &c = amps[4 * i + 2], &d = amps[4 * i + 3];
        const double logm = c.log_magnitude + d.log_magnitude - a.log_magnitude - b.log_magnitude;
        ratios[i] = std::exp(logm) * std::cos(c.phase + d.phase - a.phase - b.phase);
    }
    return summarize(ratios);
}

inline constexpr double kMinKlWeight = 1e-12;

/// sum_i p_i ln(p_i / q_i) with states matched by canonical form. q is clamped at 1e-12 on the
/// support of p, so states absent from q contribute a large but finite term.
inline double kl_divergence(const WeightedStabilizerSet &p, const WeightedStabilizerSet &q) {
    if (p.n != q.n) throw std::invalid_argument("distributions over different qubit counts");
    const auto q_index = q.index();
    double kl = 0;
    bool matched = false;
    for (std::size_t i = 0; i < p.size(); i++) {
        const double pi = p.weights[i];
        if (pi <= 0) continue;
        auto it = q_index.find(p.states[i].key());
        double qi = kMinKlWeight;
        if (it != q_index.end()) {
            matched = true;
            qi = std::max(q.weights[it->second], kMinKlWeight);
        }
        kl += pi * std::log(pi / qi);
    }
    if (!matched) throw std::invalid_argument("distributions share no states");
    return std::max(kl, 0.0);
}

// ---- reports ----

struct StudyRow {
    std::string series;
    double x = 0;
    double mean = 0;
    double std = 0;
    std::size_t count = 0;
};

struct StudyReport {
    std::string study;
    std::string x_label = "x";
    std::string y_label = "value";
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<StudyRow> rows;

    void note(const std::string &key, const std::string &value) { metadata.emplace_back(key, value); }

    const StudyRow &row(const std::string &series, double x) const {
        for (const auto &r : rows) {
            if (r.series == series && r.x == x) return r;
        }
        throw std::out_of_range("no row " + series + " at x=" + std::to_string(x));
    }
    std::vector<StudyRow> series(const std::string &name) const {
        std::vector<StudyRow> out;
        for (const auto &r : rows) {
            if (r.series == name) out.push_back(r);
        }
        return out;
    }
};

/// Mean and sample standard deviation of the finite entries.
inline StudyRow summarize_row(std::string series, double x, const std::vector<double> &values) {
    StudyRow row{std::move(series), x, std::numeric_limits<double>::quiet_NaN(), 0.0, 0};
    double sum = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            row.count++;
        }
    }
    if (row.count == 0) return row;
    row.mean = sum / double(row.count);
    if (row.count > 1) {
        double ss = 0;
        for (double v : values) {
            if (std::isfinite(v)) ss += (v - row.mean) * (v - row.mean);
        }
        row.std = std::sqrt(ss / double(row.count - 1));
    }
    return row;
}

inline void write_report_csv(std::ostream &out, const StudyReport &report) {
    out << "# study=" << report.study << "\n";
    out << "# x=" << report.x_label << "\n# y=" << report.y_label << "\n";
    for (const auto &[k, v] : report.metadata) out << "# " << k << "=" << v << "\n";
    out << "series,x,mean,std,count\n";
    char buf[160];
    for (const auto &r : report.rows) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%zu\n", r.x, r.mean, r.std, r.count);
        out << r.series << buf;
    }
}

/// One line per matrix entry: row,col,re,im.
inline void write_density_csv(std::ostream &out, const DenseOperator &rho) {
    out << "row,col,re,im\n";
    char buf[128];
    for (Eigen::Index r = 0; r < rho.m.rows(); r++) {
        for (Eigen::Index c = 0; c < rho.m.cols(); c++) {
            std::snprintf(buf, sizeof buf, "%td,%td,%.17g,%.17g\n", r, c, rho.m(r, c).real(), rho.m(r, c).imag());
            out << buf;
        }
    }
}

// ---- informational content of the shadow weights ----

struct KlStudyConfig {
    std::vector<std::size_t> qubits{2, 3, 4, 5, 6};
    std::vector<std::size_t> shadow_counts{250, 1000, 4000};
    std::vector<Ensemble> ensembles{Ensemble::Pauli, Ensemble::Clifford};
    std::size_t instances = 32;
    std::uint64_t seed = 0;
};

/// The data distribution restricted to the observed snapshots: weight proportional to
/// <phi|target|phi> for each distinct phi in the dataset.
inline WeightedStabilizerSet restricted_data_distribution(const ShadowDataset &data, const CanonicalStabilizer &target) {
    WeightedStabilizerSet out = empirical_distribution(data);
    double sum = 0;
    for (std::size_t i = 0; i < out.size(); i++) {
        out.weights[i] = overlap_squared(out.states[i], target);
        sum += out.weights[i];
    }
    if (!(sum > 0)) throw std::runtime_error("target has no weight on the observed snapshots");
    for (auto &w : out.weights) w /= sum;
    return out;
}

/// For every (ensemble, n, N): KL from the restricted data distribution to the empirical
/// frequencies ("<ens>-emp") and to the normalized shadow weights ("<ens>-sh"), averaged over
/// random Clifford targets. Series names carry the qubit count: "pauli-sh-n3".
inline StudyReport study_kl(const KlStudyConfig &cfg) {
    for (std::size_t n : cfg.qubits) {
        if (n < 1 || n > kDenseWeightQubits) throw std::length_error("KL study limited to 1..8 qubits");
    }
    if (cfg.instances < 1) throw std::invalid_argument("need at least one instance");
    StudyReport report;
    report.study = "kl";
    report.x_label = "shadows";
    report.y_label = "kl";
    report.note("instances", std::to_string(cfg.instances));
    report.note("seed", std::to_string(cfg.seed));
    for (Ensemble e : cfg.ensembles) {
        for (std::size_t n : cfg.qubits) {
            for (std::size_t count : cfg.shadow_counts) {
                std::vector<double> kl_emp(cfg.instances), kl_sh(cfg.instances);
                const std::string tag = ensemble_name(e) + "-n" + std::to_string(n) + "-N" + std::to_string(count);
                parallel_for(cfg.instances, [&](std::size_t i) {
                    Rng rng(derive_seed(cfg.seed, tag, i));
                    const StabilizerState target = StabilizerState::from_circuit(random_clifford(n, rng));
                    const ShadowDataset data =
                        acquire_shadows([&](Rng &) { return target; }, n, e, count, rng);
                    const auto p_data = restricted_data_distribution(data, CanonicalStabilizer(target));
                    kl_emp[i] = kl_divergence(p_data, empirical_distribution(data));
                    kl_sh[i] = kl_divergence(p_data, normalized_shadow_weights(data));
                });
                const std::string suffix = "-n" + std::to_string(n);
                report.rows.push_back(summarize_row(ensemble_name(e) + "-emp" + suffix, double(count), kl_emp));
                report.rows.push_back(summarize_row(ensemble_name(e) + "-sh" + suffix, double(count), kl_sh));
            }
        }
    }
    return report;
}

// ---- gradient discrepancy during training ----

struct AngleStudyConfig {
    std::size_t epochs = 50;
    std::size_t minibatch = 100;
    std::size_t mc_samples = 500;
    double initial_lr = 0.01;
    LossKind loss = LossKind::ShadowCE;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxAngleQubits = 4;

/// Angle in radians between two gradients; NaN when either has zero norm.
inline double gradient_angle(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("gradients of different length");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); i++) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
}

/// Trains on the exact gradient and, every epoch, measures how far the NS and SS estimates point
/// from it. Series: "<sampler>-minibatch" (mean and std over the epoch's minibatches) and
/// "<sampler>-full" (one full-batch angle), for sampler in {exact, ns, ss}; x is the epoch.
inline StudyReport study_gradient_angle(const ShadowDataset &data, const ModelConfig &model_config,
                                        const AngleStudyConfig &cfg) {
    if (data.n > kMaxAngleQubits) throw std::length_error("gradient-angle study needs exact gradients (n <= 4)");
    if (model_config.n_anc != 0) throw std::invalid_argument("gradient-angle study uses a pure-state model");
    if (data.n != model_config.n_phys) throw std::invalid_argument("dataset qubit count does not match the model");
    if (cfg.minibatch < 1 || cfg.mc_samples < 1) throw std::invalid_argument("minibatch and mc_samples must be positive");
    const NqsModel model(model_config);
    const TrainingSet set = prepare_training_set(data, cfg.loss);
    Rng rng(cfg.seed);
    std::vector<double> params = model.init();
    AdamState adam;
    const std::size_t steps = (data.size() + cfg.minibatch - 1) / cfg.minibatch;
    std::discrete_distribution<std::size_t> draw(set.weights.begin(), set.weights.end());
    std::vector<std::size_t> order(set.size());
    constexpr SamplerKind kEstimators[3] = {SamplerKind::Exact, SamplerKind::NeuralState, SamplerKind::Stabilizer};

    StudyReport report;
    report.study = "gradient-angle";
    report.x_label = "epoch";
    report.y_label = "angle_rad";
    report.note("qubits", std::to_string(data.n));
    report.note("shadows", std::to_string(data.size()));
    report.note("ensemble", ensemble_name(data.ensemble));
    report.note("loss", loss_name(cfg.loss));
    report.note("mc_samples", std::to_string(cfg.mc_samples));
    report.note("epochs", std::to_string(cfg.epochs));
    report.note("minibatch", std::to_string(cfg.minibatch));
    report.note("seed", std::to_string(cfg.seed));

    for (std::size_t epoch = 0; epoch < cfg.epochs; epoch++) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.initial_lr);
        std::vector<double> mini[3];
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> batch;
        for (std::size_t step = 0; step < steps; step++) {
            batch.clear();
            if (cfg.loss == LossKind::ShadowCE) {
                for (std::size_t j = 0; j < cfg.minibatch; j++) batch.push_back(draw(rng));
            } else {
                const std::size_t end = std::min(order.size(), (step + 1) * cfg.minibatch);
                batch.assign(order.begin() + std::ptrdiff_t(step * cfg.minibatch), order.begin() + std::ptrdiff_t(end));
            }
            const LossGrad exact = loss_and_grad(model, params, set, batch, SamplerKind::Exact, cfg.mc_samples, rng);
            for (int k = 0; k < 3; k++) {
                const LossGrad est = loss_and_grad(model, params, set, batch, kEstimators[k], cfg.mc_samples, rng);
                mini[k].push_back(gradient_angle(est.grad, exact.grad));
            }
            adam_step(adam, params, exact.grad, lr);
        }
        const LossGrad full_exact = full_batch_loss(model, params, set, SamplerKind::Exact, cfg.mc_samples, rng);
        for (int k = 0; k < 3; k++) {
            const std::string name = sampler_name(kEstimators[k]);
            report.rows.push_back(summarize_row(name + "-minibatch", double(epoch), mini[k]));
            const LossGrad full = full_batch_loss(model, params, set, kEstimators[k], cfg.mc_samples, rng);
            report.rows.push_back(summarize_row(name + "-full", double(epoch), {gradient_angle(full.grad, full_exact.grad)}));
        }
    }
    return report;
}

// ---- observable prediction ----

struct PauliStudyConfig {
    std::size_t strings = 5000;
    bool include_identity = true;  // per-qubit letters from {I,X,Y,Z}; otherwise {X,Y,Z}
    std::uint64_t seed = 0;
};

/// Random Pauli strings with letters drawn independently and uniformly per qubit.
inline std::vector<PauliOperator> random_pauli_strings(std::size_t n, std::size_t count, bool include_identity, Rng &rng) {
    static constexpr char kAll[4] = {'I', 'X', 'Y', 'Z'};
    std::uniform_int_distribution<int> letter(include_identity ? 0 : 1, 3);
    std::vector<PauliOperator> out;
    out.reserve(count);
    std::string s(n, 'I');
    for (std::size_t i = 0; i < count; i++) {
        for (auto &c : s) c = kAll[letter(rng)];
        out.push_back(PauliOperator::from_string(s));
    }
    return out;
}

/// Absolute error of Pauli expectation values against the truth, grouped by Pauli weight (x).
/// Estimators: the raw shadow mean ("raw"), the simplex-projected shadow ("projected") and the
/// model density matrix ("nqs"). Series "<estimator>-ratio" hold the error divided by the
/// standard error of the raw shadow estimate, for strings where that is nonzero.
inline StudyReport study_pauli_prediction(const NoisyGhzTruth &truth, const ShadowDataset &data, const NqsModel &model,
                                          std::span<const double> params, const PauliStudyConfig &cfg) {
    if (data.n != truth.n || model.config().n_phys != truth.n) throw std::invalid_argument("qubit counts differ");
    Rng rng(cfg.seed);
    const auto strings = random_pauli_strings(truth.n, cfg.strings, cfg.include_identity, rng);
    const DenseOperator projected = simplex_project(shadow_state(data));
    const DenseOperator nqs = density_matrix(model, params);
    const char *names[3] = {"raw", "projected", "nqs"};
    std::map<std::size_t, std::vector<double>> err[3], ratio[3];
    std::vector<std::array<double, 4>> values(strings.size());  // truth, raw, projected, nqs
    std::vector<double> sigma(strings.size());
    parallel_for(strings.size(), [&](std::size_t i) {
        const MeanEstimate raw = summarize(pauli_estimates(data, strings[i]));
        values[i] = {pauli_trace(truth.rho, strings[i]).real(), raw.mean, pauli_trace(projected, strings[i]).real(),
                     pauli_trace(nqs, strings[i]).real()};
        sigma[i] = raw.std_error;
    });
    for (std::size_t i = 0; i < strings.size(); i++) {
        const std::size_t w = strings[i].weight();
        for (int k = 0; k < 3; k++) {
            const double e = std::abs(values[i][std::size_t(k) + 1] - values[i][0]);
            err[k][w].push_back(e);
            if (sigma[i] > 0) ratio[k][w].push_back(e / sigma[i]);
        }
    }
    StudyReport report;
    report.study = "pauli-prediction";
    report.x_label = "weight";
    report.y_label = "abs_error";
    report.note("qubits", std::to_string(truth.n));
    report.note("noise", std::to_string(truth.p));
    report.note("shadows", std::to_string(data.size()));
    report.note("ensemble", ensemble_name(data.ensemble));
    report.note("strings", std::to_string(cfg.strings));
    report.note("letters", cfg.include_identity ? "IXYZ" : "XYZ");
    report.note("seed", std::to_string(cfg.seed));
    for (int k = 0; k < 3; k++) {
        for (const auto &[w, v] : err[k]) report.rows.push_back(summarize_row(names[k], double(w), v));
    }
    for (int k = 0; k < 3; k++) {
        for (const auto &[w, v] : ratio[k]) {
            report.rows.push_back(summarize_row(std::string(names[k]) + "-ratio", double(w), v));
        }
    }
    return report;
}

}  // namespace nqst
