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
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nqst/nqs_model.hpp"
#include "nqst/shadow.hpp"

namespace nqst {

enum class LossKind { InfClifford, InfPauli, EmpiricalCE, ShadowCE };
enum class SamplerKind { NeuralState, Stabilizer, Exact };

inline std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::InfClifford: return "inf-clifford";
        case LossKind::InfPauli: return "inf-pauli";
        case LossKind::EmpiricalCE: return "ece";
        case LossKind::ShadowCE: return "sce";
    }
    return "?";
}

inline LossKind parse_loss(const std::string &s) {
    for (auto k : {LossKind::InfClifford, LossKind::InfPauli, LossKind::EmpiricalCE, LossKind::ShadowCE}) {
        if (s == loss_name(k)) return k;
    }
    throw std::invalid_argument("unknown loss '" + s + "' (expected inf-clifford, inf-pauli, ece or sce)");
}

inline std::string sampler_name(SamplerKind k) {
    switch (k) {
        case SamplerKind::NeuralState: return "ns";
        case SamplerKind::Stabilizer: return "ss";
        case SamplerKind::Exact: return "exact";
    }
    return "?";
}

inline SamplerKind parse_sampler(const std::string &s) {
    for (auto k : {SamplerKind::NeuralState, SamplerKind::Stabilizer, SamplerKind::Exact}) {
        if (s == sampler_name(k)) return k;
    }
    throw std::invalid_argument("unknown sampler '" + s + "' (expected ns, ss or exact)");
}

inline constexpr std::size_t kMaxExactQubits = 10;
inline constexpr double kMinProbability = 1e-12;

/// Monte Carlo or exact overlaps between a model and a batch of stabilizer states, sharing one
/// forward pass and one reverse pass.
///
/// A state over all n_phys + n_anc bits gives the pure overlap <psi|phi>. A state over the physical
/// bits of a purified model gives <phi|rho|phi> = sum_sbar |<psi|phi, sbar>|^2. Every estimate is a
/// sum of terms v = c * psi^*(s) (exact, SS) or v = c / psi(s) (NS); in both cases the gradient
/// estimate of v is v * (grad log|psi| - i grad phase), which for NS folds the score term of the
/// sampling distribution into the direct derivative.
class OverlapBatch {
   public:
    OverlapBatch(const NqsModel &model, std::span<const double> params, SamplerKind sampler, std::size_t mc_samples)
        : model_(&model), params_(params), sampler_(sampler), mc_(mc_samples) {
        const auto &cfg = model.config();
        if (sampler != SamplerKind::Exact && mc_samples < 1) {
            throw std::invalid_argument("mc_samples must be at least 1");
        }
        if (sampler == SamplerKind::Exact && (cfg.n_phys > kMaxExactQubits || cfg.n_anc > kMaxExactQubits)) {
            throw std::length_error("exact overlaps limited to 10 physical and 10 ancilla bits");
        }
        if (cfg.total() <= 20) dense_ids_.assign(std::size_t{1} << cfg.total(), kUnset);
    }

    /// Queues a state and returns its request id.
    std::size_t add(const CanonicalStabilizer &phi, Rng &rng) {
        const auto &cfg = model_->config();
        const std::size_t n = phi.num_qubits();
        const bool pure = n == cfg.total();
        if (!pure && n != cfg.n_phys) {
            throw std::invalid_argument("stabilizer size matches neither the physical nor the total bit count");
        }
        Request req{groups_.size(), 0, pure};
        if (pure) {
            add_group(phi, 0, true, rng);
        } else {
            if (sampler_ == SamplerKind::NeuralState) {
                throw std::invalid_argument("NS sampling is not available for purified mixed-state overlaps");
            }
            for (PackedBits a = 0; a < (PackedBits{1} << cfg.n_anc); a++) {
                add_group(phi, a << cfg.n_phys, sampler_ == SamplerKind::Exact, rng);
            }
        }
        req.group_end = groups_.size();
        requests_.push_back(req);
        return requests_.size() - 1;
    }

    std::size_t size() const { return requests_.size(); }
    std::size_t num_sequences() const { return seqs_.size(); }

    void evaluate(bool record) {
        PrefixTrie trie(model_->config().total());
        for (PackedBits s : seqs_) trie.add_sequence(s);
        eval_ = std::make_unique<ModelEvaluation>(*model_, params_, std::move(trie), record);
        const auto &amps = eval_->amplitudes();
        std::vector<Complex> base(amps.size());
        for (std::size_t u = 0; u < amps.size(); u++) {
            const double l = sampler_ == SamplerKind::NeuralState ? -amps[u].log_magnitude : amps[u].log_magnitude;
            base[u] = std::exp(Complex(l, -amps[u].phase));
        }
        values_.resize(terms_.size());
        for (std::size_t t = 0; t < terms_.size(); t++) values_[t] = terms_[t].coeff * base[terms_[t].seq];
        sums_.assign(halves_.size(), Complex(0, 0));
        for (std::size_t h = 0; h < halves_.size(); h++) {
            for (std::size_t t = halves_[h].begin; t < halves_[h].end; t++) sums_[h] += values_[t];
        }
    }

    /// Estimate of <psi|phi> for a request over all bits.
    Complex overlap(std::size_t id) const {
        const Request &r = requests_.at(id);
        if (!r.pure) throw std::logic_error("overlap() needs a state over every model bit");
        return sums_.at(groups_[r.group_begin].a);
    }

    /// Estimate of p(phi): |<psi|phi>|^2 or <phi|rho|phi>. MC estimates of the mixed form use
    /// independent halves per ancilla string and can be slightly negative.
    double probability(std::size_t id) const {
        const Request &r = requests_.at(id);
        double p = 0;
        for (std::size_t g = r.group_begin; g < r.group_end; g++) {
            p += (sums_[groups_[g].a] * std::conj(sums_[groups_[g].b])).real();
        }
        return p;
    }

    /// Gradient of sum_i dprob[i] * probability(i) + Re(conj(doverlap[i]) * overlap(i)). Pass an empty
    /// span to skip either part. Consumes the recorded tape.
    std::vector<double> gradient(std::span<const double> dprob, std::span<const Complex> doverlap = {}) {
        if (!eval_) throw std::logic_error("evaluate() has not been called");
        std::vector<double> dlog(seqs_.size(), 0.0), dphase(seqs_.size(), 0.0);
        auto push = [&](std::size_t h, Complex w) {
            if (w == Complex(0, 0)) return;
            for (std::size_t t = halves_[h].begin; t < halves_[h].end; t++) {
                const Complex z = w * values_[t];
                dlog[terms_[t].seq] += z.real();
                dphase[terms_[t].seq] += z.imag();
            }
        };
        for (std::size_t i = 0; i < requests_.size(); i++) {
            const Request &r = requests_[i];
            for (std::size_t g = r.group_begin; g < r.group_end; g++) {
                if (!dprob.empty() && dprob[i] != 0.0) {
                    push(groups_[g].a, dprob[i] * std::conj(sums_[groups_[g].b]));
                    push(groups_[g].b, dprob[i] * std::conj(sums_[groups_[g].a]));
                }
                if (!doverlap.empty()) push(groups_[g].a, std::conj(doverlap[i]));
            }
        }
        return eval_->gradient(dlog, dphase);
    }

   private:
    static constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();

    struct Term {
        std::size_t seq;
        Complex coeff;
    };
    struct Half {
        std::size_t begin, end;
    };
    struct Group {
        std::size_t a, b;
    };
    struct Request {
        std::size_t group_begin, group_end;
        bool pure;
    };

    std::size_t seq_id(PackedBits s) {
        if (!dense_ids_.empty()) {
            auto &slot = dense_ids_[s];
            if (slot == kUnset) {
                slot = seqs_.size();
                seqs_.push_back(s);
            }
            return slot;
        }
        auto [it, fresh] = sparse_ids_.emplace(s, seqs_.size());
        if (fresh) seqs_.push_back(s);
        return it->second;
    }

    /// Stabilizer-sampled half: `count` draws s ~ |phi(s)|^2 merged by multiplicity.
    std::size_t add_ss_half(const CanonicalStabilizer &phi, PackedBits shift, std::size_t count, Rng &rng) {
        std::vector<PackedBits> draws(count);
        for (auto &d : draws) d = phi.sample(rng);
        std::sort(draws.begin(), draws.end());
        const std::size_t begin = terms_.size();
        for (std::size_t i = 0; i < draws.size();) {
            std::size_t j = i;
            while (j < draws.size() && draws[j] == draws[i]) j++;
            const Complex amp = phi.amplitude(draws[i]);
            terms_.push_back({seq_id(draws[i] | shift), double(j - i) / (double(count) * std::conj(amp))});
            i = j;
        }
        halves_.push_back({begin, terms_.size()});
        return halves_.size() - 1;
    }

    void add_group(const CanonicalStabilizer &phi, PackedBits shift, bool shared, Rng &rng) {
        if (sampler_ == SamplerKind::Exact) {
            const std::size_t begin = terms_.size();
            const double mag = phi.magnitude();
            for (const auto &pt : phi.support()) terms_.push_back({seq_id(pt.bits | shift), i_power(pt.phase) * mag});
            halves_.push_back({begin, terms_.size()});
            groups_.push_back({halves_.size() - 1, halves_.size() - 1});
        } else if (sampler_ == SamplerKind::Stabilizer) {
            if (shared) {
                const std::size_t h = add_ss_half(phi, shift, mc_, rng);
                groups_.push_back({h, h});
            } else {
                const std::size_t half = std::max<std::size_t>(1, mc_ / 2);
                const std::size_t a = add_ss_half(phi, shift, half, rng);
                const std::size_t b = add_ss_half(phi, shift, half, rng);
                groups_.push_back({a, b});
            }
        } else {
            // One shared draw from p_lambda serves every state in the batch.
            if (ns_samples_.empty()) ns_samples_ = sample_counts(*model_, params_, mc_, rng);
            const std::size_t begin = terms_.size();
            for (const auto &[s, c] : ns_samples_) {
                const Complex amp = phi.amplitude(s);
                if (amp != Complex(0, 0)) terms_.push_back({seq_id(s), amp * (double(c) / double(mc_))});
            }
            halves_.push_back({begin, terms_.size()});
            groups_.push_back({halves_.size() - 1, halves_.size() - 1});
        }
    }

    const NqsModel *model_;
    std::span<const double> params_;
    SamplerKind sampler_;
    std::size_t mc_;
    std::vector<PackedBits> seqs_;
    std::vector<std::size_t> dense_ids_;
    std::unordered_map<PackedBits, std::size_t> sparse_ids_;
    std::vector<Term> terms_;
    std::vector<Half> halves_;
    std::vector<Group> groups_;
    std::vector<Request> requests_;
    SampleCounts ns_samples_;
    std::vector<Complex> values_, sums_;
    std::unique_ptr<ModelEvaluation> eval_;
};

/// <psi_lambda|phi> for a state over every model bit.
inline Complex overlap(const NqsModel &model, std::span<const double> params, const StabilizerState &phi,
                       SamplerKind sampler, std::size_t mc_samples, Rng &rng) {
    if (phi.num_qubits() != model.config().total()) {
        throw std::invalid_argument("overlap needs a stabilizer over every model bit");
    }
    OverlapBatch batch(model, params, sampler, mc_samples);
    batch.add(CanonicalStabilizer(phi), rng);
    batch.evaluate(false);
    return batch.overlap(0);
}

struct OverlapGradient {
    Complex value;
    std::vector<double> grad_re, grad_im;
};

/// Overlap and the gradients of its real and imaginary parts from one sample set. Any sampler is
/// accepted; SS gives the estimator E_{s~p_phi}[grad psi^*(s) / phi^*(s)].
inline OverlapGradient overlap_grad(const NqsModel &model, std::span<const double> params, const StabilizerState &phi,
                                    SamplerKind sampler, std::size_t mc_samples, Rng &rng) {
    if (phi.num_qubits() != model.config().total()) {
        throw std::invalid_argument("overlap needs a stabilizer over every model bit");
    }
    const CanonicalStabilizer c(phi);
    Rng copy = rng;
    OverlapGradient out;
    for (int part = 0; part < 2; part++) {
        Rng local = copy;  // identical samples for both parts
        OverlapBatch batch(model, params, sampler, mc_samples);
        batch.add(c, local);
        batch.evaluate(true);
        out.value = batch.overlap(0);
        const Complex w = part == 0 ? Complex(1, 0) : Complex(0, 1);
        auto g = batch.gradient({}, std::span<const Complex>(&w, 1));
        (part == 0 ? out.grad_re : out.grad_im) = std::move(g);
        rng = local;
    }
    return out;
}

inline OverlapGradient overlap_grad_ss(const NqsModel &model, std::span<const double> params,
                                       const StabilizerState &phi, std::size_t mc_samples, Rng &rng) {
    return overlap_grad(model, params, phi, SamplerKind::Stabilizer, mc_samples, rng);
}

struct OverlapStats {
    Complex mean;
    double variance = 0;  // E|o_hat - mean|^2 of a single estimate
    std::size_t repeats = 0;

    double std_error() const { return std::sqrt(variance / double(repeats)); }
};

/// Sample mean and variance of `repeats` independent overlap estimates.
inline OverlapStats overlap_statistics(const NqsModel &model, std::span<const double> params,
                                       const StabilizerState &phi, SamplerKind sampler, std::size_t mc_samples,
                                       std::size_t repeats, Rng &rng) {
    if (repeats < 2) throw std::invalid_argument("need at least two repeats");
    const CanonicalStabilizer c(phi);
    std::vector<Complex> est;
    est.reserve(repeats);
    if (sampler == SamplerKind::NeuralState) {
        for (std::size_t r = 0; r < repeats; r++) {
            OverlapBatch batch(model, params, sampler, mc_samples);
            batch.add(c, rng);
            batch.evaluate(false);
            est.push_back(batch.overlap(0));
        }
    } else {
        // Each add() draws fresh stabilizer samples, so one batch holds every repeat.
        OverlapBatch batch(model, params, sampler, mc_samples);
        for (std::size_t r = 0; r < repeats; r++) batch.add(c, rng);
        batch.evaluate(false);
        for (std::size_t r = 0; r < repeats; r++) est.push_back(batch.overlap(r));
    }
    // Deviations from the first estimate keep identical estimates at exactly zero variance.
    Complex shift_mean(0, 0);
    for (const auto &e : est) shift_mean += e - est[0];
    shift_mean /= double(repeats);
    OverlapStats out;
    out.repeats = repeats;
    out.mean = est[0] + shift_mean;
    for (const auto &e : est) out.variance += std::norm(e - est[0] - shift_mean);
    out.variance /= double(repeats - 1);
    return out;
}

enum class ExpectationMode { Exact, MonteCarlo };

/// <phi|rho_lambda|phi> for a state over the physical bits.
inline double rho_expectation(const NqsModel &model, std::span<const double> params, const StabilizerState &phi,
                              ExpectationMode mode, std::size_t mc_samples, Rng &rng) {
    if (phi.num_qubits() != model.config().n_phys) {
        throw std::invalid_argument("rho_expectation needs a stabilizer over the physical bits");
    }
    OverlapBatch batch(model, params, mode == ExpectationMode::Exact ? SamplerKind::Exact : SamplerKind::Stabilizer,
                       mc_samples);
    batch.add(CanonicalStabilizer(phi), rng);
    batch.evaluate(false);
    return batch.probability(0);
}

// ---- Pauli snapshot expansion ----

struct ExpansionTerm {
    StabilizerState state;
    double weight = 0;  // 3^{|b|}
    int sign = 1;       // (-1)^{n - |b|}
};

inline constexpr std::size_t kMaxExpansionQubits = 8;

/// Writes the inverse-mapped Pauli snapshot as sum_{b,c} sign * 3^{|b|} |phi_bc><phi_bc|. Qubit k
/// takes the rotated outcome eigenstate when b_k = 1 and the computational bit c_k otherwise.
inline std::vector<ExpansionTerm> pauli_snapshot_expansion(const SnapshotRecord &rec, std::size_t n) {
    if (rec.ensemble != Ensemble::Pauli) throw std::invalid_argument("expansion needs a Pauli record");
    if (n > kMaxExpansionQubits) throw std::length_error("Pauli expansion limited to 8 qubits");
    if (rec.bases.size() != n) throw std::invalid_argument("basis string length does not match n");
    std::vector<ExpansionTerm> out;
    const PackedBits all = low_mask(n);
    for (PackedBits b = 0; b <= all; b++) {
        const PackedBits free = all & ~b;
        const int hot = std::popcount(b);
        const double weight = std::pow(3.0, hot);
        const int sign = (int(n) - hot) % 2 ? -1 : 1;
        // Enumerate submasks of `free` in increasing order.
        PackedBits c = 0;
        while (true) {
            StabilizerState st = StabilizerState::basis_state(n, (rec.outcome & b) | c);
            for (std::size_t q = 0; q < n; q++) {
                if (!bit_at(b, q)) continue;
                if (rec.bases[q] != 'Z') st.apply_h(q);
                if (rec.bases[q] == 'Y') st.apply_s(q);
            }
            out.push_back({std::move(st), weight, sign});
            if (c == free) break;
            c = (c - free) & free;
        }
    }
    return out;
}

// ---- losses ----

/// Loss targets prepared from a dataset. Each item contributes -sum_t coeff_t p(phi_t) to the
/// infidelity losses or -ln p(phi) to the cross-entropy losses.
struct TrainingSet {
    LossKind loss = LossKind::ShadowCE;
    std::size_t n = 0;
    std::vector<CanonicalStabilizer> states;
    std::vector<std::vector<std::pair<std::size_t, double>>> items;
    std::vector<double> weights;  // full-batch weight per item; sums to 1

    bool is_cross_entropy() const { return loss == LossKind::EmpiricalCE || loss == LossKind::ShadowCE; }
    std::size_t size() const { return items.size(); }
};

inline void check_compatible(Ensemble e, LossKind loss) {
    if (loss == LossKind::InfPauli && e != Ensemble::Pauli) {
        throw std::invalid_argument("inf-pauli loss needs a Pauli dataset");
    }
    if (loss == LossKind::InfClifford && e != Ensemble::Clifford) {
        throw std::invalid_argument("inf-clifford loss needs a Clifford dataset");
    }
}

inline TrainingSet prepare_training_set(const ShadowDataset &data, LossKind loss) {
    check_compatible(data.ensemble, loss);
    if (data.records.empty()) throw std::invalid_argument("empty dataset");
    TrainingSet set;
    set.loss = loss;
    set.n = data.n;
    if (loss == LossKind::ShadowCE) {
        WeightedStabilizerSet w = normalized_shadow_weights(data);
        set.states = std::move(w.states);
        set.weights = std::move(w.weights);
        for (std::size_t i = 0; i < set.states.size(); i++) set.items.push_back({{i, 1.0}});
        return set;
    }
    std::map<std::vector<std::uint64_t>, std::size_t> index;
    auto intern = [&](CanonicalStabilizer c) {
        auto [it, fresh] = index.emplace(c.key(), set.states.size());
        if (fresh) set.states.push_back(std::move(c));
        return it->second;
    };
    for (const auto &r : data.records) {
        if (loss == LossKind::InfPauli) {
            std::vector<std::pair<std::size_t, double>> terms;
            for (const auto &t : pauli_snapshot_expansion(r, data.n)) {
                terms.emplace_back(intern(CanonicalStabilizer(t.state)), t.sign * t.weight);
            }
            set.items.push_back(std::move(terms));
        } else {
            set.items.push_back({{intern(CanonicalStabilizer(snapshot_state(r, data.n))), 1.0}});
        }
    }
    set.weights.assign(set.items.size(), 1.0 / double(set.items.size()));
    return set;
}

struct LossGrad {
    double loss = 0;
    std::vector<double> grad;
    std::size_t clamped = 0;  // cross-entropy terms whose estimate fell below kMinProbability
};

/// sum_j item_weights[j] * loss(items[j]), with its gradient when `with_grad`.
inline LossGrad weighted_loss(const NqsModel &model, std::span<const double> params, const TrainingSet &set,
                              std::span<const std::size_t> items, std::span<const double> item_weights,
                              SamplerKind sampler, std::size_t mc_samples, Rng &rng, bool with_grad = true) {
    if (items.size() != item_weights.size()) throw std::invalid_argument("one weight per item required");
    OverlapBatch batch(model, params, sampler, mc_samples);
    std::unordered_map<std::size_t, std::size_t> request;
    for (std::size_t i : items) {
        for (const auto &[s, c] : set.items.at(i)) {
            if (!request.count(s)) request.emplace(s, batch.add(set.states[s], rng));
        }
    }
    batch.evaluate(with_grad);
    LossGrad out;
    std::vector<double> dprob(batch.size(), 0.0);
    for (std::size_t j = 0; j < items.size(); j++) {
        const double w = item_weights[j];
        if (set.is_cross_entropy()) {
            const std::size_t r = request.at(set.items[items[j]].front().first);
            double p = batch.probability(r);
            if (!(p >= kMinProbability)) {
                p = kMinProbability;
                out.clamped++;
            } else {
                dprob[r] -= w / p;
            }
            out.loss -= w * std::log(p);
        } else {
            for (const auto &[s, c] : set.items[items[j]]) {
                const std::size_t r = request.at(s);
                out.loss -= w * c * batch.probability(r);
                dprob[r] -= w * c;
            }
        }
    }
    if (with_grad) out.grad = batch.gradient(dprob);
    return out;
}

/// Mean loss over a minibatch of items (repeats allowed) and its gradient.
inline LossGrad loss_and_grad(const NqsModel &model, std::span<const double> params, const TrainingSet &set,
                              std::span<const std::size_t> items, SamplerKind sampler, std::size_t mc_samples,
                              Rng &rng, bool with_grad = true) {
    if (items.empty()) throw std::invalid_argument("empty minibatch");
    std::vector<double> w(items.size(), 1.0 / double(items.size()));
    return weighted_loss(model, params, set, items, w, sampler, mc_samples, rng, with_grad);
}

/// The full-dataset loss, evaluated in chunks so memory stays bounded.
inline LossGrad full_batch_loss(const NqsModel &model, std::span<const double> params, const TrainingSet &set,
                                SamplerKind sampler, std::size_t mc_samples, Rng &rng, bool with_grad = true,
                                std::size_t chunk = 64) {
    LossGrad out;
    if (with_grad) out.grad.assign(params.size(), 0.0);
    std::vector<std::size_t> idx;
    std::vector<double> w;
    for (std::size_t begin = 0; begin < set.size(); begin += chunk) {
        idx.clear();
        w.clear();
        for (std::size_t i = begin; i < std::min(set.size(), begin + chunk); i++) {
            idx.push_back(i);
            w.push_back(set.weights[i]);
        }
        LossGrad part = weighted_loss(model, params, set, idx, w, sampler, mc_samples, rng, with_grad);
        out.loss += part.loss;
        out.clamped += part.clamped;
        for (std::size_t k = 0; k < part.grad.size(); k++) out.grad[k] += part.grad[k];
    }
    return out;
}

// ---- optimization ----

struct AdamState {
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEpsilon = 1e-8;
    std::vector<double> m, v;
    std::uint64_t t = 0;
};

inline void adam_step(AdamState &state, std::vector<double> &params, std::span<const double> grad, double lr) {
    if (grad.size() != params.size()) throw std::invalid_argument("gradient length does not match parameters");
    for (std::size_t i = 0; i < grad.size(); i++) {
        if (!std::isfinite(grad[i])) {
            throw std::domain_error("non-finite gradient entry at index " + std::to_string(i));
        }
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    state.t++;
    const double c1 = 1 - std::pow(AdamState::kBeta1, double(state.t));
    const double c2 = 1 - std::pow(AdamState::kBeta2, double(state.t));
    for (std::size_t i = 0; i < params.size(); i++) {
        state.m[i] = AdamState::kBeta1 * state.m[i] + (1 - AdamState::kBeta1) * grad[i];
        state.v[i] = AdamState::kBeta2 * state.v[i] + (1 - AdamState::kBeta2) * grad[i] * grad[i];
        params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + AdamState::kEpsilon);
    }
}

inline double cosine_lr(std::size_t epoch, std::size_t total_epochs, double initial_lr) {
    if (epoch >= total_epochs) throw std::out_of_range("epoch outside the schedule");
    return initial_lr * 0.5 * (1 + std::cos(std::numbers::pi * double(epoch) / double(total_epochs)));
}

struct TrainConfig {
    std::size_t epochs = 50;
    double initial_lr = 0.01;
    std::size_t minibatch = 100;
    std::size_t mc_samples = 500;
    std::size_t patience = 10;
    std::size_t validation = 0;  // records held out from the end of the dataset
    std::uint64_t seed = 0;
    LossKind loss = LossKind::ShadowCE;
    SamplerKind sampler = SamplerKind::Stabilizer;

    void validate() const {
        if (initial_lr <= 0 || !std::isfinite(initial_lr)) throw std::invalid_argument("initial_lr must be positive");
        if (minibatch < 1) throw std::invalid_argument("minibatch must be at least 1");
        if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
        if (patience < 1) throw std::invalid_argument("patience must be at least 1");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0;
    double loss = 0;
    double infidelity = std::numeric_limits<double>::quiet_NaN();
    double validation_loss = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0;
};

struct TrainRun {
    std::vector<EpochRecord> epochs;
    std::vector<double> params;       // parameters returned by training (best ones after early stopping)
    std::vector<double> last_params;  // parameters after the final epoch that ran
    std::string stop_reason;
    std::size_t clamped = 0;
};

/// Tr(rho_true rho_lambda); equals <psi|rho_lambda|psi> for a pure truth.
inline double model_overlap(const NqsModel &model, std::span<const double> params, const DenseOperator &truth) {
    if (truth.n != model.config().n_phys) throw std::invalid_argument("truth size does not match the model");
    const Matrix psi = amplitude_matrix(model, params);
    return (psi.adjoint() * truth.m * psi).trace().real();
}

inline double model_infidelity(const NqsModel &model, std::span<const double> params, const DenseOperator &truth) {
    return 1.0 - model_overlap(model, params, truth);
}

/// One training trial. Model parameters start from `init` (or the seeded initialization).
inline TrainRun train(const ShadowDataset &data, const ModelConfig &model_config, const TrainConfig &cfg,
                      const std::optional<DenseOperator> &truth = std::nullopt,
                      std::optional<std::vector<double>> init = std::nullopt) {
    cfg.validate();
    if (data.n != model_config.n_phys) throw std::invalid_argument("dataset qubit count does not match the model");
    if (cfg.validation >= data.size()) throw std::invalid_argument("validation split leaves no training data");
    check_compatible(data.ensemble, cfg.loss);
    const NqsModel model(model_config);
    Rng rng(cfg.seed);
    const std::size_t n_train = data.size() - cfg.validation;
    const TrainingSet train_set = prepare_training_set(data.slice(0, n_train), cfg.loss);
    std::optional<TrainingSet> val_set;
    if (cfg.validation > 0) val_set = prepare_training_set(data.slice(n_train, data.size()), cfg.loss);

    TrainRun run;
    run.params = init ? std::move(*init) : model.init();
    if (run.params.size() != model.num_params()) throw std::invalid_argument("initial parameters have the wrong length");
    run.last_params = run.params;
    if (cfg.epochs == 0) {
        run.stop_reason = "no-epochs";
        return run;
    }
    std::vector<double> params = run.params;
    AdamState adam;
    const std::size_t steps = (n_train + cfg.minibatch - 1) / cfg.minibatch;
    std::discrete_distribution<std::size_t> draw(train_set.weights.begin(), train_set.weights.end());
    std::vector<std::size_t> order(train_set.size());
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    run.stop_reason = "completed";
    for (std::size_t epoch = 0; epoch < cfg.epochs; epoch++) {
        const auto start = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = cosine_lr(epoch, cfg.epochs, cfg.initial_lr);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        std::vector<std::size_t> batch;
        for (std::size_t step = 0; step < steps; step++) {
            batch.clear();
            if (cfg.loss == LossKind::ShadowCE) {
                for (std::size_t j = 0; j < cfg.minibatch; j++) batch.push_back(draw(rng));
            } else {
                const std::size_t end = std::min(order.size(), (step + 1) * cfg.minibatch);
                batch.assign(order.begin() + std::ptrdiff_t(step * cfg.minibatch), order.begin() + std::ptrdiff_t(end));
            }
            LossGrad lg = loss_and_grad(model, params, train_set, batch, cfg.sampler, cfg.mc_samples, rng);
            run.clamped += lg.clamped;
            loss_sum += lg.loss;
            adam_step(adam, params, lg.grad, rec.lr);
        }
        rec.loss = loss_sum / double(steps);
        if (truth) rec.infidelity = model_infidelity(model, params, *truth);
        bool stop = false;
        if (val_set) {
            rec.validation_loss =
                full_batch_loss(model, params, *val_set, cfg.sampler, cfg.mc_samples, rng, false).loss;
            if (rec.validation_loss < best) {
                best = rec.validation_loss;
                run.params = params;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                stop = true;
            }
        } else {
            run.params = params;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.epochs.push_back(rec);
        if (stop) {
            run.stop_reason = "early-stop";
            break;
        }
    }
    run.last_params = params;
    return run;
}

/// CSV with columns epoch, lr, loss, validation_loss, infidelity, seconds. Missing values are written as nan.
inline void write_train_csv(std::ostream &out, const TrainRun &run) {
    out << "epoch,lr,loss,validation_loss,infidelity,seconds\n";
    char buf[256];
    for (const auto &e : run.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.6f\n", e.epoch, e.lr, e.loss, e.validation_loss,
                      e.infidelity, e.seconds);
        out << buf;
    }
}

}  // namespace nqst
