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
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nqst/dense.hpp"
#include "nqst/random_clifford.hpp"
#include "nqst/stabilizer.hpp"

namespace nqst {

enum class Ensemble { Pauli, Clifford };

inline std::string ensemble_name(Ensemble e) { return e == Ensemble::Pauli ? "pauli" : "clifford"; }

inline Ensemble parse_ensemble(const std::string &s) {
    if (s == "pauli") return Ensemble::Pauli;
    if (s == "clifford") return Ensemble::Clifford;
    throw std::invalid_argument("unknown ensemble '" + s + "' (expected pauli or clifford)");
}

/// One measurement (U_i, s_i). Pauli records store a basis letter per qubit; Clifford records the
/// sampled circuit.
struct SnapshotRecord {
    Ensemble ensemble = Ensemble::Pauli;
    std::string bases;
    CliffordCircuit unitary;
    PackedBits outcome = 0;

    bool operator==(const SnapshotRecord &) const = default;
};

struct ShadowDataset {
    std::size_t n = 0;
    Ensemble ensemble = Ensemble::Pauli;
    std::uint64_t seed = 0;
    std::vector<SnapshotRecord> records;

    std::size_t size() const { return records.size(); }
    bool operator==(const ShadowDataset &) const = default;

    /// Records [begin, end) as a new dataset sharing the header.
    ShadowDataset slice(std::size_t begin, std::size_t end) const {
        if (begin > end || end > records.size()) {
            throw std::out_of_range("dataset slice out of range");
        }
        ShadowDataset out{n, ensemble, seed, {}};
        out.records.assign(records.begin() + std::ptrdiff_t(begin), records.begin() + std::ptrdiff_t(end));
        return out;
    }
};

using StatePreparation = std::function<StabilizerState(Rng &)>;

/// Measures N independent preparations in random bases. The state is sampled jointly over all
/// qubits, which equals measuring them one after another.
inline ShadowDataset acquire_shadows(const StatePreparation &prep, std::size_t n, Ensemble ensemble, std::size_t count,
                                     Rng &rng, std::uint64_t seed_tag = 0) {
    if (count < 1) {
        throw std::invalid_argument("need at least one snapshot");
    }
    ShadowDataset out{n, ensemble, seed_tag, {}};
    out.records.reserve(count);
    static constexpr char kLetters[3] = {'X', 'Y', 'Z'};
    for (std::size_t i = 0; i < count; i++) {
        StabilizerState state = prep(rng);
        if (state.num_qubits() != n) {
            throw std::invalid_argument("prepared state has the wrong qubit count");
        }
        SnapshotRecord rec;
        rec.ensemble = ensemble;
        if (ensemble == Ensemble::Pauli) {
            rec.bases.resize(n);
            for (std::size_t q = 0; q < n; q++) {
                char b = kLetters[rng() % 3];
                rec.bases[q] = b;
                if (b == 'Y') {
                    state.apply_s(q);
                    state.apply_s(q);
                    state.apply_s(q);
                }
                if (b != 'Z') {
                    state.apply_h(q);
                }
            }
        } else {
            rec.unitary = random_clifford(n, rng);
            state.apply(rec.unitary);
        }
        rec.outcome = CanonicalStabilizer(state).sample(rng);
        out.records.push_back(std::move(rec));
    }
    return out;
}

/// U_i^dag |s_i>.
inline StabilizerState snapshot_state(const SnapshotRecord &rec, std::size_t n) {
    StabilizerState s = StabilizerState::basis_state(n, rec.outcome);
    if (rec.ensemble == Ensemble::Pauli) {
        if (rec.bases.size() != n) {
            throw std::invalid_argument("basis string length does not match n");
        }
        for (std::size_t q = 0; q < n; q++) {
            if (rec.bases[q] != 'Z') {
                s.apply_h(q);
            }
            if (rec.bases[q] == 'Y') {
                s.apply_s(q);
            }
        }
    } else {
        s.apply(rec.unitary.inverse());
    }
    return s;
}

namespace detail {

inline Matrix kron(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); i++) {
        for (Eigen::Index j = 0; j < a.cols(); j++) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// 3|u><u| - I for the eigenstate of `basis` with eigenvalue (-1)^bit.
inline Matrix pauli_inverse_factor(char basis, int bit) {
    Matrix f(2, 2);
    const double sgn = bit ? -1.0 : 1.0;
    switch (basis) {
        case 'Z':
            f << (bit ? -1.0 : 2.0), 0, 0, (bit ? 2.0 : -1.0);
            break;
        case 'X':
            f << 0.5, 1.5 * sgn, 1.5 * sgn, 0.5;
            break;
        case 'Y':
            f << 0.5, Complex(0, -1.5 * sgn), Complex(0, 1.5 * sgn), 0.5;
            break;
        default:
            throw std::invalid_argument(std::string("bad Pauli basis letter '") + basis + "'");
    }
    return f;
}

inline Matrix pauli_inverse_map(const std::string &bases, PackedBits outcome) {
    Matrix out = pauli_inverse_factor(bases[0], bit_at(outcome, 0));
    for (std::size_t q = 1; q < bases.size(); q++) {
        out = kron(out, pauli_inverse_factor(bases[q], bit_at(outcome, q)));
    }
    return out;
}

// Key for identical Pauli records.
inline std::pair<std::string, PackedBits> pauli_key(const SnapshotRecord &r) { return {r.bases, r.outcome}; }

// Sum of |phi><phi| added into `acc` using only the support of phi.
inline void add_projector(Matrix &acc, const CanonicalStabilizer &phi, double scale) {
    const std::size_t n = phi.num_qubits();
    const auto support = phi.support();
    const double mag2 = std::ldexp(1.0, -int(phi.support_dimension()));
    std::vector<Eigen::Index> idx(support.size());
    for (std::size_t i = 0; i < support.size(); i++) {
        idx[i] = Eigen::Index(dense_index(support[i].bits, n));
    }
    for (std::size_t i = 0; i < support.size(); i++) {
        for (std::size_t j = 0; j < support.size(); j++) {
            acc(idx[i], idx[j]) += scale * mag2 * i_power(support[i].phase - support[j].phase);
        }
    }
}

// <phi|A|phi> using only the support of phi.
inline Complex sandwich(const Matrix &a, const CanonicalStabilizer &phi) {
    const std::size_t n = phi.num_qubits();
    const auto support = phi.support();
    const double mag2 = std::ldexp(1.0, -int(phi.support_dimension()));
    Complex acc = 0;
    for (const auto &si : support) {
        const auto ri = Eigen::Index(dense_index(si.bits, n));
        for (const auto &sj : support) {
            acc += i_power(sj.phase - si.phase) * a(ri, Eigen::Index(dense_index(sj.bits, n)));
        }
    }
    return acc * mag2;
}

// Axis ('X','Y','Z') and eigenvalue bit for each qubit of a product stabilizer state.
inline std::vector<std::pair<char, int>> product_factors(const CanonicalStabilizer &phi) {
    std::vector<std::pair<char, int>> out(phi.num_qubits());
    for (const auto &row : phi.rows()) {
        const PackedBits support = row.x | row.z;
        const std::size_t q = std::size_t(std::countr_zero(support));
        const char axis = (row.x && row.z) ? 'Y' : (row.x ? 'X' : 'Z');
        out[q] = {axis, row.sign};
    }
    return out;
}

}  // namespace detail

/// M^-1 of one record: (2^n+1)|phi><phi| - I for Clifford, a tensor product of 3|u><u| - I for Pauli.
inline DenseOperator inverse_map(const SnapshotRecord &rec, std::size_t n) {
    DenseOperator::check_size(n);
    if (rec.ensemble == Ensemble::Pauli) {
        if (rec.bases.size() != n) {
            throw std::invalid_argument("basis string length does not match n");
        }
        return DenseOperator(n, detail::pauli_inverse_map(rec.bases, rec.outcome));
    }
    DenseOperator out = DenseOperator::identity(n);
    out.m *= -1.0;
    detail::add_projector(out.m, CanonicalStabilizer(snapshot_state(rec, n)), double((std::size_t{1} << n) + 1));
    return out;
}

/// Mean of the inverse-mapped snapshots. Hermitian with unit trace but not necessarily PSD.
inline DenseOperator shadow_state(const ShadowDataset &data) {
    DenseOperator::check_size(data.n);
    if (data.records.empty()) {
        throw std::invalid_argument("empty dataset");
    }
    const double inv_n = 1.0 / double(data.size());
    DenseOperator out = DenseOperator::zero(data.n);
    if (data.ensemble == Ensemble::Pauli) {
        std::map<std::pair<std::string, PackedBits>, std::size_t> groups;
        for (const auto &r : data.records) {
            groups[detail::pauli_key(r)]++;
        }
        for (const auto &[key, count] : groups) {
            out.m += (double(count) * inv_n) * detail::pauli_inverse_map(key.first, key.second);
        }
    } else {
        const double scale = double((std::size_t{1} << data.n) + 1) * inv_n;
        for (const auto &r : data.records) {
            detail::add_projector(out.m, CanonicalStabilizer(snapshot_state(r, data.n)), scale);
        }
        out.m -= Matrix::Identity(Eigen::Index(out.dim()), Eigen::Index(out.dim()));
    }
    return out;
}

/// Distinct stabilizer states with a probability vector over them.
struct WeightedStabilizerSet {
    std::size_t n = 0;
    std::vector<CanonicalStabilizer> states;
    std::vector<double> weights;

    std::size_t size() const { return states.size(); }

    /// Position of each state keyed by canonical form.
    std::map<std::vector<std::uint64_t>, std::size_t> index() const {
        std::map<std::vector<std::uint64_t>, std::size_t> out;
        for (std::size_t i = 0; i < states.size(); i++) {
            out.emplace(states[i].key(), i);
        }
        return out;
    }
};

/// Snapshot multiplicities over distinct states, in order of first appearance.
inline WeightedStabilizerSet empirical_distribution(const ShadowDataset &data) {
    if (data.records.empty()) {
        throw std::invalid_argument("empty dataset");
    }
    WeightedStabilizerSet out;
    out.n = data.n;
    std::map<std::vector<std::uint64_t>, std::size_t> seen;
    for (const auto &r : data.records) {
        CanonicalStabilizer c(snapshot_state(r, data.n));
        auto [it, fresh] = seen.emplace(c.key(), out.states.size());
        if (fresh) {
            out.states.push_back(std::move(c));
            out.weights.push_back(0.0);
        }
        out.weights[it->second] += 1.0;
    }
    for (auto &w : out.weights) {
        w /= double(data.size());
    }
    return out;
}

/// |<phi| rho_hat |phi>| from the records, without forming rho_hat.
inline double shadow_weight(const CanonicalStabilizer &phi, const ShadowDataset &data) {
    if (phi.num_qubits() != data.n) {
        throw std::invalid_argument("state size does not match dataset");
    }
    const std::size_t n = data.n;
    double total = 0;
    if (data.ensemble == Ensemble::Clifford) {
        const double dim1 = std::ldexp(1.0, int(n)) + 1.0;
        for (const auto &r : data.records) {
            total += dim1 * overlap_squared(phi, CanonicalStabilizer(snapshot_state(r, n))) - 1.0;
        }
    } else if (phi.is_product()) {
        const auto factors = detail::product_factors(phi);
        for (const auto &r : data.records) {
            double prod = 1.0;
            for (std::size_t q = 0; q < n && prod != 0.0; q++) {
                if (factors[q].first != r.bases[q]) {
                    prod *= 0.5;
                } else {
                    prod *= factors[q].second == int(bit_at(r.outcome, q)) ? 2.0 : -1.0;
                }
            }
            total += prod;
        }
    } else {
        DenseOperator::check_size(n);
        for (const auto &r : data.records) {
            total += detail::sandwich(detail::pauli_inverse_map(r.bases, r.outcome), phi).real();
        }
    }
    return std::abs(total / double(data.size()));
}

/// Qubit count up to which shadow weights are read off a dense rho_hat.
inline constexpr std::size_t kDenseWeightQubits = 8;

/// Shadow weights of the distinct snapshots, normalized to a distribution.
inline WeightedStabilizerSet normalized_shadow_weights(const ShadowDataset &data) {
    WeightedStabilizerSet out = empirical_distribution(data);
    double sum = 0;
    if (data.n <= kDenseWeightQubits) {
        const DenseOperator rho = shadow_state(data);
        for (std::size_t i = 0; i < out.size(); i++) {
            out.weights[i] = std::abs(detail::sandwich(rho.m, out.states[i]).real());
            sum += out.weights[i];
        }
    } else {
        for (std::size_t i = 0; i < out.size(); i++) {
            out.weights[i] = shadow_weight(out.states[i], data);
            sum += out.weights[i];
        }
    }
    if (!(sum > 0)) {
        throw std::runtime_error("degenerate dataset: every shadow weight is zero");
    }
    for (auto &w : out.weights) {
        w /= sum;
    }
    return out;
}

/// Per-record single-shot estimates Tr(P M^-1(rho_i)).
inline std::vector<double> pauli_estimates(const ShadowDataset &data, const PauliOperator &p) {
    if (p.n != data.n || !p.is_hermitian()) {
        throw std::invalid_argument("estimate_pauli needs a Hermitian Pauli of matching size");
    }
    const double sign = p.phase == 0 ? 1.0 : -1.0;
    const std::string letters = p.letters();
    const bool is_identity = p.weight() == 0;
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto &r : data.records) {
        if (is_identity) {
            out.push_back(sign);
            continue;
        }
        if (r.ensemble == Ensemble::Pauli) {
            double v = sign;
            for (std::size_t q = 0; q < data.n && v != 0.0; q++) {
                if (letters[q] == 'I') {
                    continue;
                }
                v = letters[q] == r.bases[q] ? v * (bit_at(r.outcome, q) ? -3.0 : 3.0) : 0.0;
            }
            out.push_back(v);
        } else {
            CanonicalStabilizer phi(snapshot_state(r, data.n));
            PauliOperator hermitian = p;
            hermitian.phase = 0;
            out.push_back(sign * (std::ldexp(1.0, int(data.n)) + 1.0) * phi.expectation(hermitian));
        }
    }
    return out;
}

struct MeanEstimate {
    double mean = 0;
    double std_error = 0;
};

inline MeanEstimate summarize(const std::vector<double> &values) {
    MeanEstimate out;
    if (values.empty()) {
        return out;
    }
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.std_error = std::sqrt(ss / double(values.size() - 1) / double(values.size()));
    }
    return out;
}

inline double estimate_pauli(const ShadowDataset &data, const PauliOperator &p) {
    return summarize(pauli_estimates(data, p)).mean;
}

/// Euclidean projection of a real vector onto the probability simplex.
inline std::vector<double> project_to_simplex(const std::vector<double> &v) {
    if (v.empty()) {
        throw std::invalid_argument("empty vector");
    }
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0, theta = 0;
    for (std::size_t j = 0; j < u.size(); j++) {
        cumulative += u[j];
        double t = (cumulative - 1.0) / double(j + 1);
        if (u[j] - t > 0) {
            theta = t;
        }
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); i++) {
        out[i] = std::max(v[i] - theta, 0.0);
    }
    return out;
}

/// Nearest density matrix with the same eigenvectors: eigenvalues projected onto the simplex.
inline DenseOperator simplex_project(const DenseOperator &rho) {
    if (!rho.is_hermitian(1e-10)) {
        throw std::invalid_argument("simplex_project needs a Hermitian operator");
    }
    Matrix h = 0.5 * (rho.m + rho.m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    const Eigen::VectorXd &ev = solver.eigenvalues();
    std::vector<double> lam(ev.data(), ev.data() + ev.size());
    std::vector<double> proj = project_to_simplex(lam);
    Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(proj.data(), Eigen::Index(proj.size()));
    const Matrix &vecs = solver.eigenvectors();
    return DenseOperator(rho.n, vecs * d.asDiagonal() * vecs.adjoint());
}

// ---- dataset text format ----

inline void write_dataset(std::ostream &out, const ShadowDataset &data) {
    out << "SHADOWSET v1 n=" << data.n << " ensemble=" << ensemble_name(data.ensemble) << " N=" << data.size()
        << " seed=" << data.seed << "\n";
    for (const auto &r : data.records) {
        if (r.ensemble == Ensemble::Pauli) {
            out << "P " << r.bases << " " << format_bits(r.outcome, data.n) << "\n";
        } else {
            out << "C " << r.unitary.size() << " | " << r.unitary.to_text("; ") << " | "
                << format_bits(r.outcome, data.n) << "\n";
        }
    }
}

inline ShadowDataset read_dataset(std::istream &in) {
    auto fail = [](std::size_t line, const std::string &msg) {
        throw std::invalid_argument("dataset line " + std::to_string(line) + ": " + msg);
    };
    std::string header;
    if (!std::getline(in, header)) {
        fail(1, "missing header");
    }
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "SHADOWSET" || version != "v1") {
        fail(1, "expected 'SHADOWSET v1'");
    }
    std::map<std::string, std::string> fields;
    for (std::string tok; hs >> tok;) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) {
            fail(1, "malformed header field '" + tok + "'");
        }
        fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char *k : {"n", "ensemble", "N", "seed"}) {
        if (!fields.count(k)) {
            fail(1, std::string("header lacks '") + k + "'");
        }
    }
    ShadowDataset data;
    std::size_t expected = 0;
    try {
        data.n = std::stoul(fields["n"]);
        data.ensemble = parse_ensemble(fields["ensemble"]);
        expected = std::stoul(fields["N"]);
        data.seed = std::stoull(fields["seed"]);
    } catch (const std::exception &ex) {
        fail(1, ex.what());
    }
    if (data.n < 1 || data.n > kMaxQubits) {
        fail(1, "qubit count out of range");
    }
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) {
            continue;
        }
        SnapshotRecord rec;
        rec.ensemble = data.ensemble;
        try {
            if (line[0] == 'P' && data.ensemble == Ensemble::Pauli) {
                std::istringstream ls(line.substr(1));
                std::string bits;
                if (!(ls >> rec.bases >> bits)) {
                    fail(line_no, "expected 'P <bases> <bits>'");
                }
                if (rec.bases.size() != data.n || rec.bases.find_first_not_of("XYZ") != std::string::npos) {
                    fail(line_no, "basis string must have n letters from X, Y, Z");
                }
                rec.outcome = parse_bits(bits, data.n);
            } else if (line[0] == 'C' && data.ensemble == Ensemble::Clifford) {
                auto bar1 = line.find('|');
                auto bar2 = line.rfind('|');
                if (bar1 == std::string::npos || bar1 == bar2) {
                    fail(line_no, "expected 'C <count> | <gates> | <bits>'");
                }
                std::size_t count = std::stoul(line.substr(1, bar1 - 1));
                rec.unitary = CliffordCircuit::from_text(data.n, line.substr(bar1 + 1, bar2 - bar1 - 1));
                if (rec.unitary.size() != count) {
                    fail(line_no, "gate count mismatch");
                }
                std::istringstream bs(line.substr(bar2 + 1));
                std::string bits;
                bs >> bits;
                rec.outcome = parse_bits(bits, data.n);
            } else {
                fail(line_no, "record type does not match ensemble");
            }
        } catch (const std::invalid_argument &ex) {
            std::string what = ex.what();
            if (what.rfind("dataset line", 0) == 0) {
                throw;
            }
            fail(line_no, what);
        } catch (const std::out_of_range &ex) {
            fail(line_no, ex.what());
        }
        data.records.push_back(std::move(rec));
    }
    if (data.records.size() != expected) {
        fail(line_no, "header announces " + std::to_string(expected) + " records, found " +
                          std::to_string(data.records.size()));
    }
    if (data.records.empty()) {
        fail(line_no, "dataset has no records");
    }
    return data;
}

}  // namespace nqst
