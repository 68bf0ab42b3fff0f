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

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nqst/bits.hpp"
#include "nqst/circuit.hpp"
#include "nqst/pauli.hpp"

namespace nqst {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxDenseQubits = 12;

inline Complex i_power(int exponent) {
    switch (exponent & 3) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

/// One Hermitian tableau row: (-1)^sign * sigma(x, z).
struct TableauRow {
    PackedBits x = 0;
    PackedBits z = 0;
    std::uint8_t sign = 0;

    PauliOperator as_pauli(std::size_t n) const {
        return PauliOperator(n, x, z, 2 * sign);
    }
    bool operator==(const TableauRow &) const = default;
};

/// Replaces `target` by source * target. Both rows must commute for the sign to stay real.
inline void row_multiply(TableauRow &target, const TableauRow &source) {
    int g = pauli_product_phase(source.x, source.z, target.x, target.z);
    int total = 2 * source.sign + 2 * target.sign + g;
    target.sign = std::uint8_t(((total % 4 + 4) % 4) >> 1);
    target.x ^= source.x;
    target.z ^= source.z;
}

/// Aaronson-Gottesman tableau: rows [0, n) are destabilizers, rows [n, 2n) stabilizers.
class StabilizerState {
   public:
    StabilizerState() = default;

    /// |0...0>.
    static StabilizerState zero(std::size_t n) {
        if (n < 1 || n > kMaxQubits) {
            throw std::invalid_argument("stabilizer state needs 1..64 qubits");
        }
        StabilizerState out;
        out.n_ = n;
        out.rows_.resize(2 * n);
        for (std::size_t q = 0; q < n; q++) {
            out.rows_[q].x = PackedBits{1} << q;
            out.rows_[n + q].z = PackedBits{1} << q;
        }
        return out;
    }

    /// Computational basis state |s>.
    static StabilizerState basis_state(std::size_t n, PackedBits s) {
        StabilizerState out = zero(n);
        for (std::size_t q = 0; q < n; q++) {
            out.rows_[n + q].sign = bit_at(s, q);
        }
        return out;
    }

    static StabilizerState from_circuit(const CliffordCircuit &circuit) {
        StabilizerState out = zero(circuit.num_qubits());
        out.apply(circuit);
        return out;
    }

    std::size_t num_qubits() const { return n_; }
    const TableauRow &destabilizer(std::size_t k) const { return rows_.at(k); }
    const TableauRow &stabilizer(std::size_t k) const { return rows_.at(n_ + k); }
    const std::vector<TableauRow> &rows() const { return rows_; }

    void apply(const Gate &gate) {
        std::visit(Overloaded{
                       [&](const HGate &g) { apply_h(check(g.q)); },
                       [&](const SGate &g) { apply_s(check(g.q)); },
                       [&](const CnotGate &g) {
                           if (g.control == g.target) {
                               throw std::invalid_argument("CNOT control equals target");
                           }
                           apply_cnot(check(g.control), check(g.target));
                       },
                       [&](const PauliGate &g) {
                           if (g.pauli.n != n_) {
                               throw std::invalid_argument("Pauli gate size mismatch");
                           }
                           apply_pauli(g.pauli.x, g.pauli.z);
                       },
                   },
                   gate);
    }

    void apply(const CliffordCircuit &circuit) {
        if (circuit.num_qubits() != n_) {
            throw std::invalid_argument("circuit size does not match state");
        }
        for (const auto &g : circuit.gates()) {
            apply(g);
        }
    }

    void apply_h(std::size_t q) {
        const PackedBits m = PackedBits{1} << q;
        for (auto &row : rows_) {
            bool xb = row.x & m, zb = row.z & m;
            row.sign ^= std::uint8_t(xb && zb);
            row.x = (row.x & ~m) | (zb ? m : 0);
            row.z = (row.z & ~m) | (xb ? m : 0);
        }
    }

    void apply_s(std::size_t q) {
        const PackedBits m = PackedBits{1} << q;
        for (auto &row : rows_) {
            bool xb = row.x & m, zb = row.z & m;
            row.sign ^= std::uint8_t(xb && zb);
            if (xb) {
                row.z ^= m;
            }
        }
    }

    void apply_cnot(std::size_t c, std::size_t t) {
        const PackedBits mc = PackedBits{1} << c, mt = PackedBits{1} << t;
        for (auto &row : rows_) {
            bool xc = row.x & mc, zc = row.z & mc, xt = row.x & mt, zt = row.z & mt;
            row.sign ^= std::uint8_t(xc && zt && (xt == zc));
            if (xc) {
                row.x ^= mt;
            }
            if (zt) {
                row.z ^= mc;
            }
        }
    }

    void apply_pauli(PackedBits px, PackedBits pz) {
        for (auto &row : rows_) {
            row.sign ^= std::uint8_t(parity((row.x & pz) ^ (row.z & px)));
        }
    }

    /// Computational-basis measurement of qubit q; collapses the state in place.
    int measure_z(std::size_t q, Rng &rng) {
        check(q);
        const PackedBits m = PackedBits{1} << q;
        std::size_t p = 2 * n_;
        for (std::size_t i = n_; i < 2 * n_; i++) {
            if (rows_[i].x & m) {
                p = i;
                break;
            }
        }
        if (p < 2 * n_) {
            for (std::size_t i = 0; i < 2 * n_; i++) {
                if (i != p && (rows_[i].x & m)) {
                    row_multiply_loose(rows_[i], rows_[p]);
                }
            }
            rows_[p - n_] = rows_[p];
            int outcome = int(rng() & 1u);
            rows_[p] = TableauRow{0, m, std::uint8_t(outcome)};
            return outcome;
        }
        TableauRow scratch;
        for (std::size_t i = 0; i < n_; i++) {
            if (rows_[i].x & m) {
                row_multiply(scratch, rows_[n_ + i]);
            }
        }
        return scratch.sign;
    }

    /// Tableau consistency: symplectic pairing between destabilizers and stabilizers.
    bool is_valid() const {
        if (rows_.size() != 2 * n_) {
            return false;
        }
        const PackedBits mask = low_mask(n_);
        for (const auto &row : rows_) {
            if ((row.x | row.z) & ~mask) {
                return false;
            }
        }
        auto anticommute = [](const TableauRow &a, const TableauRow &b) {
            return parity((a.x & b.z) ^ (a.z & b.x)) == 1;
        };
        for (std::size_t i = 0; i < n_; i++) {
            for (std::size_t j = 0; j < n_; j++) {
                if (anticommute(rows_[n_ + i], rows_[n_ + j])) {
                    return false;
                }
                if (anticommute(rows_[i], rows_[j])) {
                    return false;
                }
                if (anticommute(rows_[i], rows_[n_ + j]) != (i == j)) {
                    return false;
                }
            }
        }
        return true;
    }

    bool operator==(const StabilizerState &) const = default;

   private:
    std::size_t check(std::size_t q) const {
        if (q >= n_) {
            throw std::out_of_range("qubit index " + std::to_string(q) + " out of range for " +
                                    std::to_string(n_) + " qubits");
        }
        return q;
    }

    // Destabilizer updates may pass through non-commuting products; their sign is irrelevant.
    static void row_multiply_loose(TableauRow &target, const TableauRow &source) {
        int g = pauli_product_phase(source.x, source.z, target.x, target.z);
        int total = ((2 * source.sign + 2 * target.sign + g) % 4 + 4) % 4;
        target.sign = std::uint8_t(total >> 1);
        target.x ^= source.x;
        target.z ^= source.z;
    }

    std::size_t n_ = 0;
    std::vector<TableauRow> rows_;
};

inline StabilizerState apply_gate(StabilizerState state, const Gate &gate) {
    state.apply(gate);
    return state;
}

inline std::pair<int, StabilizerState> measure_z(StabilizerState state, std::size_t q, Rng &rng) {
    int outcome = state.measure_z(q, rng);
    return {outcome, std::move(state)};
}

/// Row-reduced stabilizer generators. Columns are ordered x_0..x_{n-1}, z_0..z_{n-1}, so the first
/// `k` rows carry an X pivot and span the support directions while the rest are Z-only.
///
/// Amplitudes use the gauge in which the lexicographically smallest support string
/// (`min_point`) has amplitude +2^{-k/2}; every amplitude is i^e * 2^{-k/2} on the support.
class CanonicalStabilizer {
   public:
    CanonicalStabilizer() = default;

    explicit CanonicalStabilizer(const StabilizerState &state) : n_(state.num_qubits()) {
        rows_.reserve(n_);
        for (std::size_t i = 0; i < n_; i++) {
            rows_.push_back(state.stabilizer(i));
        }
        pivot_.assign(n_, 0);
        std::size_t row = 0;
        for (std::size_t col = 0; col < 2 * n_ && row < n_; col++) {
            const bool in_x = col < n_;
            const PackedBits m = PackedBits{1} << (in_x ? col : col - n_);
            auto has = [&](const TableauRow &r) { return ((in_x ? r.x : r.z) & m) != 0; };
            std::size_t found = n_;
            for (std::size_t i = row; i < n_; i++) {
                if (has(rows_[i])) {
                    found = i;
                    break;
                }
            }
            if (found == n_) {
                continue;
            }
            std::swap(rows_[row], rows_[found]);
            for (std::size_t i = 0; i < n_; i++) {
                if (i != row && has(rows_[i])) {
                    row_multiply(rows_[i], rows_[row]);
                }
            }
            pivot_[row] = col;
            row++;
        }
        if (row != n_) {
            throw std::logic_error("stabilizer generators are not independent");
        }
        k_ = 0;
        while (k_ < n_ && pivot_[k_] < n_) {
            k_++;
        }
        PackedBits s = 0;
        for (std::size_t j = k_; j < n_; j++) {
            if (rows_[j].sign) {
                s |= PackedBits{1} << (pivot_[j] - n_);
            }
        }
        for (std::size_t j = 0; j < k_; j++) {
            if (bit_at(s, pivot_[j])) {
                s ^= rows_[j].x;
            }
        }
        min_point_ = s;
    }

    std::size_t num_qubits() const { return n_; }
    /// Dimension of the support: the state has 2^k nonzero amplitudes.
    std::size_t support_dimension() const { return k_; }
    PackedBits min_point() const { return min_point_; }
    const std::vector<TableauRow> &rows() const { return rows_; }
    const std::vector<std::size_t> &pivots() const { return pivot_; }
    double magnitude() const { return std::sqrt(std::ldexp(1.0, -int(k_))); }

    /// Exponent e with amplitude(s) = i^e 2^{-k/2}, or -1 when s is outside the support.
    int amplitude_phase(PackedBits s) const {
        PackedBits t = s ^ min_point_;
        PackedBits cur = min_point_;
        int e = 0;
        for (std::size_t j = 0; j < k_; j++) {
            if (bit_at(t, pivot_[j])) {
                e += step_phase(j, cur);
                cur ^= rows_[j].x;
                t ^= rows_[j].x;
            }
        }
        if (t != 0) {
            return -1;
        }
        return e & 3;
    }

    Complex amplitude(PackedBits s) const {
        int e = amplitude_phase(s);
        if (e < 0) {
            return {0, 0};
        }
        return i_power(e) * magnitude();
    }

    /// Uniform draw from the support, i.e. from |amplitude|^2.
    PackedBits sample(Rng &rng) const {
        PackedBits s = min_point_;
        std::uint64_t word = 0;
        for (std::size_t j = 0; j < k_; j++) {
            if (j % 64 == 0) {
                word = rng();
            }
            if ((word >> (j % 64)) & 1u) {
                s ^= rows_[j].x;
            }
        }
        return s;
    }

    struct SupportPoint {
        PackedBits bits;
        std::uint8_t phase;
    };

    /// Every support string with its amplitude phase exponent, in Gray-code order.
    std::vector<SupportPoint> support() const {
        if (k_ > 24) {
            throw std::length_error("support too large to enumerate");
        }
        std::vector<SupportPoint> out;
        out.reserve(std::size_t{1} << k_);
        PackedBits cur = min_point_;
        int e = 0;
        out.push_back({cur, 0});
        for (std::uint64_t i = 1; i < (std::uint64_t{1} << k_); i++) {
            std::size_t j = std::size_t(std::countr_zero(i));
            e += step_phase(j, cur);
            cur ^= rows_[j].x;
            out.push_back({cur, std::uint8_t(e & 3)});
        }
        return out;
    }

    /// True when every generator acts on a single qubit.
    bool is_product() const {
        for (const auto &row : rows_) {
            if (std::popcount(row.x | row.z) != 1) {
                return false;
            }
        }
        return true;
    }

    /// <P> in {-1, 0, +1} for a Hermitian Pauli P.
    int expectation(const PauliOperator &p) const {
        if (p.n != n_ || !p.is_hermitian()) {
            throw std::invalid_argument("expectation needs a Hermitian Pauli of matching size");
        }
        PackedBits rx = p.x, rz = p.z;
        PauliOperator acc = PauliOperator::identity(n_);
        for (std::size_t j = 0; j < n_; j++) {
            const bool in_x = pivot_[j] < n_;
            const std::size_t q = in_x ? pivot_[j] : pivot_[j] - n_;
            if (bit_at(in_x ? rx : rz, q)) {
                rx ^= rows_[j].x;
                rz ^= rows_[j].z;
                acc = acc * rows_[j].as_pauli(n_);
            }
        }
        if (rx || rz) {
            return 0;
        }
        int rel = ((p.phase - acc.phase) % 4 + 4) % 4;
        return rel == 0 ? 1 : -1;
    }

    /// Exact state identity key: the reduced rows with signs.
    std::vector<std::uint64_t> key() const {
        std::vector<std::uint64_t> out;
        out.reserve(2 * n_ + 1);
        out.push_back(n_);
        for (const auto &row : rows_) {
            out.push_back(row.x);
            out.push_back(row.z | (PackedBits(row.sign) << 63));
        }
        return out;
    }

    bool operator==(const CanonicalStabilizer &other) const {
        return n_ == other.n_ && rows_ == other.rows_;
    }

   private:
    int step_phase(std::size_t j, PackedBits cur) const {
        const TableauRow &r = rows_[j];
        return 2 * r.sign + std::popcount(r.x & r.z) + 2 * parity(r.z & cur);
    }

    std::size_t n_ = 0;
    std::size_t k_ = 0;
    PackedBits min_point_ = 0;
    std::vector<TableauRow> rows_;
    std::vector<std::size_t> pivot_;
};

inline Complex amplitude(const StabilizerState &state, const BitString &s) {
    if (s.size() != state.num_qubits()) {
        throw std::invalid_argument("bit string length does not match state");
    }
    return CanonicalStabilizer(state).amplitude(pack(s));
}

inline BitString sample_basis_state(const StabilizerState &state, Rng &rng) {
    return unpack(CanonicalStabilizer(state).sample(rng), state.num_qubits());
}

/// |<a|b>|^2 from the stabilizer groups: 0 on a sign conflict, else 2^{-(n - dim(S_a cap S_b))}.
inline double overlap_squared(const CanonicalStabilizer &a, const CanonicalStabilizer &b) {
    const std::size_t n = a.num_qubits();
    if (b.num_qubits() != n) {
        throw std::invalid_argument("qubit count mismatch");
    }
    struct Work {
        PackedBits x, z;
        std::uint64_t bmask, amask;
    };
    std::vector<Work> work(n);
    const auto &arows = a.rows();
    const auto &brows = b.rows();
    const auto &apiv = a.pivots();
    for (std::size_t j = 0; j < n; j++) {
        Work w{brows[j].x, brows[j].z, std::uint64_t{1} << j, 0};
        for (std::size_t i = 0; i < n; i++) {
            const bool in_x = apiv[i] < n;
            const std::size_t q = in_x ? apiv[i] : apiv[i] - n;
            if (bit_at(in_x ? w.x : w.z, q)) {
                w.x ^= arows[i].x;
                w.z ^= arows[i].z;
                w.amask ^= std::uint64_t{1} << i;
            }
        }
        work[j] = w;
    }
    std::size_t rank = 0;
    for (std::size_t col = 0; col < 2 * n && rank < n; col++) {
        const bool in_x = col < n;
        const PackedBits m = PackedBits{1} << (in_x ? col : col - n);
        auto has = [&](const Work &w) { return ((in_x ? w.x : w.z) & m) != 0; };
        std::size_t found = n;
        for (std::size_t i = rank; i < n; i++) {
            if (has(work[i])) {
                found = i;
                break;
            }
        }
        if (found == n) {
            continue;
        }
        std::swap(work[rank], work[found]);
        for (std::size_t i = 0; i < n; i++) {
            if (i != rank && has(work[i])) {
                work[i].x ^= work[rank].x;
                work[i].z ^= work[rank].z;
                work[i].bmask ^= work[rank].bmask;
                work[i].amask ^= work[rank].amask;
            }
        }
        rank++;
    }
    for (std::size_t i = rank; i < n; i++) {
        PauliOperator pb = PauliOperator::identity(n), pa = PauliOperator::identity(n);
        for (std::size_t j = 0; j < n; j++) {
            if ((work[i].bmask >> j) & 1u) {
                pb = pb * brows[j].as_pauli(n);
            }
            if ((work[i].amask >> j) & 1u) {
                pa = pa * arows[j].as_pauli(n);
            }
        }
        if (pa.phase != pb.phase) {
            return 0.0;
        }
    }
    return std::ldexp(1.0, -int(rank));
}

inline double overlap_squared(const StabilizerState &a, const StabilizerState &b) {
    return overlap_squared(CanonicalStabilizer(a), CanonicalStabilizer(b));
}

/// <a|b> under both states' gauges, summed exactly over the common support.
inline Complex inner_product(const CanonicalStabilizer &a, const CanonicalStabilizer &b) {
    if (a.num_qubits() != b.num_qubits()) {
        throw std::invalid_argument("qubit count mismatch");
    }
    const bool a_smaller = a.support_dimension() <= b.support_dimension();
    const CanonicalStabilizer &small = a_smaller ? a : b;
    const CanonicalStabilizer &large = a_smaller ? b : a;
    std::int64_t count[4] = {0, 0, 0, 0};
    for (const auto &pt : small.support()) {
        int e_large = large.amplitude_phase(pt.bits);
        if (e_large < 0) {
            continue;
        }
        int e_a = a_smaller ? pt.phase : e_large;
        int e_b = a_smaller ? e_large : pt.phase;
        count[((e_b - e_a) % 4 + 4) % 4]++;
    }
    double scale = std::sqrt(std::ldexp(1.0, -int(a.support_dimension() + b.support_dimension())));
    return Complex(double(count[0] - count[2]), double(count[1] - count[3])) * scale;
}

inline Complex inner_product(const StabilizerState &a, const StabilizerState &b) {
    return inner_product(CanonicalStabilizer(a), CanonicalStabilizer(b));
}

/// Dense state vector, index with qubit 0 as the most significant bit.
inline std::vector<Complex> to_dense(const CanonicalStabilizer &state) {
    const std::size_t n = state.num_qubits();
    if (n > kMaxDenseQubits) {
        throw std::length_error("dense conversion limited to 12 qubits");
    }
    std::vector<Complex> out(std::size_t{1} << n, Complex(0, 0));
    const double mag = state.magnitude();
    for (const auto &pt : state.support()) {
        out[dense_index(pt.bits, n)] = i_power(pt.phase) * mag;
    }
    return out;
}

inline std::vector<Complex> to_dense(const StabilizerState &state) {
    if (state.num_qubits() > kMaxDenseQubits) {
        throw std::length_error("dense conversion limited to 12 qubits");
    }
    return to_dense(CanonicalStabilizer(state));
}

}  // namespace nqst
