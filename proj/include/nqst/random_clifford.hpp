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

#include <random>
#include <stdexcept>

#include "nqst/circuit.hpp"
#include "nqst/stabilizer.hpp"

namespace nqst {

namespace detail {

// Sign-free Heisenberg tracking of a Pauli pair while building a sweep.
struct PairTracker {
    TableauRow a, b;
    CliffordCircuit &out;

    void h(std::uint32_t q) {
        out.h(q);
        for (TableauRow *r : {&a, &b}) {
            const PackedBits m = PackedBits{1} << q;
            PackedBits xb = r->x & m, zb = r->z & m;
            r->x = (r->x & ~m) | zb;
            r->z = (r->z & ~m) | xb;
        }
    }
    void s(std::uint32_t q) {
        out.s(q);
        for (TableauRow *r : {&a, &b}) {
            const PackedBits m = PackedBits{1} << q;
            r->z ^= r->x & m;
        }
    }
    void cnot(std::uint32_t c, std::uint32_t t) {
        out.cnot(c, t);
        for (TableauRow *r : {&a, &b}) {
            if (bit_at(r->x, c)) {
                r->x ^= PackedBits{1} << t;
            }
            if (bit_at(r->z, t)) {
                r->z ^= PackedBits{1} << c;
            }
        }
    }
    // Turns every Y or Z factor of `r` on qubits >= first into X.
    void clear_z(const TableauRow &r, std::size_t first, std::size_t n) {
        const TableauRow snapshot = r;
        for (std::size_t j = first; j < n; j++) {
            if (bit_at(snapshot.z, j)) {
                if (bit_at(snapshot.x, j)) {
                    s(std::uint32_t(j));
                } else {
                    h(std::uint32_t(j));
                }
            }
        }
    }
};

inline TableauRow random_row(std::size_t first, std::size_t n, Rng &rng) {
    const PackedBits mask = low_mask(n) & ~low_mask(first);
    return TableauRow{rng() & mask, rng() & mask, 0};
}

}  // namespace detail

/// Uniformly random n-qubit Clifford (up to global phase) as a gate list.
///
/// Column by column, draws a uniform anticommuting Pauli pair (A, B) on qubits i..n-1, builds a
/// sweep W with W A W^dag = +-X_i and W B W^dag = +-Z_i, and keeps W^-1. The symplectic part is
/// then uniform, and a uniform Pauli layer fixes the signs.
inline CliffordCircuit random_clifford(std::size_t n, Rng &rng) {
    if (n < 1 || n > kMaxQubits) {
        throw std::invalid_argument("random_clifford needs 1..64 qubits");
    }
    std::vector<CliffordCircuit> layers;
    layers.reserve(n);
    for (std::size_t i = 0; i < n; i++) {
        TableauRow a, b;
        do {
            a = detail::random_row(i, n, rng);
        } while (a.x == 0 && a.z == 0);
        do {
            b = detail::random_row(i, n, rng);
        } while (parity((a.x & b.z) ^ (a.z & b.x)) == 0);

        CliffordCircuit sweep(n);
        detail::PairTracker t{a, b, sweep};
        const auto qi = std::uint32_t(i);
        t.clear_z(t.a, i, n);
        std::size_t j0 = std::size_t(std::countr_zero(t.a.x));
        for (std::size_t j = j0 + 1; j < n; j++) {
            if (bit_at(t.a.x, j)) {
                t.cnot(std::uint32_t(j0), std::uint32_t(j));
            }
        }
        if (j0 != i) {
            t.cnot(qi, std::uint32_t(j0));
            t.cnot(std::uint32_t(j0), qi);
            t.cnot(qi, std::uint32_t(j0));
        }
        t.h(qi);
        t.clear_z(t.b, i + 1, n);
        if (bit_at(t.b.z, i)) {
            t.s(qi);
        }
        for (std::size_t j = i + 1; j < n; j++) {
            if (bit_at(t.b.x, j)) {
                t.cnot(qi, std::uint32_t(j));
            }
        }
        t.h(qi);
        layers.push_back(sweep.inverse());
    }
    CliffordCircuit out(n);
    const PackedBits mask = low_mask(n);
    out.pauli(PauliOperator(n, rng() & mask, rng() & mask, 0));
    for (std::size_t i = n; i-- > 0;) {
        out.extend(layers[i]);
    }
    return out;
}

/// H on qubit 0 followed by CNOT(q, q+1) along the chain.
inline CliffordCircuit ghz_circuit(std::size_t n) {
    CliffordCircuit c(n);
    c.h(0);
    for (std::uint32_t q = 0; q + 1 < n; q++) {
        c.cnot(q, q + 1);
    }
    return c;
}

inline constexpr double kMaxDepolarizing = 15.0 / 16.0;

/// One trajectory of the GHZ circuit with two-qubit depolarizing noise after each CNOT: with
/// probability p a uniformly chosen non-identity Pauli hits the CNOT's pair.
inline CliffordCircuit noisy_ghz_circuit(std::size_t n, double p, Rng &rng) {
    if (!(p >= 0.0 && p <= kMaxDepolarizing)) {
        throw std::invalid_argument("depolarizing strength must lie in [0, 15/16]");
    }
    CliffordCircuit c(n);
    c.h(0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> which(1, 15);
    for (std::uint32_t q = 0; q + 1 < n; q++) {
        c.cnot(q, q + 1);
        if (coin(rng) < p) {
            int k = which(rng);
            // Two base-4 digits, each 0..3 for I, X, Y, Z.
            PackedBits x = 0, z = 0;
            for (int slot = 0; slot < 2; slot++) {
                int letter = slot == 0 ? k / 4 : k % 4;
                const PackedBits m = PackedBits{1} << (q + slot);
                if (letter == 1 || letter == 2) {
                    x |= m;
                }
                if (letter == 2 || letter == 3) {
                    z |= m;
                }
            }
            c.pauli(PauliOperator(n, x, z, 0));
        }
    }
    return c;
}

inline StabilizerState prepare_noisy_ghz(std::size_t n, double p, Rng &rng) {
    return StabilizerState::from_circuit(noisy_ghz_circuit(n, p, rng));
}

}  // namespace nqst
