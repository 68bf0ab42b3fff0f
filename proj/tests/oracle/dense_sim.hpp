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

// Test-only state-vector and density-matrix reference simulator. Shares no code with the library
// beyond the gate structs: gates act directly on amplitudes by index arithmetic.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "nqst/circuit.hpp"

namespace oracle {

using C = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Qubit q is bit (n-1-q) of the dense index.
inline std::size_t qbit(std::size_t n, std::size_t q) { return std::size_t{1} << (n - 1 - q); }

inline Vec zero_state(std::size_t n) {
    Vec v = Vec::Zero(Eigen::Index(1) << n);
    v(0) = 1.0;
    return v;
}

inline Mat single_qubit(char which) {
    Mat m(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    switch (which) {
        case 'I': m << 1, 0, 0, 1; break;
        case 'X': m << 0, 1, 1, 0; break;
        case 'Y': m << 0, C(0, -1), C(0, 1), 0; break;
        case 'Z': m << 1, 0, 0, -1; break;
        case 'H': m << r, r, r, -r; break;
        case 'S': m << 1, 0, 0, C(0, 1); break;
        default: throw std::invalid_argument("unknown single-qubit gate");
    }
    return m;
}

// Full 2^n operator from one 2x2 matrix on qubit q.
inline Mat embed(std::size_t n, std::size_t q, const Mat &u) {
    const std::size_t dim = std::size_t{1} << n, b = qbit(n, q);
    Mat out = Mat::Zero(Eigen::Index(dim), Eigen::Index(dim));
    for (std::size_t col = 0; col < dim; col++) {
        const int in = (col & b) ? 1 : 0;
        for (int o = 0; o < 2; o++) {
            std::size_t row = o ? (col | b) : (col & ~b);
            out(Eigen::Index(row), Eigen::Index(col)) += u(o, in);
        }
    }
    return out;
}

inline Mat pauli_matrix(const std::string &letters) {
    const std::size_t n = letters.size();
    Mat out = Mat::Identity(Eigen::Index(1) << n, Eigen::Index(1) << n);
    for (std::size_t q = 0; q < n; q++) {
        out = embed(n, q, single_qubit(letters[q])) * out;
    }
    return out;
}

inline Mat cnot_matrix(std::size_t n, std::size_t c, std::size_t t) {
    const std::size_t dim = std::size_t{1} << n;
    Mat out = Mat::Zero(Eigen::Index(dim), Eigen::Index(dim));
    for (std::size_t col = 0; col < dim; col++) {
        std::size_t row = (col & qbit(n, c)) ? (col ^ qbit(n, t)) : col;
        out(Eigen::Index(row), Eigen::Index(col)) = 1.0;
    }
    return out;
}

inline Mat gate_matrix(std::size_t n, const nqst::Gate &g) {
    return std::visit(nqst::Overloaded{
                          [&](const nqst::HGate &h) { return embed(n, h.q, single_qubit('H')); },
                          [&](const nqst::SGate &s) { return embed(n, s.q, single_qubit('S')); },
                          [&](const nqst::CnotGate &c) { return cnot_matrix(n, c.control, c.target); },
                          [&](const nqst::PauliGate &p) {
                              static const C ph[4] = {1, C(0, 1), -1, C(0, -1)};
                              return Mat(ph[p.pauli.phase] * pauli_matrix(p.pauli.letters()));
                          },
                      },
                      g);
}

inline Mat circuit_unitary(const nqst::CliffordCircuit &c) {
    const std::size_t n = c.num_qubits();
    Mat u = Mat::Identity(Eigen::Index(1) << n, Eigen::Index(1) << n);
    for (const auto &g : c.gates()) {
        u = gate_matrix(n, g) * u;
    }
    return u;
}

inline Vec run(const nqst::CliffordCircuit &c) { return circuit_unitary(c) * zero_state(c.num_qubits()); }

// Dense index for the library's packed bit convention (bit k = qubit k).
inline std::size_t index_of(std::uint64_t packed, std::size_t n) {
    std::size_t out = 0;
    for (std::size_t q = 0; q < n; q++) {
        if ((packed >> q) & 1u) {
            out |= qbit(n, q);
        }
    }
    return out;
}

inline Vec to_vec(const std::vector<C> &v) {
    Vec out(Eigen::Index(v.size()));
    for (std::size_t i = 0; i < v.size(); i++) {
        out(Eigen::Index(i)) = v[i];
    }
    return out;
}

// Two-qubit depolarizing channel on (a, b) computed from its Pauli-sum definition.
inline Mat depolarize_pair(const Mat &rho, std::size_t n, std::size_t a, std::size_t b, double p) {
    static const char letters[4] = {'I', 'X', 'Y', 'Z'};
    Mat out = (1.0 - p) * rho;
    for (int i = 0; i < 4; i++) {
        for (int j = 0; j < 4; j++) {
            if (i == 0 && j == 0) continue;
            Mat k = embed(n, a, single_qubit(letters[i])) * embed(n, b, single_qubit(letters[j]));
            out += (p / 15.0) * k * rho * k.adjoint();
        }
    }
    return out;
}

}  // namespace oracle
