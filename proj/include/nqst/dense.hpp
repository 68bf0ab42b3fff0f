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

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "nqst/bits.hpp"
#include "nqst/pauli.hpp"
#include "nqst/stabilizer.hpp"

namespace nqst {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Explicit 2^n x 2^n operator. Row/column index uses qubit 0 as the most significant bit.
struct DenseOperator {
    std::size_t n = 0;
    Matrix m;

    DenseOperator() = default;
    DenseOperator(std::size_t num_qubits, Matrix matrix) : n(num_qubits), m(std::move(matrix)) {
        const auto dim = Eigen::Index(1) << n;
        if (m.rows() != dim || m.cols() != dim) {
            throw std::invalid_argument("operator shape does not match qubit count");
        }
    }

    static DenseOperator zero(std::size_t n) {
        check_size(n);
        const auto dim = Eigen::Index(1) << n;
        return DenseOperator(n, Matrix::Zero(dim, dim));
    }
    static DenseOperator identity(std::size_t n) {
        check_size(n);
        const auto dim = Eigen::Index(1) << n;
        return DenseOperator(n, Matrix::Identity(dim, dim));
    }
    static DenseOperator maximally_mixed(std::size_t n) {
        DenseOperator out = identity(n);
        out.m /= double(std::size_t{1} << n);
        return out;
    }
    static DenseOperator projector(std::size_t n, const Vector &v) {
        check_size(n);
        return DenseOperator(n, v * v.adjoint());
    }

    std::size_t dim() const { return std::size_t{1} << n; }
    Complex trace() const { return m.trace(); }
    double hermiticity_error() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }
    bool is_hermitian(double tol = 1e-10) const { return hermiticity_error() <= tol; }

    /// Ascending eigenvalues of the Hermitian part.
    Eigen::VectorXd eigenvalues() const {
        Matrix h = 0.5 * (m + m.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }

    static void check_size(std::size_t n) {
        if (n < 1 || n > kMaxDenseQubits) {
            throw std::length_error("dense operators are limited to 1..12 qubits");
        }
    }
};

inline Vector to_vector(const std::vector<Complex> &v) {
    Vector out(Eigen::Index(v.size()));
    for (std::size_t i = 0; i < v.size(); i++) {
        out(Eigen::Index(i)) = v[i];
    }
    return out;
}

inline Vector dense_state(const CanonicalStabilizer &state) { return to_vector(to_dense(state)); }

/// Packed bit string for each dense index, cached per qubit count.
inline const std::vector<PackedBits> &dense_to_packed(std::size_t n) {
    static thread_local std::vector<std::vector<PackedBits>> cache(kMaxDenseQubits + 1);
    auto &table = cache.at(n);
    if (table.empty()) {
        table.resize(std::size_t{1} << n);
        for (std::size_t i = 0; i < table.size(); i++) {
            table[i] = from_dense_index(i, n);
        }
    }
    return table;
}

/// P|c> = i^{phase + |x&z|} (-1)^{|z&c|} |c xor x>, in packed form.
inline Complex pauli_column_phase(const PauliOperator &p, PackedBits c) {
    return i_power(p.phase + std::popcount(p.x & p.z) + 2 * parity(p.z & c));
}

inline Matrix pauli_matrix(const PauliOperator &p) {
    DenseOperator::check_size(p.n);
    const std::size_t dim = std::size_t{1} << p.n;
    const auto &packed = dense_to_packed(p.n);
    Matrix out = Matrix::Zero(Eigen::Index(dim), Eigen::Index(dim));
    for (std::size_t col = 0; col < dim; col++) {
        PackedBits c = packed[col];
        out(Eigen::Index(dense_index(c ^ p.x, p.n)), Eigen::Index(col)) = pauli_column_phase(p, c);
    }
    return out;
}

/// Tr(P rho) without building P.
inline Complex pauli_trace(const DenseOperator &rho, const PauliOperator &p) {
    if (rho.n != p.n) {
        throw std::invalid_argument("Pauli size does not match operator");
    }
    const auto &packed = dense_to_packed(p.n);
    Complex acc = 0;
    // Tr(P rho) = sum_c <c xor x| ... : sum over columns of rho of P(row=c^x, col=c) * rho(c, c^x).
    for (std::size_t c = 0; c < rho.dim(); c++) {
        PackedBits bits = packed[c];
        acc += pauli_column_phase(p, bits) * rho.m(Eigen::Index(c), Eigen::Index(dense_index(bits ^ p.x, p.n)));
    }
    return acc;
}

}  // namespace nqst
