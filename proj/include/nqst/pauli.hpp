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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nqst/bits.hpp"

namespace nqst {

/// Exponent g of i in sigma(x1,z1) * sigma(x2,z2) = i^g sigma(x1^x2, z1^z2), summed over qubits.
/// sigma(1,1) is Y. Result is reduced mod 4.
inline int pauli_product_phase(PackedBits x1, PackedBits z1, PackedBits x2, PackedBits z2) {
    // Per qubit: +1 for XY, YZ, ZX orderings; -1 for the reverse; 0 otherwise.
    PackedBits y1 = x1 & z1, xo1 = x1 & ~z1, zo1 = z1 & ~x1;
    PackedBits y2 = x2 & z2, xo2 = x2 & ~z2, zo2 = z2 & ~x2;
    int plus = std::popcount((xo1 & y2) | (y1 & zo2) | (zo1 & xo2));
    int minus = std::popcount((y1 & xo2) | (zo1 & y2) | (xo1 & zo2));
    return ((plus - minus) % 4 + 4) % 4;
}

/// n-qubit Pauli operator i^phase * (tensor over k of sigma(x_k, z_k)).
struct PauliOperator {
    std::size_t n = 0;
    PackedBits x = 0;
    PackedBits z = 0;
    std::uint8_t phase = 0;  // exponent of i, in 0..3

    PauliOperator() = default;
    PauliOperator(std::size_t num_qubits, PackedBits xs, PackedBits zs, int phase_exponent = 0)
        : n(num_qubits), x(xs), z(zs), phase(std::uint8_t(((phase_exponent % 4) + 4) % 4)) {
        if (n < 1 || n > kMaxQubits) {
            throw std::invalid_argument("Pauli operator needs 1..64 qubits");
        }
        if ((x | z) & ~low_mask(n)) {
            throw std::invalid_argument("Pauli bits beyond qubit count");
        }
    }

    static PauliOperator identity(std::size_t n) {
        return PauliOperator(n, 0, 0, 0);
    }

    /// Parses a letter string such as "XIZY" with an optional phase token.
    static PauliOperator from_string(std::string_view letters, std::string_view phase_token = "+1") {
        PackedBits xs = 0, zs = 0;
        for (std::size_t k = 0; k < letters.size(); k++) {
            switch (letters[k]) {
                case 'I': case '_': break;
                case 'X': xs |= PackedBits{1} << k; break;
                case 'Z': zs |= PackedBits{1} << k; break;
                case 'Y': xs |= PackedBits{1} << k; zs |= PackedBits{1} << k; break;
                default:
                    throw std::invalid_argument("bad Pauli letter in '" + std::string(letters) + "'");
            }
        }
        return PauliOperator(letters.size(), xs, zs, parse_phase(phase_token));
    }

    static int parse_phase(std::string_view token) {
        if (token == "+1" || token == "1") return 0;
        if (token == "+i" || token == "i") return 1;
        if (token == "-1") return 2;
        if (token == "-i") return 3;
        throw std::invalid_argument("bad Pauli phase '" + std::string(token) + "'");
    }

    static std::string_view phase_name(int phase_exponent) {
        static constexpr std::string_view names[4] = {"+1", "+i", "-1", "-i"};
        return names[phase_exponent & 3];
    }

    std::string letters() const {
        std::string out(n, 'I');
        for (std::size_t k = 0; k < n; k++) {
            bool xb = bit_at(x, k), zb = bit_at(z, k);
            out[k] = xb ? (zb ? 'Y' : 'X') : (zb ? 'Z' : 'I');
        }
        return out;
    }

    std::size_t weight() const {
        return std::size_t(std::popcount(x | z));
    }

    bool is_hermitian() const {
        return (phase & 1) == 0;
    }

    bool commutes_with(const PauliOperator &other) const {
        return parity((x & other.z) ^ (z & other.x)) == 0;
    }

    PauliOperator operator*(const PauliOperator &rhs) const {
        if (n != rhs.n) {
            throw std::invalid_argument("Pauli size mismatch");
        }
        int g = pauli_product_phase(x, z, rhs.x, rhs.z);
        return PauliOperator(n, x ^ rhs.x, z ^ rhs.z, phase + rhs.phase + g);
    }

    bool operator==(const PauliOperator &) const = default;
};

}  // namespace nqst
