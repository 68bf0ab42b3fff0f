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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nqst {

using Rng = std::mt19937_64;

/// Qubit-indexed bit vector. Element k holds the value of qubit (or sequence position) k.
using BitString = std::vector<std::uint8_t>;

/// Packed form of a BitString: bit k of the word is qubit k. Limits registers to 64 qubits.
using PackedBits = std::uint64_t;

inline constexpr std::size_t kMaxQubits = 64;

inline PackedBits low_mask(std::size_t n) {
    return n >= 64 ? ~PackedBits{0} : ((PackedBits{1} << n) - 1);
}

inline bool bit_at(PackedBits word, std::size_t k) {
    return (word >> k) & 1u;
}

inline int parity(PackedBits word) {
    return std::popcount(word) & 1;
}

inline PackedBits pack(const BitString &bits) {
    if (bits.size() > kMaxQubits) {
        throw std::invalid_argument("bit string longer than 64 bits");
    }
    PackedBits out = 0;
    for (std::size_t k = 0; k < bits.size(); k++) {
        if (bits[k] > 1) {
            throw std::invalid_argument("bit string entries must be 0 or 1");
        }
        out |= PackedBits(bits[k]) << k;
    }
    return out;
}

inline BitString unpack(PackedBits word, std::size_t n) {
    BitString out(n);
    for (std::size_t k = 0; k < n; k++) {
        out[k] = bit_at(word, k);
    }
    return out;
}

/// Dense basis index of a packed string. Qubit 0 is the most significant bit, so numeric order
/// on indices equals lexicographic order on strings read from qubit 0.
inline std::size_t dense_index(PackedBits word, std::size_t n) {
    std::size_t out = 0;
    for (std::size_t k = 0; k < n; k++) {
        out = (out << 1) | bit_at(word, k);
    }
    return out;
}

inline PackedBits from_dense_index(std::size_t index, std::size_t n) {
    PackedBits out = 0;
    for (std::size_t k = 0; k < n; k++) {
        if ((index >> (n - 1 - k)) & 1u) {
            out |= PackedBits{1} << k;
        }
    }
    return out;
}

inline std::string format_bits(PackedBits word, std::size_t n) {
    std::string out(n, '0');
    for (std::size_t k = 0; k < n; k++) {
        if (bit_at(word, k)) {
            out[k] = '1';
        }
    }
    return out;
}

inline PackedBits parse_bits(std::string_view text, std::size_t n) {
    if (text.size() != n) {
        throw std::invalid_argument("expected " + std::to_string(n) + " bits, got '" + std::string(text) + "'");
    }
    PackedBits out = 0;
    for (std::size_t k = 0; k < n; k++) {
        if (text[k] == '1') {
            out |= PackedBits{1} << k;
        } else if (text[k] != '0') {
            throw std::invalid_argument("bad bit character in '" + std::string(text) + "'");
        }
    }
    return out;
}

}  // namespace nqst
