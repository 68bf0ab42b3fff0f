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
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nqst/pauli.hpp"

namespace nqst {

struct HGate {
    std::uint32_t q;
    bool operator==(const HGate &) const = default;
};

struct SGate {
    std::uint32_t q;
    bool operator==(const SGate &) const = default;
};

struct CnotGate {
    std::uint32_t control;
    std::uint32_t target;
    bool operator==(const CnotGate &) const = default;
};

struct PauliGate {
    PauliOperator pauli;
    bool operator==(const PauliGate &) const = default;
};

using Gate = std::variant<HGate, SGate, CnotGate, PauliGate>;

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

inline std::string format_gate(const Gate &gate) {
    return std::visit(
        Overloaded{
            [](const HGate &g) { return "H " + std::to_string(g.q); },
            [](const SGate &g) { return "S " + std::to_string(g.q); },
            [](const CnotGate &g) { return "CNOT " + std::to_string(g.control) + " " + std::to_string(g.target); },
            [](const PauliGate &g) {
                return "PAULI " + g.pauli.letters() + " " + std::string(PauliOperator::phase_name(g.pauli.phase));
            },
        },
        gate);
}

/// Ordered Clifford gate list on n qubits. Gates are applied front to back.
class CliffordCircuit {
   public:
    CliffordCircuit() = default;
    explicit CliffordCircuit(std::size_t n) : n_(n) {
        if (n < 1 || n > kMaxQubits) {
            throw std::invalid_argument("circuit needs 1..64 qubits");
        }
    }

    std::size_t num_qubits() const { return n_; }
    const std::vector<Gate> &gates() const { return gates_; }
    std::size_t size() const { return gates_.size(); }

    void append(const Gate &gate) {
        validate(gate);
        gates_.push_back(gate);
    }
    void h(std::uint32_t q) { append(HGate{q}); }
    void s(std::uint32_t q) { append(SGate{q}); }
    void cnot(std::uint32_t c, std::uint32_t t) { append(CnotGate{c, t}); }
    void pauli(const PauliOperator &p) { append(PauliGate{p}); }

    void extend(const CliffordCircuit &other) {
        for (const auto &g : other.gates_) {
            append(g);
        }
    }

    /// Circuit implementing the inverse unitary up to global phase.
    CliffordCircuit inverse() const {
        CliffordCircuit out(n_);
        for (auto it = gates_.rbegin(); it != gates_.rend(); ++it) {
            std::visit(
                Overloaded{
                    [&](const HGate &g) { out.h(g.q); },
                    [&](const SGate &g) {
                        out.s(g.q);
                        out.s(g.q);
                        out.s(g.q);
                    },
                    [&](const CnotGate &g) { out.cnot(g.control, g.target); },
                    [&](const PauliGate &g) {
                        PauliOperator p = g.pauli;
                        p.phase = std::uint8_t((4 - p.phase) & 3);
                        out.pauli(p);
                    },
                },
                *it);
        }
        return out;
    }

    /// One gate per line: `H q`, `S q`, `CNOT c t`, `PAULI <letters> <phase>`.
    std::string to_text(std::string_view separator = "\n") const {
        std::string out;
        for (std::size_t k = 0; k < gates_.size(); k++) {
            if (k) {
                out += separator;
            }
            out += format_gate(gates_[k]);
        }
        return out;
    }

    /// Parses gates separated by newlines or ';'. Blank entries and '#' comments are skipped.
    static CliffordCircuit from_text(std::size_t n, std::string_view text) {
        CliffordCircuit out(n);
        std::size_t start = 0;
        std::size_t line_no = 0;
        while (start <= text.size()) {
            std::size_t end = text.find_first_of(";\n", start);
            if (end == std::string_view::npos) {
                end = text.size();
            }
            line_no++;
            std::string entry(text.substr(start, end - start));
            if (auto hash = entry.find('#'); hash != std::string::npos) {
                entry.resize(hash);
            }
            std::istringstream in(entry);
            std::string op;
            if (in >> op) {
                try {
                    out.append(parse_gate(op, in, n));
                } catch (const std::exception &ex) {
                    throw std::invalid_argument("circuit entry " + std::to_string(line_no) + ": " + ex.what());
                }
            }
            start = end + 1;
        }
        return out;
    }

    bool operator==(const CliffordCircuit &) const = default;

   private:
    static Gate parse_gate(const std::string &op, std::istringstream &in, std::size_t n) {
        auto read_index = [&]() {
            long long v;
            if (!(in >> v) || v < 0) {
                throw std::invalid_argument("expected qubit index after " + op);
            }
            return std::uint32_t(v);
        };
        Gate g;
        if (op == "H") {
            g = HGate{read_index()};
        } else if (op == "S") {
            g = SGate{read_index()};
        } else if (op == "CNOT") {
            auto c = read_index();
            auto t = read_index();
            g = CnotGate{c, t};
        } else if (op == "PAULI") {
            std::string letters, phase;
            if (!(in >> letters >> phase)) {
                throw std::invalid_argument("PAULI needs a letter string and a phase");
            }
            if (letters.size() != n) {
                throw std::invalid_argument("PAULI string length does not match qubit count");
            }
            g = PauliGate{PauliOperator::from_string(letters, phase)};
        } else {
            throw std::invalid_argument("unknown gate '" + op + "'");
        }
        std::string extra;
        if (in >> extra) {
            throw std::invalid_argument("trailing token '" + extra + "'");
        }
        return g;
    }

    void validate(const Gate &gate) const {
        auto check = [&](std::uint32_t q) {
            if (q >= n_) {
                throw std::out_of_range("qubit index " + std::to_string(q) + " out of range for " +
                                        std::to_string(n_) + " qubits");
            }
        };
        std::visit(Overloaded{
                       [&](const HGate &g) { check(g.q); },
                       [&](const SGate &g) { check(g.q); },
                       [&](const CnotGate &g) {
                           check(g.control);
                           check(g.target);
                           if (g.control == g.target) {
                               throw std::invalid_argument("CNOT control equals target");
                           }
                       },
                       [&](const PauliGate &g) {
                           if (g.pauli.n != n_) {
                               throw std::invalid_argument("Pauli gate size mismatch");
                           }
                       },
                   },
                   gate);
    }

    std::size_t n_ = 0;
    std::vector<Gate> gates_;
};

}  // namespace nqst
