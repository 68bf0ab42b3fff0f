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
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nqst/autodiff.hpp"
#include "nqst/bits.hpp"
#include "nqst/dense.hpp"

namespace nqst {

struct ModelConfig {
    std::size_t n_phys = 0;
    std::size_t n_anc = 0;
    std::size_t layers = 2;
    std::size_t embed_dim = 8;
    std::size_t heads = 4;
    std::size_t ff_dim = 0;  // 0 selects 4 * embed_dim
    std::uint64_t seed = 0;
    double init_std = 0.02;  // spread of the Normal-initialized weight blocks

    std::size_t total() const { return n_phys + n_anc; }
    std::size_t feed_forward() const { return ff_dim ? ff_dim : 4 * embed_dim; }

    void validate() const {
        if (n_phys < 1) throw std::invalid_argument("model needs at least one physical qubit");
        if (n_anc > n_phys) throw std::invalid_argument("ancilla count may not exceed physical count");
        if (total() > 63) throw std::invalid_argument("sequence longer than 63 bits");
        if (layers < 1) throw std::invalid_argument("model needs at least one layer");
        if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0) {
            throw std::invalid_argument("embed_dim must be a positive multiple of heads");
        }
        if (!(init_std >= 0) || !std::isfinite(init_std)) throw std::invalid_argument("init_std must be finite and >= 0");
    }
    bool operator==(const ModelConfig &) const = default;
};

/// psi = exp(log_magnitude + i * phase).
struct AmplitudeValue {
    double log_magnitude = 0;
    double phase = 0;
    Complex value() const { return std::exp(Complex(log_magnitude, phase)); }
};

inline constexpr double kLogitClamp = 30.0;
inline constexpr int kStartToken = 2;

/// Distinct prefixes of a set of bit sequences. Node v at depth k stands for the prefix s_0..s_{k-1}
/// and produces the conditional of s_k; its input token is s_{k-1} (a start token at the root).
class PrefixTrie {
   public:
    explicit PrefixTrie(std::size_t length) : length_(length), index_(length) {
        if (length < 1 || length > 63) {
            throw std::invalid_argument("sequence length must be 1..63");
        }
        new_node(-1, 0, kStartToken, 0);
    }

    /// Trie holding every prefix of every length-T sequence.
    static PrefixTrie full(std::size_t length) {
        if (length > 20) {
            throw std::length_error("full enumeration limited to 20 bits");
        }
        PrefixTrie t(length);
        for (std::size_t k = 1; k < length; k++) {
            for (PackedBits p = 0; p < (PackedBits{1} << k); p++) {
                t.add_prefix(p, k);
            }
        }
        return t;
    }

    std::size_t length() const { return length_; }
    std::size_t num_nodes() const { return parent_.size(); }
    std::size_t num_sequences() const { return sequences_.size(); }
    const std::vector<PackedBits> &sequences() const { return sequences_; }
    int child(int node, int bit) const { return child_[std::size_t(node) * 2 + std::size_t(bit)]; }
    int depth(int node) const { return depth_[std::size_t(node)]; }
    PackedBits prefix(int node) const { return prefix_[std::size_t(node)]; }
    const std::vector<int> &tokens() const { return token_; }
    const std::vector<int> &depths() const { return depth_; }

    /// Node for the prefix of `bits` of the given depth, creating the chain as needed.
    int add_prefix(PackedBits bits, std::size_t depth) {
        if (depth >= length_) {
            throw std::out_of_range("prefix depth beyond sequence length");
        }
        context_.reset();
        int node = 0;
        for (std::size_t k = 1; k <= depth; k++) {
            const PackedBits p = bits & low_mask(k);
            auto &level = index_[k];
            auto it = level.find(p);
            if (it == level.end()) {
                const int b = int(bit_at(bits, k - 1));
                int fresh = new_node(node, int(k), b, p);
                child_[std::size_t(node) * 2 + std::size_t(b)] = fresh;
                level.emplace(p, fresh);
                node = fresh;
            } else {
                node = it->second;
            }
        }
        return node;
    }

    /// Registers a full sequence; returns its index among sequences.
    std::size_t add_sequence(PackedBits bits) {
        add_prefix(bits, length_ - 1);
        sequences_.push_back(bits & low_mask(length_));
        return sequences_.size() - 1;
    }

    /// Node producing the conditional of position k for `bits`. The prefix must already exist.
    int node_for(PackedBits bits, std::size_t k) const {
        if (k == 0) return 0;
        return index_[k].at(bits & low_mask(k));
    }

    /// Ancestor chains used by the attention op.
    std::shared_ptr<const ops::AttentionContext> context() const {
        if (!context_) {
            auto ctx = std::make_shared<ops::AttentionContext>();
            ctx->offset.reserve(num_nodes() + 1);
            ctx->offset.push_back(0);
            for (std::size_t v = 0; v < num_nodes(); v++) {
                const std::size_t start = ctx->rows.size();
                for (int a = int(v); a >= 0; a = parent_[std::size_t(a)]) {
                    ctx->rows.push_back(a);
                }
                std::reverse(ctx->rows.begin() + std::ptrdiff_t(start), ctx->rows.end());
                ctx->offset.push_back(ctx->rows.size());
            }
            context_ = ctx;
        }
        return context_;
    }

   private:
    int new_node(int parent, int depth, int token, PackedBits prefix) {
        parent_.push_back(parent);
        depth_.push_back(depth);
        token_.push_back(token);
        prefix_.push_back(prefix);
        child_.push_back(-1);
        child_.push_back(-1);
        return int(parent_.size()) - 1;
    }

    std::size_t length_;
    std::vector<int> parent_, depth_, token_, child_;
    std::vector<PackedBits> prefix_;
    std::vector<std::unordered_map<PackedBits, int>> index_;
    std::vector<PackedBits> sequences_;
    mutable std::shared_ptr<const ops::AttentionContext> context_;
};

/// Autoregressive transformer over bit sequences: pre-norm causal attention blocks with a tanh
/// feed-forward, a two-way softmax head for each conditional and a two-way phase head whose entry
/// for the realized bit is added to the total phase.
class NqsModel {
   public:
    struct Layer {
        ParamBlock ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };

    explicit NqsModel(ModelConfig config) : config_(config) {
        config_.validate();
        const auto d = Eigen::Index(config_.embed_dim);
        const auto ff = Eigen::Index(config_.feed_forward());
        token_ = block("token_embedding", 3, d);
        position_ = block("position_embedding", Eigen::Index(config_.total()), d);
        for (std::size_t l = 0; l < config_.layers; l++) {
            const std::string p = "layer" + std::to_string(l) + ".";
            Layer L;
            L.ln1_g = block(p + "ln1.gain", 1, d, Init::One);
            L.ln1_b = block(p + "ln1.bias", 1, d, Init::Zero);
            L.wq = block(p + "attn.q.weight", d, d);
            L.bq = block(p + "attn.q.bias", 1, d, Init::Zero);
            L.wk = block(p + "attn.k.weight", d, d);
            L.bk = block(p + "attn.k.bias", 1, d, Init::Zero);
            L.wv = block(p + "attn.v.weight", d, d);
            L.bv = block(p + "attn.v.bias", 1, d, Init::Zero);
            L.wo = block(p + "attn.out.weight", d, d);
            L.bo = block(p + "attn.out.bias", 1, d, Init::Zero);
            L.ln2_g = block(p + "ln2.gain", 1, d, Init::One);
            L.ln2_b = block(p + "ln2.bias", 1, d, Init::Zero);
            L.w1 = block(p + "ff.in.weight", ff, d);
            L.b1 = block(p + "ff.in.bias", 1, ff, Init::Zero);
            L.w2 = block(p + "ff.out.weight", d, ff);
            L.b2 = block(p + "ff.out.bias", 1, d, Init::Zero);
            layers_.push_back(L);
        }
        lnf_g_ = block("final_ln.gain", 1, d, Init::One);
        lnf_b_ = block("final_ln.bias", 1, d, Init::Zero);
        head_w_ = block("prob_head.weight", 2, d);
        head_b_ = block("prob_head.bias", 1, 2, Init::Zero);
        phase_w_ = block("phase_head.weight", 2, d);
        phase_b_ = block("phase_head.bias", 1, 2, Init::Zero);
    }

    const ModelConfig &config() const { return config_; }
    std::size_t num_params() const { return size_; }
    const std::map<std::string, ParamBlock> &layout() const { return layout_; }

    /// Weights drawn from N(0, init_std^2) with `config.seed`; biases zero, layer-norm gains one.
    std::vector<double> init() const {
        std::vector<double> out(size_, 0.0);
        Rng rng(config_.seed);
        std::normal_distribution<double> normal(0.0, config_.init_std);
        for (const auto &[b, init] : init_order_) {
            for (std::size_t i = 0; i < b.size(); i++) {
                out[b.offset + i] = init == Init::Normal ? normal(rng) : (init == Init::One ? 1.0 : 0.0);
            }
        }
        return out;
    }

    /// Node-level outputs of one forward pass: ids of the (nodes x 2) log-conditional and phase
    /// matrices on `tape`.
    struct NodeOutputs {
        int log_prob = -1;
        int phase = -1;
    };

    NodeOutputs forward(ComputationTape &tape, const PrefixTrie &trie) const {
        if (trie.length() != config_.total()) {
            throw std::invalid_argument("trie length does not match the model");
        }
        if (tape.params().size() != size_) {
            throw std::invalid_argument("parameter vector has the wrong length");
        }
        const int heads = int(config_.heads);
        auto ctx = trie.context();
        int x = ops::embed(tape, token_, position_, trie.tokens(), trie.depths());
        for (const auto &L : layers_) {
            int h = ops::layer_norm(tape, x, L.ln1_g, L.ln1_b);
            int q = ops::linear(tape, h, L.wq, L.bq);
            int k = ops::linear(tape, h, L.wk, L.bk);
            int v = ops::linear(tape, h, L.wv, L.bv);
            int a = ops::tree_attention(tape, q, k, v, ctx, heads);
            x = ops::add(tape, x, ops::linear(tape, a, L.wo, L.bo));
            int h2 = ops::layer_norm(tape, x, L.ln2_g, L.ln2_b);
            int f = ops::tanh(tape, ops::linear(tape, h2, L.w1, L.b1));
            x = ops::add(tape, x, ops::linear(tape, f, L.w2, L.b2));
        }
        int y = ops::layer_norm(tape, x, lnf_g_, lnf_b_);
        int logits = ops::clamp(tape, ops::linear(tape, y, head_w_, head_b_), kLogitClamp);
        NodeOutputs out;
        out.log_prob = ops::log_softmax(tape, logits);
        out.phase = ops::linear(tape, y, phase_w_, phase_b_);
        return out;
    }

   private:
    enum class Init { Normal, Zero, One };

    ParamBlock block(const std::string &name, Eigen::Index rows, Eigen::Index cols, Init init = Init::Normal) {
        ParamBlock b{size_, rows, cols};
        size_ += b.size();
        layout_.emplace(name, b);
        init_order_.emplace_back(b, init);
        return b;
    }

    ModelConfig config_;
    std::size_t size_ = 0;
    std::map<std::string, ParamBlock> layout_;
    std::vector<std::pair<ParamBlock, Init>> init_order_;
    ParamBlock token_, position_, lnf_g_, lnf_b_, head_w_, head_b_, phase_w_, phase_b_;
    std::vector<Layer> layers_;
};

/// Forward pass over a trie with per-sequence amplitudes and an optional reverse pass.
class ModelEvaluation {
   public:
    ModelEvaluation(const NqsModel &model, std::span<const double> params, PrefixTrie trie, bool record)
        : trie_(std::move(trie)), tape_(std::make_unique<ComputationTape>(params, record)) {
        out_ = model.forward(*tape_, trie_);
        const RowMat &lp = tape_->value(out_.log_prob);
        const RowMat &ph = tape_->value(out_.phase);
        const std::size_t T = trie_.length();
        amps_.resize(trie_.num_sequences());
        for (std::size_t j = 0; j < trie_.num_sequences(); j++) {
            const PackedBits s = trie_.sequences()[j];
            double l = 0, p = 0;
            for (std::size_t k = 0; k < T; k++) {
                const int node = trie_.node_for(s, k);
                const int b = int(bit_at(s, k));
                l += lp(node, b);
                p += ph(node, b);
            }
            amps_[j] = {0.5 * l, p};
        }
    }

    const PrefixTrie &trie() const { return trie_; }
    const std::vector<AmplitudeValue> &amplitudes() const { return amps_; }
    const RowMat &node_log_prob() const { return tape_->value(out_.log_prob); }

    /// Gradient of sum_j (dlog[j] * log|psi_j| + dphase[j] * phase_j). Consumes the tape.
    std::vector<double> gradient(std::span<const double> dlog, std::span<const double> dphase) {
        if (dlog.size() != amps_.size() || dphase.size() != amps_.size()) {
            throw std::invalid_argument("seed length does not match sequence count");
        }
        RowMat &glp = tape_->grad(out_.log_prob);
        RowMat &gph = tape_->grad(out_.phase);
        const std::size_t T = trie_.length();
        for (std::size_t j = 0; j < amps_.size(); j++) {
            if (dlog[j] == 0.0 && dphase[j] == 0.0) continue;
            const PackedBits s = trie_.sequences()[j];
            for (std::size_t k = 0; k < T; k++) {
                const int node = trie_.node_for(s, k);
                const int b = int(bit_at(s, k));
                glp(node, b) += 0.5 * dlog[j];
                gph(node, b) += dphase[j];
            }
        }
        return tape_->backward();
    }

   private:
    PrefixTrie trie_;
    std::unique_ptr<ComputationTape> tape_;
    NqsModel::NodeOutputs out_;
    std::vector<AmplitudeValue> amps_;
};

/// Packs physical bits s and ancilla bits sbar into one sequence.
inline PackedBits join_sequence(PackedBits s, PackedBits sbar, std::size_t n_phys) { return s | (sbar << n_phys); }

inline PrefixTrie trie_for(std::size_t length, const std::vector<PackedBits> &sequences) {
    PrefixTrie t(length);
    for (PackedBits s : sequences) t.add_sequence(s);
    return t;
}

inline std::vector<AmplitudeValue> evaluate(const NqsModel &model, std::span<const double> params,
                                            const std::vector<PackedBits> &sequences) {
    return ModelEvaluation(model, params, trie_for(model.config().total(), sequences), false).amplitudes();
}

inline AmplitudeValue log_psi(const NqsModel &model, std::span<const double> params, const BitString &s) {
    if (s.size() != model.config().total()) {
        throw std::invalid_argument("bit string length does not match the model");
    }
    return evaluate(model, params, {pack(s)}).front();
}

/// Every sequence with all of its amplitudes, in packed order 0..2^T-1.
inline std::vector<AmplitudeValue> enumerate_amplitudes(const NqsModel &model, std::span<const double> params) {
    const std::size_t T = model.config().total();
    if (T > 16) throw std::length_error("exhaustive enumeration limited to 16 bits");
    PrefixTrie trie = PrefixTrie::full(T);
    for (PackedBits s = 0; s < (PackedBits{1} << T); s++) trie.add_sequence(s);
    return ModelEvaluation(model, params, std::move(trie), false).amplitudes();
}

/// Sampled sequences with multiplicities.
using SampleCounts = std::vector<std::pair<PackedBits, std::size_t>>;

/// Exact ancestral sampling of `count` sequences, splitting counts binomially at each prefix.
inline SampleCounts sample_counts(const NqsModel &model, std::span<const double> params, std::size_t count, Rng &rng) {
    const std::size_t T = model.config().total();
    std::map<PackedBits, std::size_t> current{{0, count}};
    for (std::size_t k = 0; k < T; k++) {
        PrefixTrie trie(T);
        std::vector<int> nodes;
        for (const auto &[p, c] : current) nodes.push_back(trie.add_prefix(p, k));
        ModelEvaluation ev(model, params, std::move(trie), false);
        const RowMat &lp = ev.node_log_prob();
        std::map<PackedBits, std::size_t> next;
        std::size_t i = 0;
        for (const auto &[p, c] : current) {
            const double p1 = std::exp(lp(nodes[i++], 1));
            std::binomial_distribution<std::size_t> split(c, std::min(1.0, std::max(0.0, p1)));
            const std::size_t ones = split(rng);
            if (ones) next[p | (PackedBits{1} << k)] += ones;
            if (c - ones) next[p] += c - ones;
        }
        current = std::move(next);
    }
    return SampleCounts(current.begin(), current.end());
}

inline BitString sample(const NqsModel &model, std::span<const double> params, Rng &rng) {
    return unpack(sample_counts(model, params, 1, rng).front().first, model.config().total());
}

/// Amplitudes as a (2^n_phys x 2^n_anc) matrix; rows follow the dense index of the physical bits.
inline Matrix amplitude_matrix(const NqsModel &model, std::span<const double> params) {
    const auto &cfg = model.config();
    if (cfg.n_phys > 10 || cfg.n_anc > 10 || cfg.total() > 16) {
        throw std::length_error("amplitude matrix limited to 10 physical, 10 ancilla and 16 total bits");
    }
    const auto amps = enumerate_amplitudes(model, params);
    const std::size_t dim = std::size_t{1} << cfg.n_phys, adim = std::size_t{1} << cfg.n_anc;
    Matrix psi = Matrix::Zero(Eigen::Index(dim), Eigen::Index(adim));
    for (std::size_t s = 0; s < dim; s++) {
        const auto row = Eigen::Index(dense_index(s, cfg.n_phys));
        for (std::size_t a = 0; a < adim; a++) {
            psi(row, Eigen::Index(a)) = amps[join_sequence(s, a, cfg.n_phys)].value();
        }
    }
    return psi;
}

/// rho(s1, s2) = sum_sbar psi(s1, sbar) conj(psi(s2, sbar)), so <phi|rho|phi> = sum_sbar |<phi, sbar|psi>|^2.
inline DenseOperator density_matrix(const NqsModel &model, std::span<const double> params) {
    const Matrix psi = amplitude_matrix(model, params);
    return DenseOperator(model.config().n_phys, psi * psi.adjoint());
}

// ---- checkpoints ----

inline void write_checkpoint(std::ostream &out, const ModelConfig &cfg, const std::vector<double> &params) {
    char init[32];
    std::snprintf(init, sizeof init, "%.17g", cfg.init_std);
    out << "NQSCKPT v1 n_phys=" << cfg.n_phys << " n_anc=" << cfg.n_anc << " layers=" << cfg.layers
        << " embed=" << cfg.embed_dim << " heads=" << cfg.heads << " ff=" << cfg.feed_forward()
        << " seed=" << cfg.seed << " init=" << init << " phase=per-position-sum count=" << params.size() << "\n";
    for (double v : params) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        char bytes[8];
        for (int i = 0; i < 8; i++) bytes[i] = char((bits >> (8 * i)) & 0xff);
        out.write(bytes, 8);
    }
}

inline std::pair<ModelConfig, std::vector<double>> read_checkpoint(std::istream &in) {
    std::string header;
    if (!std::getline(in, header)) throw std::invalid_argument("checkpoint: missing header");
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "NQSCKPT" || version != "v1") throw std::invalid_argument("checkpoint: expected 'NQSCKPT v1'");
    std::map<std::string, std::string> f;
    for (std::string tok; hs >> tok;) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("checkpoint: malformed field '" + tok + "'");
        f[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char *k : {"n_phys", "n_anc", "layers", "embed", "heads", "ff", "seed", "phase", "count"}) {
        if (!f.count(k)) throw std::invalid_argument(std::string("checkpoint: header lacks '") + k + "'");
    }
    if (f["phase"] != "per-position-sum") throw std::invalid_argument("checkpoint: unsupported phase layout");
    ModelConfig cfg;
    cfg.n_phys = std::stoul(f["n_phys"]);
    cfg.n_anc = std::stoul(f["n_anc"]);
    cfg.layers = std::stoul(f["layers"]);
    cfg.embed_dim = std::stoul(f["embed"]);
    cfg.heads = std::stoul(f["heads"]);
    cfg.ff_dim = std::stoul(f["ff"]);
    cfg.seed = std::stoull(f["seed"]);
    if (f.count("init")) cfg.init_std = std::stod(f["init"]);
    const std::size_t count = std::stoul(f["count"]);
    NqsModel model(cfg);
    if (model.num_params() != count) throw std::invalid_argument("checkpoint: parameter count does not match config");
    std::vector<double> params(count);
    for (auto &v : params) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char *>(bytes), 8)) throw std::invalid_argument("checkpoint: truncated data");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; i++) bits |= std::uint64_t(bytes[i]) << (8 * i);
        std::memcpy(&v, &bits, sizeof v);
    }
    return {cfg, params};
}

}  // namespace nqst
