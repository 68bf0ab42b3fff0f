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
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace nqst {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

/// A parameter block inside the flat parameter vector, stored row-major.
struct ParamBlock {
    std::size_t offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::size_t size() const { return std::size_t(rows * cols); }
};

/// Record of one forward evaluation. Every op stores its output value and, when recording, a
/// closure that pushes the output adjoint back into its inputs and into the parameter gradient.
/// The backward pass walks the closures once in reverse order.
class ComputationTape {
   public:
    ComputationTape(std::span<const double> params, bool recording)
        : params_(params), recording_(recording), param_grad_(recording ? params.size() : 0, 0.0) {}

    ComputationTape(const ComputationTape &) = delete;
    ComputationTape &operator=(const ComputationTape &) = delete;

    bool recording() const { return recording_; }
    std::span<const double> params() const { return params_; }

    ConstRowMap param(const ParamBlock &b) const { return ConstRowMap(params_.data() + b.offset, b.rows, b.cols); }
    RowMap param_grad(const ParamBlock &b) { return RowMap(param_grad_.data() + b.offset, b.rows, b.cols); }

    int push(RowMat value) {
        values_.push_back(std::move(value));
        grads_.emplace_back();
        return int(values_.size()) - 1;
    }
    const RowMat &value(int id) const { return values_.at(std::size_t(id)); }

    /// Output adjoint of a node, zero-initialized on first access.
    RowMat &grad(int id) {
        RowMat &g = grads_.at(std::size_t(id));
        if (g.size() == 0) {
            const RowMat &v = values_[std::size_t(id)];
            g = RowMat::Zero(v.rows(), v.cols());
        }
        return g;
    }
    bool has_grad(int id) const { return grads_.at(std::size_t(id)).size() != 0; }

    void on_backward(std::function<void()> fn) {
        if (recording_) {
            backward_.push_back(std::move(fn));
        }
    }

    /// Runs the reverse sweep and returns dOutput/dParams. Seed output adjoints through grad() first.
    std::vector<double> backward() {
        if (!recording_) {
            throw std::logic_error("tape was not recording");
        }
        if (consumed_) {
            throw std::logic_error("tape already consumed by a backward pass");
        }
        consumed_ = true;
        for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) {
            (*it)();
        }
        backward_.clear();
        return std::move(param_grad_);
    }

   private:
    std::span<const double> params_;
    bool recording_;
    bool consumed_ = false;
    std::vector<RowMat> values_;
    std::vector<RowMat> grads_;
    std::vector<std::function<void()>> backward_;
    std::vector<double> param_grad_;
};

namespace ops {

/// Rows of `table` selected by `index`, summed with rows of `pos` selected by `position`.
inline int embed(ComputationTape &t, const ParamBlock &table, const ParamBlock &pos, const std::vector<int> &index,
                 const std::vector<int> &position) {
    auto tab = t.param(table);
    auto ps = t.param(pos);
    RowMat out(Eigen::Index(index.size()), tab.cols());
    for (std::size_t r = 0; r < index.size(); r++) {
        out.row(Eigen::Index(r)) = tab.row(index[r]) + ps.row(position[r]);
    }
    int id = t.push(std::move(out));
    t.on_backward([&t, id, table, pos, index, position] {
        if (!t.has_grad(id)) return;
        const RowMat &g = t.grad(id);
        auto gt = t.param_grad(table);
        auto gp = t.param_grad(pos);
        for (std::size_t r = 0; r < index.size(); r++) {
            gt.row(index[r]) += g.row(Eigen::Index(r));
            gp.row(position[r]) += g.row(Eigen::Index(r));
        }
    });
    return id;
}

inline int layer_norm(ComputationTape &t, int x, const ParamBlock &gain, const ParamBlock &bias, double eps = 1e-5) {
    const RowMat &in = t.value(x);
    const Eigen::Index rows = in.rows(), d = in.cols();
    RowMat xhat(rows, d);
    Eigen::VectorXd rstd(rows);
    for (Eigen::Index r = 0; r < rows; r++) {
        const double mu = in.row(r).mean();
        const double var = (in.row(r).array() - mu).square().mean();
        rstd(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (in.row(r).array() - mu) * rstd(r);
    }
    auto g = t.param(gain);
    auto b = t.param(bias);
    RowMat out = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
    int id = t.push(std::move(out));
    if (t.recording()) {
        t.on_backward([&t, id, x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd)] {
            if (!t.has_grad(id)) return;
            const RowMat &dy = t.grad(id);
            auto gg = t.param_grad(gain);
            auto gb = t.param_grad(bias);
            gg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
            gb.row(0) += dy.colwise().sum();
            auto gv = t.param(gain);
            RowMat dxhat = dy.array().rowwise() * gv.row(0).array();
            RowMat &dx = t.grad(x);
            const double inv_d = 1.0 / double(dy.cols());
            for (Eigen::Index r = 0; r < dy.rows(); r++) {
                const double m1 = dxhat.row(r).sum() * inv_d;
                const double m2 = dxhat.row(r).dot(xhat.row(r)) * inv_d;
                dx.row(r).array() += rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
            }
        });
    }
    return id;
}

/// y = x W^T + b with W of shape (out, in).
inline int linear(ComputationTape &t, int x, const ParamBlock &weight, const ParamBlock &bias) {
    auto w = t.param(weight);
    auto b = t.param(bias);
    RowMat out = t.value(x) * w.transpose();
    out.rowwise() += b.row(0);
    int id = t.push(std::move(out));
    t.on_backward([&t, id, x, weight, bias] {
        if (!t.has_grad(id)) return;
        const RowMat &dy = t.grad(id);
        t.param_grad(weight).noalias() += dy.transpose() * t.value(x);
        t.param_grad(bias).row(0) += dy.colwise().sum();
        t.grad(x).noalias() += dy * t.param(weight);
    });
    return id;
}

inline int add(ComputationTape &t, int a, int b) {
    int id = t.push(t.value(a) + t.value(b));
    t.on_backward([&t, id, a, b] {
        if (!t.has_grad(id)) return;
        const RowMat &g = t.grad(id);
        t.grad(a) += g;
        t.grad(b) += g;
    });
    return id;
}

inline int tanh(ComputationTape &t, int x) {
    int id = t.push(t.value(x).array().tanh().matrix());
    t.on_backward([&t, id, x] {
        if (!t.has_grad(id)) return;
        const RowMat &y = t.value(id);
        t.grad(x).array() += t.grad(id).array() * (1.0 - y.array().square());
    });
    return id;
}

/// Elementwise clamp to [-limit, limit]; zero gradient where the clamp is active.
inline int clamp(ComputationTape &t, int x, double limit) {
    int id = t.push(t.value(x).cwiseMax(-limit).cwiseMin(limit));
    t.on_backward([&t, id, x, limit] {
        if (!t.has_grad(id)) return;
        const RowMat &in = t.value(x);
        t.grad(x).array() += (in.array().abs() < limit).select(t.grad(id).array(), 0.0);
    });
    return id;
}

/// Row-wise log-softmax.
inline int log_softmax(ComputationTape &t, int x) {
    const RowMat &in = t.value(x);
    RowMat out(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); r++) {
        const double m = in.row(r).maxCoeff();
        const double lse = m + std::log((in.row(r).array() - m).exp().sum());
        out.row(r) = in.row(r).array() - lse;
    }
    int id = t.push(std::move(out));
    t.on_backward([&t, id, x] {
        if (!t.has_grad(id)) return;
        const RowMat &g = t.grad(id);
        const RowMat &y = t.value(id);
        RowMat &dx = t.grad(x);
        for (Eigen::Index r = 0; r < g.rows(); r++) {
            dx.row(r).array() += g.row(r).array() - y.row(r).array().exp() * g.row(r).sum();
        }
    });
    return id;
}

/// Multi-head attention where row v attends to the rows listed in `context[v]` (its prefix
/// chain, itself included). `q`, `k`, `v` hold all heads side by side.
struct AttentionContext {
    std::vector<std::size_t> offset;  // size rows+1
    std::vector<int> rows;            // flattened context rows
};

inline int tree_attention(ComputationTape &t, int q, int k, int v, std::shared_ptr<const AttentionContext> context,
                          int heads) {
    const AttentionContext &ctx = *context;
    const RowMat &Q = t.value(q), &K = t.value(k), &V = t.value(v);
    const Eigen::Index n = Q.rows(), d = Q.cols(), dh = d / heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    std::vector<double> alpha(ctx.rows.size() * std::size_t(heads));
    RowMat out = RowMat::Zero(n, d);
    for (Eigen::Index r = 0; r < n; r++) {
        const std::size_t b = ctx.offset[std::size_t(r)], e = ctx.offset[std::size_t(r) + 1];
        for (int h = 0; h < heads; h++) {
            double *a = alpha.data() + b * std::size_t(heads) + std::size_t(h) * (e - b);
            double mx = -1e300;
            for (std::size_t j = b; j < e; j++) {
                a[j - b] = scale * Q.row(r).segment(h * dh, dh).dot(K.row(ctx.rows[j]).segment(h * dh, dh));
                mx = std::max(mx, a[j - b]);
            }
            double z = 0;
            for (std::size_t j = b; j < e; j++) {
                a[j - b] = std::exp(a[j - b] - mx);
                z += a[j - b];
            }
            for (std::size_t j = b; j < e; j++) {
                a[j - b] /= z;
                out.row(r).segment(h * dh, dh) += a[j - b] * V.row(ctx.rows[j]).segment(h * dh, dh);
            }
        }
    }
    int id = t.push(std::move(out));
    if (t.recording()) {
        t.on_backward([&t, id, q, k, v, context, heads, alpha = std::move(alpha), scale] {
            const AttentionContext &ctx = *context;
            if (!t.has_grad(id)) return;
            const RowMat &dO = t.grad(id);
            const RowMat &Q = t.value(q), &K = t.value(k), &V = t.value(v);
            RowMat &dQ = t.grad(q);
            RowMat &dK = t.grad(k);
            RowMat &dV = t.grad(v);
            const Eigen::Index dh = Q.cols() / heads;
            std::vector<double> da;
            for (Eigen::Index r = 0; r < Q.rows(); r++) {
                const std::size_t b = ctx.offset[std::size_t(r)], e = ctx.offset[std::size_t(r) + 1];
                da.resize(e - b);
                for (int h = 0; h < heads; h++) {
                    const double *a = alpha.data() + b * std::size_t(heads) + std::size_t(h) * (e - b);
                    auto dout = dO.row(r).segment(h * dh, dh);
                    double dot = 0;
                    for (std::size_t j = b; j < e; j++) {
                        da[j - b] = dout.dot(V.row(ctx.rows[j]).segment(h * dh, dh));
                        dot += a[j - b] * da[j - b];
                        dV.row(ctx.rows[j]).segment(h * dh, dh) += a[j - b] * dout;
                    }
                    for (std::size_t j = b; j < e; j++) {
                        const double ds = a[j - b] * (da[j - b] - dot) * scale;
                        dQ.row(r).segment(h * dh, dh) += ds * K.row(ctx.rows[j]).segment(h * dh, dh);
                        dK.row(ctx.rows[j]).segment(h * dh, dh) += ds * Q.row(r).segment(h * dh, dh);
                    }
                }
            }
        });
    }
    return id;
}

}  // namespace ops
}  // namespace nqst
