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

#include <gtest/gtest.h>

#include <sstream>

#include "nqst/random_clifford.hpp"
#include "nqst/training.hpp"
#include "oracle/dense_sim.hpp"
#include "oracle/random_circuits.hpp"
#include "oracle/shadow_oracle.hpp"

using namespace nqst;

namespace {

ModelConfig config(std::size_t n, std::size_t anc, std::uint64_t seed = 1) {
    ModelConfig c;
    c.n_phys = n;
    c.n_anc = anc;
    c.seed = seed;
    return c;
}

std::vector<double> perturbed(const NqsModel &m, Rng &rng, double scale = 0.5) {
    std::normal_distribution<double> g(0.0, scale);
    auto p = m.init();
    for (auto &v : p) v += g(rng);
    return p;
}

// Model amplitudes as a dense vector over all model bits.
oracle::Vec model_vector(const NqsModel &m, const std::vector<double> &p) {
    const std::size_t T = m.config().total();
    auto amps = enumerate_amplitudes(m, p);
    oracle::Vec v(Eigen::Index(1) << T);
    for (PackedBits s = 0; s < amps.size(); s++) v(Eigen::Index(oracle::index_of(s, T))) = amps[s].value();
    return v;
}

struct DenseStabilizer {
    StabilizerState state;
    oracle::Vec vec;  // same gauge as the canonical form
};

DenseStabilizer random_stabilizer(std::size_t n, Rng &rng) {
    auto circuit = random_clifford(n, rng);
    DenseStabilizer out{StabilizerState::from_circuit(circuit), oracle::run(circuit)};
    const PackedBits mp = CanonicalStabilizer(out.state).min_point();
    const oracle::C a = out.vec(Eigen::Index(oracle::index_of(mp, n)));
    out.vec *= std::conj(a) / std::abs(a);
    return out;
}

ShadowDataset ghz_dataset(std::size_t n, Ensemble e, std::size_t count, Rng &rng) {
    auto c = ghz_circuit(n);
    return acquire_shadows([c](Rng &) { return StabilizerState::from_circuit(c); }, n, e, count, rng);
}

bool close_rel(double a, double b, double rel, double floor) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

}  // namespace

TEST(Overlap, ExactMatchesDenseOracle) {
    Rng rng(1);
    NqsModel m(config(3, 0));
    for (int rep = 0; rep < 20; rep++) {
        auto p = perturbed(m, rng);
        auto phi = random_stabilizer(3, rng);
        const Complex want = model_vector(m, p).dot(phi.vec);
        EXPECT_LT(std::abs(overlap(m, p, phi.state, SamplerKind::Exact, 1, rng) - want), 1e-12);
    }
}

TEST(Overlap, StabilizerSamplerIsExactOnBasisStates) {
    Rng rng(2);
    NqsModel m(config(4, 0));
    auto p = perturbed(m, rng);
    for (PackedBits s : {0u, 5u, 15u}) {
        const auto phi = StabilizerState::basis_state(4, s);
        const Complex want = std::conj(evaluate(m, p, {s})[0].value());
        for (std::size_t mc : {1u, 7u, 500u}) {
            EXPECT_EQ(overlap(m, p, phi, SamplerKind::Stabilizer, mc, rng), want);
        }
        auto stats = overlap_statistics(m, p, phi, SamplerKind::Stabilizer, 13, 20, rng);
        EXPECT_EQ(stats.variance, 0.0);
    }
}

TEST(Overlap, MonteCarloEstimatorsAreUnbiased) {
    Rng rng(3);
    NqsModel m(config(3, 0));
    for (int rep = 0; rep < 4; rep++) {
        auto p = perturbed(m, rng, 0.3);
        auto phi = random_stabilizer(3, rng);
        const Complex exact = overlap(m, p, phi.state, SamplerKind::Exact, 1, rng);
        for (auto s : {SamplerKind::NeuralState, SamplerKind::Stabilizer}) {
            auto st = overlap_statistics(m, p, phi.state, s, 20, 1000, rng);
            EXPECT_LE(std::abs(st.mean - exact), 3.5 * st.std_error() + 1e-12) << sampler_name(s);
        }
    }
}

TEST(Overlap, MagnitudeBoundedByOne) {
    Rng rng(4);
    NqsModel m(config(4, 0));
    for (int rep = 0; rep < 20; rep++) {
        auto p = perturbed(m, rng, 1.0);
        auto phi = random_stabilizer(4, rng);
        EXPECT_LE(std::abs(overlap(m, p, phi.state, SamplerKind::Exact, 1, rng)), 1 + 1e-12);
    }
}

TEST(Overlap, GradientMatchesFiniteDifferences) {
    Rng rng(5);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng);
    auto phi = random_stabilizer(3, rng).state;
    auto g = overlap_grad(m, p, phi, SamplerKind::Exact, 1, rng);
    const double h = 1e-5;
    for (int k = 0; k < 40; k++) {
        const std::size_t i = rng() % p.size();
        auto plus = p, minus = p;
        plus[i] += h;
        minus[i] -= h;
        const Complex fd = (overlap(m, plus, phi, SamplerKind::Exact, 1, rng) -
                            overlap(m, minus, phi, SamplerKind::Exact, 1, rng)) /
                           (2 * h);
        EXPECT_TRUE(close_rel(g.grad_re[i], fd.real(), 1e-4, 1e-9)) << g.grad_re[i] << " vs " << fd.real();
        EXPECT_TRUE(close_rel(g.grad_im[i], fd.imag(), 1e-4, 1e-9)) << g.grad_im[i] << " vs " << fd.imag();
    }
}

TEST(Overlap, StabilizerGradientOnBasisStateIsExact) {
    Rng rng(6);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng);
    const auto phi = StabilizerState::basis_state(3, 6);
    auto ss = overlap_grad_ss(m, p, phi, 50, rng);
    auto ex = overlap_grad(m, p, phi, SamplerKind::Exact, 1, rng);
    for (std::size_t i = 0; i < p.size(); i++) {
        EXPECT_NEAR(ss.grad_re[i], ex.grad_re[i], 1e-12);
        EXPECT_NEAR(ss.grad_im[i], ex.grad_im[i], 1e-12);
    }
}

TEST(Overlap, StabilizerGradientConvergesToExactDirection) {
    Rng rng(7);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng, 0.3);
    auto phi = random_stabilizer(3, rng).state;
    auto ex = overlap_grad(m, p, phi, SamplerKind::Exact, 1, rng);
    auto angle = [&](std::size_t mc, std::size_t reps) {
        std::vector<double> mean(p.size(), 0.0);
        for (std::size_t r = 0; r < reps; r++) {
            auto g = overlap_grad_ss(m, p, phi, mc, rng);
            for (std::size_t i = 0; i < p.size(); i++) mean[i] += g.grad_re[i] / double(reps);
        }
        double dot = 0, a = 0, b = 0;
        for (std::size_t i = 0; i < p.size(); i++) {
            dot += mean[i] * ex.grad_re[i];
            a += mean[i] * mean[i];
            b += ex.grad_re[i] * ex.grad_re[i];
        }
        return std::acos(std::clamp(dot / std::sqrt(a * b), -1.0, 1.0));
    };
    const double coarse = angle(2, 5), fine = angle(50, 200);
    EXPECT_LT(fine, coarse);
    EXPECT_LT(fine, 0.1);
}

TEST(RhoExpectation, PureModelReducesToOverlap) {
    Rng rng(8);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng);
    auto phi = random_stabilizer(3, rng).state;
    const double want = std::norm(overlap(m, p, phi, SamplerKind::Exact, 1, rng));
    EXPECT_NEAR(rho_expectation(m, p, phi, ExpectationMode::Exact, 1, rng), want, 1e-14);
}

TEST(RhoExpectation, MatchesDensityMatrixAndTrace) {
    Rng rng(9);
    NqsModel m(config(3, 2));
    auto p = perturbed(m, rng);
    auto rho = density_matrix(m, p);
    double total = 0;
    for (PackedBits s = 0; s < 8; s++) total += rho_expectation(m, p, StabilizerState::basis_state(3, s), ExpectationMode::Exact, 1, rng);
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (int rep = 0; rep < 10; rep++) {
        auto phi = random_stabilizer(3, rng);
        const double want = phi.vec.dot(rho.m * phi.vec).real();
        EXPECT_NEAR(rho_expectation(m, p, phi.state, ExpectationMode::Exact, 1, rng), want, 1e-12);
    }
}

TEST(RhoExpectation, MonteCarloIsUnbiased) {
    Rng rng(10);
    NqsModel m(config(3, 2));
    auto p = perturbed(m, rng, 0.3);
    for (int rep = 0; rep < 3; rep++) {
        auto phi = random_stabilizer(3, rng).state;
        const double exact = rho_expectation(m, p, phi, ExpectationMode::Exact, 1, rng);
        std::vector<double> est;
        for (int r = 0; r < 200; r++) est.push_back(rho_expectation(m, p, phi, ExpectationMode::MonteCarlo, 40, rng));
        auto s = summarize(est);
        EXPECT_LE(std::abs(s.mean - exact), 3.5 * s.std_error + 1e-12);
    }
    EXPECT_THROW(rho_expectation(m, p, StabilizerState::zero(5), ExpectationMode::Exact, 1, rng), std::invalid_argument);
}

TEST(Overlap, NeuralSamplerRejectsPurifiedStates) {
    Rng rng(11);
    NqsModel m(config(2, 1));
    auto p = m.init();
    OverlapBatch batch(m, p, SamplerKind::NeuralState, 10);
    EXPECT_THROW(batch.add(CanonicalStabilizer(StabilizerState::zero(2)), rng), std::invalid_argument);
    EXPECT_THROW(OverlapBatch(m, p, SamplerKind::Stabilizer, 0), std::invalid_argument);
    NqsModel big(config(11, 0));
    EXPECT_THROW(OverlapBatch(big, big.init(), SamplerKind::Exact, 1), std::length_error);
}

TEST(PauliExpansion, SingleQubitExample) {
    SnapshotRecord rec{Ensemble::Pauli, "Z", {}, 0};
    auto terms = pauli_snapshot_expansion(rec, 1);
    ASSERT_EQ(terms.size(), 3u);
    Matrix sum = Matrix::Zero(2, 2);
    for (const auto &t : terms) {
        auto v = dense_state(CanonicalStabilizer(t.state));
        sum += t.sign * t.weight * v * v.adjoint();
    }
    Matrix want = Matrix::Zero(2, 2);
    want(0, 0) = 2;
    want(1, 1) = -1;
    EXPECT_LT((sum - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PauliExpansion, ReconstructsInverseMap) {
    Rng rng(12);
    for (std::size_t n = 1; n <= 4; n++) {
        auto data = acquire_shadows([n](Rng &r) { return StabilizerState::from_circuit(random_clifford(n, r)); }, n,
                                    Ensemble::Pauli, 10, rng);
        for (const auto &rec : data.records) {
            auto terms = pauli_snapshot_expansion(rec, n);
            EXPECT_EQ(terms.size(), std::size_t(std::pow(3, n)));
            const auto dim = Eigen::Index(1) << n;
            Matrix sum = Matrix::Zero(dim, dim);
            for (const auto &t : terms) {
                EXPECT_EQ(t.weight, std::pow(3.0, std::round(std::log(t.weight) / std::log(3.0))));
                auto v = oracle::to_vec(to_dense(t.state));
                sum += t.sign * t.weight * v * v.adjoint();
            }
            EXPECT_LT((sum - oracle::inverse_map(rec, n)).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
    EXPECT_EQ(pauli_snapshot_expansion(SnapshotRecord{Ensemble::Pauli, "XYZXY", {}, 3}, 5).size(), 243u);
    EXPECT_THROW(pauli_snapshot_expansion(SnapshotRecord{Ensemble::Pauli, "ZZZZZZZZZ", {}, 0}, 9), std::length_error);
}

TEST(Loss, EmpiricalCrossEntropyOfUniformModel) {
    // All-zero parameters give uniform conditionals and zero phases.
    NqsModel m(config(4, 0));
    std::vector<double> p(m.num_params(), 0.0);
    ShadowDataset data{4, Ensemble::Pauli, 0, {}};
    Rng rng(13);
    for (int i = 0; i < 20; i++) data.records.push_back({Ensemble::Pauli, "ZZZZ", {}, rng() & 15});
    auto set = prepare_training_set(data, LossKind::EmpiricalCE);
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto lg = loss_and_grad(m, p, set, idx, SamplerKind::Exact, 1, rng);
    EXPECT_NEAR(lg.loss, 4 * std::log(2.0), 1e-12);
}

TEST(Loss, ShadowCrossEntropyOfSingleSnapshotIsEmpirical) {
    Rng rng(14);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng);
    auto data = ghz_dataset(3, Ensemble::Clifford, 1, rng);
    auto sce = prepare_training_set(data, LossKind::ShadowCE);
    auto ece = prepare_training_set(data, LossKind::EmpiricalCE);
    ASSERT_EQ(sce.size(), 1u);
    EXPECT_DOUBLE_EQ(sce.weights[0], 1.0);
    auto a = full_batch_loss(m, p, sce, SamplerKind::Exact, 1, rng);
    auto b = full_batch_loss(m, p, ece, SamplerKind::Exact, 1, rng);
    EXPECT_DOUBLE_EQ(a.loss, b.loss);
    EXPECT_EQ(a.grad, b.grad);
}

TEST(Loss, CompatibilityChecks) {
    Rng rng(15);
    auto pauli = ghz_dataset(2, Ensemble::Pauli, 5, rng);
    auto cliff = ghz_dataset(2, Ensemble::Clifford, 5, rng);
    EXPECT_THROW(prepare_training_set(pauli, LossKind::InfClifford), std::invalid_argument);
    EXPECT_THROW(prepare_training_set(cliff, LossKind::InfPauli), std::invalid_argument);
    EXPECT_NO_THROW(prepare_training_set(pauli, LossKind::ShadowCE));
    EXPECT_NO_THROW(prepare_training_set(cliff, LossKind::EmpiricalCE));
}

TEST(Loss, VanishingProbabilityIsClamped) {
    NqsModel m(config(3, 0));
    auto p = m.init();
    const auto &b = m.layout().at("prob_head.bias");
    p[b.offset] = -40;
    p[b.offset + 1] = 40;
    ShadowDataset data{3, Ensemble::Pauli, 0, {{Ensemble::Pauli, "ZZZ", {}, 0}}};
    auto set = prepare_training_set(data, LossKind::EmpiricalCE);
    Rng rng(16);
    std::vector<std::size_t> idx{0};
    auto lg = loss_and_grad(m, p, set, idx, SamplerKind::Exact, 1, rng);
    EXPECT_EQ(lg.clamped, 1u);
    EXPECT_NEAR(lg.loss, -std::log(kMinProbability), 1e-9);
    for (double g : lg.grad) EXPECT_EQ(g, 0.0);
}

struct LossCase {
    LossKind loss;
    Ensemble ensemble;
    std::size_t n, anc;
};

class LossGradient : public ::testing::TestWithParam<LossCase> {};

TEST_P(LossGradient, MatchesFiniteDifferencesUnderExactSampler) {
    const auto c = GetParam();
    Rng rng(17 + int(c.loss) + 10 * c.anc);
    NqsModel m(config(c.n, c.anc, 3));
    auto target = [&](Rng &r) { return StabilizerState::from_circuit(random_clifford(c.n, r)); };
    auto data = acquire_shadows(target, c.n, c.ensemble, 6, rng);
    auto set = prepare_training_set(data, c.loss);
    std::vector<std::size_t> idx{0, 1, set.size() - 1, 1};
    for (int rep = 0; rep < 2; rep++) {
        auto p = perturbed(m, rng, 0.4);
        auto lg = loss_and_grad(m, p, set, idx, SamplerKind::Exact, 1, rng);
        const double h = 1e-5;
        for (int k = 0; k < 30; k++) {
            const std::size_t i = rng() % p.size();
            auto plus = p, minus = p;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (loss_and_grad(m, plus, set, idx, SamplerKind::Exact, 1, rng, false).loss -
                               loss_and_grad(m, minus, set, idx, SamplerKind::Exact, 1, rng, false).loss) /
                              (2 * h);
            EXPECT_TRUE(close_rel(lg.grad[i], fd, 1e-4, 1e-8)) << loss_name(c.loss) << " param " << i << ": "
                                                               << lg.grad[i] << " vs " << fd;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(
    AllLosses, LossGradient,
    ::testing::Values(LossCase{LossKind::InfClifford, Ensemble::Clifford, 3, 0},
                      LossCase{LossKind::InfPauli, Ensemble::Pauli, 3, 0},
                      LossCase{LossKind::EmpiricalCE, Ensemble::Clifford, 3, 0},
                      LossCase{LossKind::ShadowCE, Ensemble::Pauli, 3, 0},
                      LossCase{LossKind::InfClifford, Ensemble::Clifford, 2, 2},
                      LossCase{LossKind::InfPauli, Ensemble::Pauli, 2, 1},
                      LossCase{LossKind::EmpiricalCE, Ensemble::Pauli, 2, 2},
                      LossCase{LossKind::ShadowCE, Ensemble::Clifford, 3, 2}));

TEST(Loss, GaugePhaseDoesNotMatter) {
    // X Z X Z = -I: the same state prepared with a flipped global sign.
    Rng rng(18);
    NqsModel m(config(3, 0));
    auto p = perturbed(m, rng);
    auto circuit = random_clifford(3, rng);
    auto flipped = circuit;
    for (const char *g : {"X", "Z", "X", "Z"}) flipped.pauli(PauliOperator::from_string(std::string(g) + "II"));
    Rng r1(1), r2(1);
    auto a = overlap_grad(m, p, StabilizerState::from_circuit(circuit), SamplerKind::Stabilizer, 30, r1);
    auto b = overlap_grad(m, p, StabilizerState::from_circuit(flipped), SamplerKind::Stabilizer, 30, r2);
    EXPECT_EQ(std::norm(a.value), std::norm(b.value));
    EXPECT_EQ(a.grad_re, b.grad_re);
}

TEST(Estimators, StabilizerVarianceBelowNeuralOnTrainedGhz) {
    Rng rng(19);
    auto data = ghz_dataset(3, Ensemble::Clifford, 1000, rng);
    TrainConfig tc;
    tc.epochs = 3;
    tc.sampler = SamplerKind::Exact;
    tc.seed = 4;
    auto run = train(data, config(3, 0, 5), tc);
    NqsModel m(config(3, 0, 5));
    std::vector<double> ss, ns;
    for (std::size_t i = 0; i < 100; i++) {
        auto phi = snapshot_state(data.records[i], 3);
        ss.push_back(overlap_statistics(m, run.params, phi, SamplerKind::Stabilizer, 500, 30, rng).variance);
        ns.push_back(overlap_statistics(m, run.params, phi, SamplerKind::NeuralState, 500, 30, rng).variance);
    }
    std::nth_element(ss.begin(), ss.begin() + 50, ss.end());
    std::nth_element(ns.begin(), ns.begin() + 50, ns.end());
    EXPECT_LE(ss[50], ns[50]);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    AdamState st;
    std::vector<double> p{1.0, -2.0, 3.0};
    std::vector<double> g(3, 0.0);
    for (int i = 0; i < 5; i++) adam_step(st, p, g, 0.1);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(st.t, 5u);
}

TEST(Adam, FirstStepIsSignLike) {
    AdamState st;
    std::vector<double> p{0.0, 0.0, 0.0};
    std::vector<double> g{0.5, -3.0, 1e-3};
    adam_step(st, p, g, 0.01);
    for (std::size_t i = 0; i < 3; i++) EXPECT_NEAR(p[i], -0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
    std::vector<double> bad{0.0, std::nan(""), 0.0};
    EXPECT_THROW(adam_step(st, p, bad, 0.01), std::domain_error);
}

TEST(Schedule, CosineAnnealing) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 50, 0.01), 0.01);
    EXPECT_NEAR(cosine_lr(25, 50, 0.01), 0.005, 1e-15);
    double prev = 1;
    for (std::size_t e = 0; e < 100; e++) {
        const double lr = cosine_lr(e, 100, 0.01);
        EXPECT_LE(lr, prev);
        EXPECT_GT(lr, 0);
        prev = lr;
    }
    EXPECT_THROW(cosine_lr(50, 50, 0.01), std::out_of_range);
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
    Rng rng(20);
    auto data = ghz_dataset(3, Ensemble::Clifford, 50, rng);
    TrainConfig tc;
    tc.epochs = 0;
    auto run = train(data, config(3, 0, 9), tc);
    EXPECT_TRUE(run.epochs.empty());
    EXPECT_EQ(run.params, NqsModel(config(3, 0, 9)).init());
}

TEST(Train, DeterministicAndLearnsGhz) {
    Rng rng(21);
    auto data = ghz_dataset(3, Ensemble::Clifford, 400, rng);
    TrainConfig tc;
    tc.epochs = 25;
    tc.minibatch = 50;
    tc.mc_samples = 100;
    tc.seed = 11;
    const auto truth = DenseOperator::projector(3, dense_state(CanonicalStabilizer(StabilizerState::from_circuit(ghz_circuit(3)))));
    auto a = train(data, config(3, 0, 2), tc, truth);
    auto b = train(data, config(3, 0, 2), tc, truth);
    EXPECT_EQ(a.params, b.params);
    ASSERT_EQ(a.epochs.size(), 25u);
    for (std::size_t e = 0; e < 25; e++) {
        EXPECT_EQ(a.epochs[e].loss, b.epochs[e].loss);
        EXPECT_EQ(a.epochs[e].infidelity, b.epochs[e].infidelity);
    }
    EXPECT_LT(a.epochs.back().infidelity, 0.1);
    EXPECT_LT(a.epochs.back().infidelity, a.epochs.front().infidelity);
    EXPECT_EQ(a.stop_reason, "completed");
    std::ostringstream csv;
    write_train_csv(csv, a);
    EXPECT_EQ(csv.str().substr(0, 48), "epoch,lr,loss,validation_loss,infidelity,seconds");
}

TEST(Train, EarlyStoppingRestoresBestParameters) {
    Rng rng(22);
    auto data = ghz_dataset(2, Ensemble::Pauli, 60, rng);
    TrainConfig tc;
    tc.epochs = 200;
    tc.minibatch = 10;
    tc.initial_lr = 0.05;
    tc.validation = 20;
    tc.patience = 3;
    tc.sampler = SamplerKind::Exact;
    tc.seed = 3;
    auto run = train(data, config(2, 1, 4), tc);
    ASSERT_EQ(run.stop_reason, "early-stop");
    ASSERT_LT(run.epochs.size(), 200u);
    std::size_t best = 0;
    for (std::size_t e = 0; e < run.epochs.size(); e++) {
        if (run.epochs[e].validation_loss < run.epochs[best].validation_loss) best = e;
    }
    EXPECT_EQ(run.epochs.size() - 1 - best, 3u);
    // The returned parameters reproduce the best validation loss.
    auto val = prepare_training_set(data.slice(40, 60), LossKind::ShadowCE);
    NqsModel m(config(2, 1, 4));
    EXPECT_NEAR(full_batch_loss(m, run.params, val, SamplerKind::Exact, 1, rng, false).loss,
                run.epochs[best].validation_loss, 1e-12);
    EXPECT_NE(run.params, run.last_params);
}
