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

#include <cmath>
#include <numbers>
#include <sstream>

#include "nqst/evaluation.hpp"
#include "oracle/dense_sim.hpp"
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

std::vector<double> random_params(const NqsModel &m, Rng &rng, double scale = 0.5) {
    std::normal_distribution<double> g(0.0, scale);
    auto p = m.init();
    for (auto &v : p) v += g(rng);
    return p;
}

oracle::Vec ghz_vector(std::size_t n) {
    oracle::Vec v = oracle::Vec::Zero(Eigen::Index(1) << n);
    v(0) = v(v.size() - 1) = 1.0 / std::sqrt(2.0);
    return v;
}

DenseOperator random_density(std::size_t n, Rng &rng) {
    const auto dim = Eigen::Index(1) << n;
    std::normal_distribution<double> g;
    Matrix a(dim, dim);
    for (Eigen::Index i = 0; i < a.size(); i++) a(i) = Complex(g(rng), g(rng));
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    return DenseOperator(n, rho);
}

}  // namespace

// ---- exact noisy GHZ ----

TEST(NoisyGhz, TwoQubitsMatchHandComposition) {
    // One CNOT on |+0> gives the Bell state; the channel then mixes in I/4 with weight 16p/15.
    for (double p : {0.0, 0.1, 0.5, 15.0 / 16.0}) {
        const auto truth = exact_noisy_ghz(2, p);
        const double lam = 16.0 * p / 15.0;
        Matrix expected = Matrix::Zero(4, 4);
        expected(0, 0) = expected(3, 3) = (1 - lam) * 0.5 + lam * 0.25;
        expected(1, 1) = expected(2, 2) = lam * 0.25;
        expected(0, 3) = expected(3, 0) = (1 - lam) * 0.5;
        EXPECT_LT((truth.rho.m - expected).cwiseAbs().maxCoeff(), 1e-12) << "p=" << p;
    }
}

TEST(NoisyGhz, MatchesPauliSumChannelOracle) {
    const std::size_t n = 4;
    const double p = 0.3;
    oracle::Mat rho = oracle::zero_state(n) * oracle::zero_state(n).adjoint();
    oracle::Mat h = oracle::embed(n, 0, oracle::single_qubit('H'));
    rho = h * rho * h.adjoint();
    for (std::size_t q = 0; q + 1 < n; q++) {
        oracle::Mat c = oracle::cnot_matrix(n, q, q + 1);
        rho = oracle::depolarize_pair(c * rho * c.adjoint(), n, q, q + 1, p);
    }
    EXPECT_LT((exact_noisy_ghz(n, p).rho.m - rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NoisyGhz, NoiselessIsGhzProjector) {
    const auto truth = exact_noisy_ghz(5, 0.0);
    const oracle::Vec g = ghz_vector(5);
    EXPECT_LT((truth.rho.m - g * g.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(purity(truth.rho), 1.0, 1e-12);
}

TEST(NoisyGhz, PurityDecreasesWithNoiseAndStaysPhysical) {
    double previous = 2.0;
    for (int k = 0; k <= 5; k++) {
        const auto truth = exact_noisy_ghz(6, 0.1 * k);
        EXPECT_NEAR(truth.rho.trace().real(), 1.0, 1e-12);
        EXPECT_LT(truth.rho.hermiticity_error(), 1e-14);
        EXPECT_GT(truth.rho.eigenvalues().minCoeff(), -1e-12);
        const double pur = purity(truth.rho);
        EXPECT_LT(pur, previous);
        previous = pur;
    }
}

TEST(NoisyGhz, AgreesWithSampledTrajectories) {
    const std::size_t n = 3;
    const double p = 0.4;
    Rng rng(5);
    Matrix avg = Matrix::Zero(8, 8);
    const int trials = 20000;
    for (int t = 0; t < trials; t++) {
        const Vector v = dense_state(CanonicalStabilizer(prepare_noisy_ghz(n, p, rng)));
        avg += v * v.adjoint();
    }
    avg /= double(trials);
    EXPECT_LT((avg - exact_noisy_ghz(n, p).rho.m).cwiseAbs().maxCoeff(), 0.02);
}

TEST(NoisyGhz, Guards) {
    EXPECT_THROW(exact_noisy_ghz(11, 0.1), std::length_error);
    EXPECT_THROW(exact_noisy_ghz(3, -0.1), std::invalid_argument);
    EXPECT_THROW(exact_noisy_ghz(3, 0.95), std::invalid_argument);
}

// ---- metrics ----

TEST(Metrics, FidelityClosedForms) {
    const std::size_t n = 3;
    const Vector g = ghz_vector(n);
    EXPECT_NEAR(fidelity_pure(g, DenseOperator::projector(n, g)), 1.0, 1e-12);
    EXPECT_NEAR(fidelity_pure(g, DenseOperator::maximally_mixed(n)), 1.0 / 8, 1e-12);
    DenseOperator doubled = DenseOperator::projector(n, g);
    doubled.m *= 2.0;
    EXPECT_THROW(fidelity_pure(g, doubled), std::domain_error);
    EXPECT_THROW(fidelity_pure(ghz_vector(2), doubled), std::invalid_argument);
}

TEST(Metrics, TraceDistanceClosedForms) {
    Vector zero = Vector::Zero(2), one = Vector::Zero(2);
    zero(0) = 1;
    one(1) = 1;
    EXPECT_NEAR(trace_distance(DenseOperator::projector(1, zero), DenseOperator::projector(1, one)), 1.0, 1e-12);
    const DenseOperator bell = DenseOperator::projector(2, ghz_vector(2));
    EXPECT_NEAR(trace_distance(bell, bell), 0.0, 1e-12);
    EXPECT_NEAR(trace_distance(bell, DenseOperator::maximally_mixed(2)), 0.75, 1e-12);
    DenseOperator skew = bell;
    skew.m(0, 1) = 0.3;
    EXPECT_THROW(trace_distance(skew, bell), std::invalid_argument);
}

TEST(Metrics, TraceDistanceIsSymmetric) {
    Rng rng(8);
    for (int t = 0; t < 20; t++) {
        const auto a = random_density(3, rng), b = random_density(3, rng);
        const double ab = trace_distance(a, b);
        EXPECT_NEAR(ab, trace_distance(b, a), 1e-12);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0 + 1e-12);
    }
}

TEST(Metrics, PurityClosedForms) {
    EXPECT_NEAR(purity(DenseOperator::maximally_mixed(4)), 1.0 / 16, 1e-14);
    EXPECT_NEAR(purity(DenseOperator::projector(3, ghz_vector(3))), 1.0, 1e-12);
    // Unphysical input is not clamped.
    DenseOperator big = DenseOperator::identity(1);
    EXPECT_NEAR(purity(big), 2.0, 1e-14);
}

TEST(ShadowPurity, MatchesPairwiseDefinition) {
    Rng rng(3);
    for (Ensemble e : {Ensemble::Pauli, Ensemble::Clifford}) {
        const auto target = prepare_noisy_ghz(2, 0.0, rng);
        const auto data = acquire_shadows([&](Rng &) { return target; }, 2, e, 12, rng);
        std::vector<oracle::Mat> snaps;
        for (const auto &r : data.records) snaps.push_back(oracle::inverse_map(r, 2));
        double sum = 0;
        for (std::size_t i = 0; i < snaps.size(); i++) {
            for (std::size_t j = 0; j < snaps.size(); j++) {
                if (i != j) sum += (snaps[i] * snaps[j]).trace().real();
            }
        }
        const double expected = sum / double(snaps.size() * (snaps.size() - 1));
        EXPECT_NEAR(shadow_purity(data), expected, 1e-9) << ensemble_name(e);
    }
}

TEST(ShadowPurity, UnbiasedAndCanBeNegative) {
    const std::size_t n = 2;
    const double p = 0.5;
    const double exact = purity(exact_noisy_ghz(n, p).rho);
    Rng rng(11);
    std::vector<double> estimates;
    bool negative = false;
    for (int t = 0; t < 2000; t++) {
        auto data = acquire_shadows([&](Rng &r) { return prepare_noisy_ghz(n, p, r); }, n, Ensemble::Pauli, 10, rng);
        estimates.push_back(shadow_purity(data));
        negative = negative || estimates.back() < 0;
    }
    const MeanEstimate m = summarize(estimates);
    EXPECT_NEAR(m.mean, exact, 3.5 * m.std_error);
    EXPECT_TRUE(negative);
}

TEST(SwapPurity, PureModelIsExactlyOne) {
    NqsModel model(config(3, 0));
    Rng rng(1);
    const MeanEstimate m = purity_swap_mc(model, model.init(), 10, rng);
    EXPECT_EQ(m.mean, 1.0);
    EXPECT_EQ(m.std_error, 0.0);
}

TEST(SwapPurity, ConsistentWithDensePurity) {
    Rng rng(21);
    int within = 0;
    for (int t = 0; t < 20; t++) {
        NqsModel model(config(3, 2, std::uint64_t(t)));
        const auto params = random_params(model, rng, 0.3);
        const double dense = purity(density_matrix(model, params));
        const MeanEstimate est = purity_swap_mc(model, params, 2000, rng);
        within += std::abs(est.mean - dense) <= 3 * est.std_error + 1e-9;
    }
    // Each check holds with probability ~0.997; allow one miss across 20 models.
    EXPECT_GE(within, 19);
}

TEST(KlDivergence, ClosedForms) {
    Rng rng(2);
    WeightedStabilizerSet p;
    p.n = 2;
    p.states = {CanonicalStabilizer(StabilizerState::basis_state(2, 0)), CanonicalStabilizer(StabilizerState::basis_state(2, 1))};
    p.weights = {1.0, 0.0};
    WeightedStabilizerSet q = p;
    q.weights = {0.5, 0.5};
    EXPECT_NEAR(kl_divergence(p, q), std::numbers::ln2, 1e-14);
    EXPECT_EQ(kl_divergence(q, q), 0.0);
    // Same states listed in a different order still match.
    WeightedStabilizerSet r = q;
    std::swap(r.states[0], r.states[1]);
    r.weights = {0.25, 0.75};
    q.weights = {0.75, 0.25};
    EXPECT_NEAR(kl_divergence(q, r), 0.0, 1e-15);
    WeightedStabilizerSet other;
    other.n = 2;
    other.states = {CanonicalStabilizer(StabilizerState::basis_state(2, 3))};
    other.weights = {1.0};
    EXPECT_THROW(kl_divergence(p, other), std::invalid_argument);
}

TEST(KlDivergence, NonNegativeOnRandomPairs) {
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int t = 0; t < 50; t++) {
        WeightedStabilizerSet a, b;
        a.n = b.n = 3;
        double sa = 0, sb = 0;
        for (PackedBits s = 0; s < 8; s++) {
            a.states.emplace_back(StabilizerState::basis_state(3, s));
            a.weights.push_back(u(rng));
            sa += a.weights.back();
            b.weights.push_back(u(rng));
            sb += b.weights.back();
        }
        b.states = a.states;
        for (auto &w : a.weights) w /= sa;
        for (auto &w : b.weights) w /= sb;
        EXPECT_GE(kl_divergence(a, b), 0.0);
    }
}

// ---- studies ----

TEST(StudyKl, ShadowWeightsCloserAtThreeQubits) {
    KlStudyConfig cfg;
    cfg.qubits = {3};
    cfg.shadow_counts = {1000};
    cfg.instances = 8;
    cfg.seed = 4;
    const StudyReport rep = study_kl(cfg);
    for (const char *e : {"pauli", "clifford"}) {
        const auto emp = rep.row(std::string(e) + "-emp-n3", 1000);
        const auto sh = rep.row(std::string(e) + "-sh-n3", 1000);
        EXPECT_LT(sh.mean, emp.mean) << e;
        EXPECT_EQ(sh.count, 8u);
    }
    for (const auto &r : rep.rows) EXPECT_GE(r.mean, 0.0);
    std::ostringstream a, b;
    write_report_csv(a, rep);
    write_report_csv(b, study_kl(cfg));
    EXPECT_EQ(a.str(), b.str());
}

TEST(StudyKl, IndependentOfWorkerCount) {
    KlStudyConfig cfg;
    cfg.qubits = {2};
    cfg.shadow_counts = {100};
    cfg.ensembles = {Ensemble::Clifford};
    cfg.instances = 6;
    cfg.seed = 9;
    setenv("NQST_WORKERS", "1", 1);
    std::ostringstream a, b;
    write_report_csv(a, study_kl(cfg));
    setenv("NQST_WORKERS", "3", 1);
    write_report_csv(b, study_kl(cfg));
    unsetenv("NQST_WORKERS");
    EXPECT_EQ(a.str(), b.str());
}

TEST(StudyGradientAngle, ExactEstimatorHasZeroAngle) {
    Rng rng(6);
    const auto data = acquire_shadows([](Rng &) { return StabilizerState::from_circuit(ghz_circuit(2)); }, 2,
                                      Ensemble::Clifford, 200, rng);
    AngleStudyConfig cfg;
    cfg.epochs = 3;
    cfg.minibatch = 50;
    cfg.mc_samples = 100;
    cfg.seed = 2;
    const StudyReport rep = study_gradient_angle(data, config(2, 0), cfg);
    EXPECT_EQ(rep.rows.size(), 3u * 6u);
    for (const auto &r : rep.series("exact-minibatch")) EXPECT_LT(r.mean, 1e-6);
    for (const auto &r : rep.series("exact-full")) EXPECT_LT(r.mean, 1e-6);
    for (const auto &r : rep.series("ns-minibatch")) {
        EXPECT_GT(r.mean, 0.0);
        EXPECT_LE(r.mean, std::numbers::pi);
    }
    EXPECT_THROW(study_gradient_angle(data, config(2, 1), cfg), std::invalid_argument);
}

TEST(StudyGradientAngle, AngleHelper) {
    const std::vector<double> a{1, 0}, b{0, 2}, z{0, 0};
    EXPECT_NEAR(gradient_angle(a, b), std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(gradient_angle(a, a), 0.0, 1e-15);
    EXPECT_TRUE(std::isnan(gradient_angle(a, z)));
}

TEST(StudyPauli, IdentityHasNoErrorAndWeightsArePopulated) {
    const auto truth = exact_noisy_ghz(3, 0.2);
    Rng rng(12);
    const auto data = acquire_shadows([](Rng &r) { return prepare_noisy_ghz(3, 0.2, r); }, 3, Ensemble::Pauli, 500, rng);
    NqsModel model(config(3, 3));
    PauliStudyConfig cfg;
    cfg.strings = 400;
    cfg.seed = 1;
    const StudyReport rep = study_pauli_prediction(truth, data, model, model.init(), cfg);
    for (const char *e : {"raw", "projected", "nqs"}) {
        EXPECT_LT(rep.row(e, 0).mean, 1e-12) << e;
        for (int w = 1; w <= 3; w++) EXPECT_GT(rep.row(e, w).count, 0u);
    }
    cfg.include_identity = false;
    const StudyReport full = study_pauli_prediction(truth, data, model, model.init(), cfg);
    EXPECT_EQ(full.series("raw").size(), 1u);
    EXPECT_EQ(full.series("raw").front().x, 3.0);
}

TEST(StudyPauli, ErrorsMatchDirectComputation) {
    const auto truth = exact_noisy_ghz(2, 0.0);
    Rng rng(13);
    const auto data = acquire_shadows([](Rng &) { return StabilizerState::from_circuit(ghz_circuit(2)); }, 2,
                                      Ensemble::Pauli, 300, rng);
    NqsModel model(config(2, 1));
    PauliStudyConfig cfg;
    cfg.strings = 1;
    cfg.include_identity = false;
    cfg.seed = 77;
    Rng replay(cfg.seed);
    const PauliOperator p = random_pauli_strings(2, 1, false, replay).front();
    const StudyReport rep = study_pauli_prediction(truth, data, model, model.init(), cfg);
    const double exact = oracle::pauli_matrix(p.letters()).cwiseProduct(truth.rho.m.transpose()).sum().real();
    EXPECT_NEAR(rep.row("raw", 2).mean, std::abs(estimate_pauli(data, p) - exact), 1e-12);
    const double nqs = pauli_trace(density_matrix(model, model.init()), p).real();
    EXPECT_NEAR(rep.row("nqs", 2).mean, std::abs(nqs - exact), 1e-12);
}

TEST(Reports, CsvLayout) {
    StudyReport rep;
    rep.study = "demo";
    rep.note("seed", "3");
    rep.rows.push_back(summarize_row("a", 1, {1.0, 3.0}));
    std::ostringstream out;
    write_report_csv(out, rep);
    EXPECT_EQ(out.str(), "# study=demo\n# x=x\n# y=value\n# seed=3\nseries,x,mean,std,count\na,1,2,1.4142135623730951,2\n");
    std::ostringstream dm;
    write_density_csv(dm, DenseOperator::maximally_mixed(1));
    EXPECT_EQ(dm.str(), "row,col,re,im\n0,0,0.5,0\n0,1,0,0\n1,0,0,0\n1,1,0.5,0\n");
}

TEST(Reports, SummarizeSkipsMissing) {
    const StudyRow r = summarize_row("s", 0, {1.0, std::nan(""), 3.0});
    EXPECT_EQ(r.count, 2u);
    EXPECT_DOUBLE_EQ(r.mean, 2.0);
    EXPECT_TRUE(std::isnan(summarize_row("s", 0, {std::nan("")}).mean));
}

TEST(Parallel, SeedsAreStableAndDistinct) {
    EXPECT_EQ(derive_seed(1, "trial", 0), derive_seed(1, "trial", 0));
    EXPECT_NE(derive_seed(1, "trial", 0), derive_seed(1, "trial", 1));
    EXPECT_NE(derive_seed(1, "trial", 0), derive_seed(1, "instance", 0));
    EXPECT_NE(derive_seed(1, "trial", 0), derive_seed(2, "trial", 0));
}

TEST(Parallel, RethrowsWorkerErrors) {
    std::vector<int> seen(50, 0);
    parallel_for(50, [&](std::size_t i) { seen[i]++; }, 4);
    for (int v : seen) EXPECT_EQ(v, 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 7) throw std::runtime_error("boom"); }, 3),
                 std::runtime_error);
}
