#include "fabr/errors.hpp"
#include "fabr/full_solver.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>

using namespace fabr;

namespace {

FeaturePlan plan_for(Index p, Index p1, Index d, Activation a = Activation::relu, std::uint64_t seed = 5) {
    FeaturePlan plan;
    plan.master_seed = seed;
    plan.total_features = p;
    plan.block_width = p1;
    plan.activation = a;
    plan.input_dim = d;
    return plan;
}

LabeledDataset random_dataset(std::mt19937_64& gen, Index n, Index d, int k) {
    LabeledDataset ds;
    ds.features = oracle::random_matrix(gen, n, d);
    ds.labels = oracle::random_labels(gen, n, k);
    ds.num_classes = k;
    return ds;
}

/// Scores from the primal route: S_test beta(z) + label means.
Matrix primal_scores(const LabeledDataset& train, const Matrix& test, const FeaturePlan& plan, double z, bool demean) {
    const Matrix s = generate_all(train.features, plan);
    const Matrix st = generate_all(test, plan);
    const auto enc = one_hot_encode(train.labels, train.num_classes, demean);
    Matrix out = st * oracle::primal_beta(s, enc.matrix, z);
    for (Index c = 0; c < out.cols(); ++c) out.col(c).array() += enc.column_means[static_cast<std::size_t>(c)];
    return out;
}

} // namespace

TEST_SUITE("full_solver") {

TEST_CASE("one block with identity activation: Psi is S S^T") {
    std::mt19937_64 gen(1);
    const auto ds = random_dataset(gen, 9, 4, 2);
    const auto plan = plan_for(6, 6, 4, Activation::identity);
    const auto f = fit(ds, plan, RidgeGrid({1.0}), {});
    const Matrix s = generate_all(ds.features, plan);
    CHECK((f.gram.psi - s * s.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (s * s.transpose()).norm());
    CHECK(f.gram.blocks_folded == 1);
}

TEST_CASE("two blocks: Psi equals the one-shot Gram") {
    std::mt19937_64 gen(2);
    const auto ds = random_dataset(gen, 11, 3, 2);
    const auto plan = plan_for(10, 5, 3);
    const auto f = fit(ds, plan, RidgeGrid({1.0}), {});
    const Matrix s = generate_all(ds.features, plan);
    const Matrix g = s * s.transpose();
    CHECK((f.gram.psi - g).norm() <= 1e-12 * g.norm());
    CHECK(f.gram.psi == f.gram.psi.transpose());
}

TEST_CASE("block order changes Psi only at roundoff") {
    std::mt19937_64 gen(3);
    const auto ds = random_dataset(gen, 15, 4, 2);
    const auto plan = plan_for(20, 4, 4);
    const auto f = fit(ds, plan, RidgeGrid({1.0}), {});
    Matrix reversed = Matrix::Zero(15, 15);
    for (Index b = block_count(plan) - 1; b >= 0; --b) reversed += block_gram(generate_block(ds.features, plan, b));
    CHECK((reversed - f.gram.psi).norm() <= 1e-10 * f.gram.psi.norm());
}

TEST_CASE("checkpoint Q equals a fresh fit on the prefix") {
    std::mt19937_64 gen(4);
    const auto ds = random_dataset(gen, 12, 3, 3);
    const auto plan = plan_for(8, 4, 3);
    const RidgeGrid grid({0.1, 1.0});
    FitOptions opt;
    opt.checkpoints = {1, 2};
    const auto f = fit(ds, plan, grid, opt);
    REQUIRE(f.model.checkpoints.size() == 2);
    const auto fresh = fit(ds, plan_for(4, 4, 3), grid, {});
    for (std::size_t zi = 0; zi < grid.size(); ++zi) {
        CHECK(f.model.checkpoints[0].q[zi] == fresh.model.final_solution.q[zi]);
        CHECK(f.model.checkpoints[1].q[zi] == f.model.final_solution.q[zi]);
    }
    CHECK(f.model.checkpoints[0].checkpoint == 1);
}

TEST_CASE("predictions match the primal oracle (N=16, P=8, K=2)") {
    std::mt19937_64 gen(5);
    const auto train = random_dataset(gen, 16, 3, 2);
    const Matrix test = oracle::random_matrix(gen, 7, 3);
    const auto plan = plan_for(8, 3, 3);
    const RidgeGrid grid({0.01, 1.0, 100.0});
    const auto pred = predict(fit(train, plan, grid, {}), test);
    REQUIRE(pred.entries.size() == 3);
    for (std::size_t zi = 0; zi < 3; ++zi) {
        const Matrix want = primal_scores(train, test, plan, grid[zi], true);
        CHECK(oracle::rel_err(pred.entries[zi].scores, want) <= 1e-9);
        CHECK(pred.entries[zi].classes == classify(want, std::vector<double>(2, 0.0)));
    }
}

TEST_CASE("exact mode is exact when N > P, annihilation is not") {
    std::mt19937_64 gen(6);
    const auto train = random_dataset(gen, 30, 3, 2);
    const auto plan = plan_for(6, 3, 3);
    const RidgeGrid grid({0.5});
    const auto want = primal_scores(train, train.features, plan, 0.5, true);
    const auto exact = predict(fit(train, plan, grid, {}), train.features);
    CHECK(oracle::rel_err(exact.entries[0].scores, want) <= 1e-9);
    FitOptions ann;
    ann.mode = SpectrumMode::annihilate;
    // Sum of S^T over the complement vanishes, so predictions still agree.
    const auto a = predict(fit(train, plan, grid, ann), train.features);
    CHECK(oracle::rel_err(a.entries[0].scores, want) <= 1e-9);
}

TEST_CASE("huge shrinkage returns the label means") {
    std::mt19937_64 gen(7);
    const auto train = random_dataset(gen, 20, 3, 3);
    const auto plan = plan_for(10, 5, 3);
    const auto f0 = fit(train, plan, RidgeGrid({1.0}), {});
    const EigPairs e = psd_eig(f0.gram.psi / 20.0);
    const double z = 1e6 * e.values(0);
    const auto pred = predict(fit(train, plan, RidgeGrid({z}), {}), train.features);
    const auto means = one_hot_encode(train.labels, 3, true).column_means;
    for (Index i = 0; i < 20; ++i)
        for (Index c = 0; c < 3; ++c)
            CHECK(std::abs(pred.entries[0].scores(i, c) - means[static_cast<std::size_t>(c)]) <= 1e-3);
}

TEST_CASE("empty test set gives an empty prediction set") {
    std::mt19937_64 gen(8);
    const auto train = random_dataset(gen, 10, 2, 2);
    const auto f = fit(train, plan_for(4, 2, 2), RidgeGrid({1.0}), {});
    CHECK(predict(f, Matrix(0, 2)).entries.empty());
    CHECK(predict(f, Matrix(0, 2), PredictMode::all_checkpoints).entries.empty());
}

TEST_CASE("plan mismatch on the test columns") {
    std::mt19937_64 gen(9);
    const auto train = random_dataset(gen, 10, 2, 2);
    const auto f = fit(train, plan_for(4, 2, 2), RidgeGrid({1.0}), {});
    CHECK_THROWS_AS(predict(f, Matrix::Zero(3, 5)), DomainError);
}

TEST_CASE("fit_predict_scores is fit followed by predict") {
    std::mt19937_64 gen(10);
    const auto train = random_dataset(gen, 14, 3, 2);
    const Matrix test = oracle::random_matrix(gen, 5, 3);
    const auto plan = plan_for(9, 4, 3);
    const RidgeGrid grid({0.1, 10.0});
    const auto a = fit_predict_scores(train, test, plan, grid, {});
    const auto b = predict(fit(train, plan, grid, {}), test);
    const auto c = fit_predict_scores(train, test, plan, grid, {});
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].scores == b.entries[i].scores);
        CHECK(a.entries[i].scores == c.entries[i].scores);
    }
}

TEST_CASE("checkpoint predictions via the cross-Gram equal prefix fits") {
    std::mt19937_64 gen(11);
    const auto train = random_dataset(gen, 20, 4, 3);
    const Matrix test = oracle::random_matrix(gen, 6, 4);
    const auto plan = plan_for(15, 4, 4);
    const RidgeGrid grid({0.05, 2.0});
    FitOptions opt;
    opt.checkpoints = {1, 2, 3};
    const auto f = fit(train, plan, grid, opt);
    const auto all = predict(f, test, PredictMode::all_checkpoints);
    CHECK(all.entries.size() == 4 * grid.size());
    for (Index cp : {1, 2, 3, 4}) {
        const auto prefix = plan_for(features_in_prefix(plan, cp), 4, 4);
        const auto fresh = predict(fit(train, prefix, grid, {}), test);
        for (std::size_t zi = 0; zi < grid.size(); ++zi) {
            const auto* e = all.find(cp, zi);
            REQUIRE(e != nullptr);
            CHECK(oracle::rel_err(e->scores, fresh.entries[zi].scores) <= 1e-10);
            CHECK(e->complexity == doctest::Approx(static_cast<double>(features_in_prefix(plan, cp)) / 20.0));
        }
    }
}

TEST_CASE("stored beta predicts bitwise like its own product") {
    std::mt19937_64 gen(12);
    const auto train = random_dataset(gen, 12, 3, 2);
    const Matrix test = oracle::random_matrix(gen, 4, 3);
    auto f = fit(train, plan_for(8, 3, 3), RidgeGrid({0.3, 3.0}), {});
    const auto via_q = predict(f, test);
    materialize_beta(f.model);
    REQUIRE(f.model.beta.size() == 2);
    CHECK(f.model.beta[0].rows() == 8);
    const auto via_beta = predict(f, test);
    for (std::size_t i = 0; i < via_q.entries.size(); ++i) {
        CHECK(oracle::rel_err(via_beta.entries[i].scores, via_q.entries[i].scores) <= 1e-12);
    }
}

TEST_CASE("memory guard trips before allocating and suggests --nu") {
    std::mt19937_64 gen(13);
    const auto train = random_dataset(gen, 100, 2, 2);
    FitOptions opt;
    opt.memory_budget = 1000;
    try {
        (void)fit(train, plan_for(4, 2, 2), RidgeGrid({1.0}), opt);
        FAIL("expected MemoryBudgetError");
    } catch (const MemoryBudgetError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("--nu") != std::string::npos);
        CHECK(msg.find("100 x 100") != std::string::npos);
    }
}

TEST_CASE("memory budget from the environment") {
    ::setenv("FABR_MEM_BUDGET_BYTES", "12345", 1);
    CHECK(memory_budget_bytes() == 12345u);
    ::unsetenv("FABR_MEM_BUDGET_BYTES");
    CHECK(memory_budget_bytes() == 8ull << 30);
}

TEST_CASE("checkpoint normalization") {
    CHECK(normalize_checkpoints({3, 1, 3, 2}, 3) == std::vector<Index>{1, 2, 3});
    CHECK_THROWS_AS(normalize_checkpoints({0}, 3), DomainError);
    CHECK_THROWS_AS(normalize_checkpoints({4}, 3), DomainError);
}

TEST_CASE("dense dual scores match the primal oracle") {
    std::mt19937_64 gen(14);
    const Matrix s = oracle::random_matrix(gen, 25, 40);
    const Matrix y = oracle::random_matrix(gen, 25, 2);
    const Matrix st = oracle::random_matrix(gen, 6, 40);
    const RidgeGrid grid({0.1, 1.0, 10.0});
    const auto scores = dense_dual_scores(s, y, grid, st);
    for (std::size_t zi = 0; zi < grid.size(); ++zi) {
        CHECK(oracle::rel_err(scores[zi], st * oracle::primal_beta(s, y, grid[zi])) <= 1e-9);
    }
}

TEST_CASE("input validation") {
    std::mt19937_64 gen(15);
    auto train = random_dataset(gen, 10, 2, 2);
    CHECK_THROWS_AS(fit(train, plan_for(4, 2, 2), RidgeGrid(), {}), DomainError);
    CHECK_THROWS_AS(fit(train, plan_for(4, 2, 3), RidgeGrid({1.0}), {}), DomainError);
    train.labels[0] = 5;
    CHECK_THROWS_AS(fit(train, plan_for(4, 2, 2), RidgeGrid({1.0}), {}), DomainError);
}

}
