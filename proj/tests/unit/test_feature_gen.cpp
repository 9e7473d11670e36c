#include "fabr/errors.hpp"
#include "fabr/feature_gen.hpp"
#include "fabr/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>

using namespace fabr;

namespace {

FeaturePlan make_plan(Index p, Index p1, Index d, Activation a = Activation::relu, std::uint64_t seed = 3) {
    FeaturePlan plan;
    plan.master_seed = seed;
    plan.total_features = p;
    plan.block_width = p1;
    plan.activation = a;
    plan.input_dim = d;
    return plan;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            if (std::bit_cast<std::uint64_t>(a(i, j)) != std::bit_cast<std::uint64_t>(b(i, j))) return false;
    return true;
}

} // namespace

TEST_SUITE("feature_gen") {

TEST_CASE("block counts and widths") {
    CHECK(block_count(make_plan(10, 5, 1)) == 2);
    const auto ragged = make_plan(11, 5, 1);
    CHECK(block_count(ragged) == 3);
    CHECK(block_width(ragged, 0) == 5);
    CHECK(block_width(ragged, 2) == 1);
    CHECK(block_count(make_plan(7, 7, 1)) == 1);
    CHECK(features_in_prefix(ragged, 2) == 10);
    CHECK(features_in_prefix(ragged, 3) == 11);
    CHECK_THROWS_AS(block_width(ragged, 3), DomainError);
    CHECK_THROWS_AS(block_width(ragged, -1), DomainError);
}

TEST_CASE("plan validation") {
    CHECK_THROWS_AS(make_plan(4, 0, 1).validate(), DomainError);
    CHECK_THROWS_AS(make_plan(4, 5, 1).validate(), DomainError);
    CHECK_THROWS_AS(make_plan(4, 2, 0).validate(), DomainError);
    auto p = make_plan(4, 2, 1);
    p.weight_scale = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    CHECK(parse_activation("tanh") == Activation::tanh);
    CHECK(to_string(Activation::sign) == "sign");
    CHECK_THROWS_AS(parse_activation("gelu"), DomainError);
}

TEST_CASE("zero input row gives zero relu features") {
    const auto plan = make_plan(6, 3, 4);
    const Matrix x = Matrix::Zero(1, 4);
    for (Index k = 0; k < 2; ++k) CHECK(generate_block(x, plan, k).values.isZero(0.0));
}

TEST_CASE("identity activation is linear in the weights") {
    auto plan = make_plan(3, 3, 1, Activation::identity);
    Matrix x(1, 1);
    x(0, 0) = 2.0;
    const auto block = generate_block(x, plan, 0);
    const Matrix w = block_weights(plan, 0);
    for (Index j = 0; j < 3; ++j) CHECK(block.values(0, j) == 2.0 * w(j, 0));
}

TEST_CASE("weights follow the documented stream and scale") {
    auto plan = make_plan(4, 2, 3, Activation::identity, 99);
    plan.weight_scale = 0.5;
    const Matrix w = block_weights(plan, 1);
    const NormalStream ns(99, stream::id(stream::kFeatureWeights, 1));
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(w(i, j) == 0.5 * ns.at(static_cast<std::uint64_t>(i * 3 + j)));
}

TEST_CASE("regeneration is bitwise deterministic") {
    std::mt19937_64 gen(1);
    const Matrix x = oracle::random_matrix(gen, 9, 5);
    const auto plan = make_plan(12, 4, 5, Activation::tanh);
    for (Index k = 0; k < 3; ++k) {
        CHECK(bitwise_equal(generate_block(x, plan, k).values, generate_block(x, plan, k).values));
    }
}

TEST_CASE("block stream independence") {
    const auto plan = make_plan(200, 100, 100);
    const Matrix a = block_weights(plan, 0);
    const Matrix b = block_weights(plan, 1);
    const Eigen::Map<const Eigen::VectorXd> va(a.data(), a.size());
    const Eigen::Map<const Eigen::VectorXd> vb(b.data(), b.size());
    const double ma = va.mean(), mb = vb.mean();
    const double cov = ((va.array() - ma) * (vb.array() - mb)).sum();
    const double corr = cov / std::sqrt((va.array() - ma).square().sum() * (vb.array() - mb).square().sum());
    CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("activation ranges") {
    std::mt19937_64 gen(2);
    const Matrix x = oracle::random_matrix(gen, 20, 6, 3.0);
    CHECK(generate_block(x, make_plan(8, 8, 6, Activation::relu), 0).values.minCoeff() >= 0.0);
    const Matrix t = generate_block(x, make_plan(8, 8, 6, Activation::tanh), 0).values;
    CHECK(t.cwiseAbs().maxCoeff() <= 1.0);
    const Matrix s = generate_block(x, make_plan(8, 8, 6, Activation::sign), 0).values;
    CHECK((s.array().abs() == 1.0).all());
}

TEST_CASE("concatenated blocks match a single-shot generation") {
    std::mt19937_64 gen(4);
    const Matrix x = oracle::random_matrix(gen, 13, 7);
    for (const Activation a : {Activation::relu, Activation::identity, Activation::tanh}) {
        const auto plan = make_plan(11, 4, 7, a);
        const Matrix all = generate_all(x, plan);
        Index col = 0;
        for (Index k = 0; k < block_count(plan); ++k) {
            const Matrix b = generate_block(x, plan, k).values;
            CHECK((all.middleCols(col, b.cols()) - b).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + all.cwiseAbs().maxCoeff()));
            col += b.cols();
        }
        CHECK(col == 11);
    }
}

TEST_CASE("input dimension and block index are checked") {
    const auto plan = make_plan(4, 2, 3);
    CHECK_THROWS_AS(generate_block(Matrix::Zero(2, 4), plan, 0), DomainError);
    CHECK_THROWS_AS(generate_block(Matrix::Zero(2, 3), plan, 2), DomainError);
}

TEST_CASE("block gram") {
    FeatureBlock id{0, Matrix::Identity(2, 2)};
    CHECK(block_gram(id) == Matrix::Identity(2, 2));
    FeatureBlock ones{0, Matrix::Ones(2, 2)};
    CHECK(block_gram(ones) == Matrix::Constant(2, 2, 2.0));

    std::mt19937_64 gen(8);
    FeatureBlock r{0, oracle::random_matrix(gen, 5, 3)};
    const Matrix g = block_gram(r);
    for (Index i = 0; i < 5; ++i) {
        for (Index j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (Index c = 0; c < 3; ++c) acc += r.values(i, c) * r.values(j, c);
            CHECK(std::abs(g(i, j) - acc) <= 1e-12);
        }
    }
    CHECK(g == g.transpose());
}

}
