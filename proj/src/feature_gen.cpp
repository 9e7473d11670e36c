#include "fabr/feature_gen.hpp"

#include "fabr/errors.hpp"
#include "fabr/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace fabr {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::sign: return "sign";
    }
    return "relu";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    if (name == "sign") return Activation::sign;
    throw DomainError(fmt::format("unknown activation '{}'", name));
}

void FeaturePlan::validate() const {
    if (block_width < 1) {
        throw DomainError(fmt::format("block width P1 must be >= 1, got {}", block_width));
    }
    if (total_features < block_width) {
        throw DomainError(fmt::format("total features P={} smaller than block width P1={}", total_features,
                                      block_width));
    }
    if (!(weight_scale > 0.0) || !std::isfinite(weight_scale)) {
        throw DomainError(fmt::format("weight_scale must be positive, got {}", weight_scale));
    }
    if (input_dim < 1) {
        throw DomainError(fmt::format("input_dim must be >= 1, got {}", input_dim));
    }
}

Index block_count(const FeaturePlan& plan) {
    return (plan.total_features + plan.block_width - 1) / plan.block_width;
}

Index block_width(const FeaturePlan& plan, Index k) {
    const Index blocks = block_count(plan);
    if (k < 0 || k >= blocks) {
        throw DomainError(fmt::format("block index {} outside [0, {})", k, blocks));
    }
    return k + 1 < blocks ? plan.block_width : plan.total_features - (blocks - 1) * plan.block_width;
}

Index features_in_prefix(const FeaturePlan& plan, Index blocks) {
    return std::min(blocks * plan.block_width, plan.total_features);
}

Matrix block_weights(const FeaturePlan& plan, Index k) {
    const Index width = block_width(plan, k);
    const Index d = plan.input_dim;
    const NormalStream normals(plan.master_seed, stream::id(stream::kFeatureWeights, static_cast<std::uint64_t>(k)));

    // Element (i, j) is stream element i * D + j; fill row-major, then transpose into place.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(width, d);
    normals.fill(0, w.data(), static_cast<std::uint64_t>(width * d));
    if (plan.weight_scale != 1.0) {
        w *= plan.weight_scale;
    }
    return w;
}

void apply_activation(Activation a, Matrix& values) {
    switch (a) {
    case Activation::relu: values = values.cwiseMax(0.0); break;
    case Activation::tanh: values = values.array().tanh().matrix(); break;
    case Activation::identity: break;
    case Activation::sign:
        values = values.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        break;
    }
}

FeatureBlock generate_block(const Matrix& inputs, const FeaturePlan& plan, Index k) {
    plan.validate();
    if (inputs.cols() != plan.input_dim) {
        throw DomainError(
            fmt::format("inputs have {} columns but the plan expects D={}", inputs.cols(), plan.input_dim));
    }
    FeatureBlock block;
    block.block_index = k;
    const Matrix w = block_weights(plan, k);
    block.values.noalias() = inputs * w.transpose();
    apply_activation(plan.activation, block.values);
    return block;
}

Matrix generate_all(const Matrix& inputs, const FeaturePlan& plan) {
    plan.validate();
    if (inputs.cols() != plan.input_dim) {
        throw DomainError(
            fmt::format("inputs have {} columns but the plan expects D={}", inputs.cols(), plan.input_dim));
    }
    Matrix w(plan.total_features, plan.input_dim);
    for (Index k = 0, row = 0; k < block_count(plan); ++k) {
        const Index width = block_width(plan, k);
        w.middleRows(row, width) = block_weights(plan, k);
        row += width;
    }
    Matrix s = inputs * w.transpose();
    apply_activation(plan.activation, s);
    return s;
}

Matrix block_gram(const FeatureBlock& block) {
    const Index n = block.values.rows();
    Matrix g = Matrix::Zero(n, n);
    g.selfadjointView<Eigen::Lower>().rankUpdate(block.values);
    return g.selfadjointView<Eigen::Lower>();
}

} // namespace fabr
