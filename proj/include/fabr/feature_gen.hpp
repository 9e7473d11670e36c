#pragma once

#include "fabr/matrix.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace fabr {

enum class Activation { relu, tanh, identity, sign };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Recipe for the P random features s = act(W x), generated in blocks of P1 rows of W.
///
/// Block k draws its weights from stream (master_seed, kFeatureWeights ^ k), so a block can be
/// regenerated bitwise on every pass without storing it. When P is not a multiple of P1 the
/// last block is narrower.
struct FeaturePlan {
    std::uint64_t master_seed = 0;
    Index total_features = 0;  // P
    Index block_width = 1;     // P1
    Activation activation = Activation::relu;
    double weight_scale = 1.0; // std of each weight
    Index input_dim = 0;       // D

    /// Throws DomainError when P1 < 1, P < P1, weight_scale <= 0 or D < 1.
    void validate() const;

    bool operator==(const FeaturePlan&) const = default;
};

/// ceil(P / P1).
Index block_count(const FeaturePlan& plan);

/// Width of block k (P1, except possibly the last).
Index block_width(const FeaturePlan& plan, Index k);

/// Number of features in the first `blocks` blocks.
Index features_in_prefix(const FeaturePlan& plan, Index blocks);

struct FeatureBlock {
    Index block_index = 0;
    Matrix values; // N x width_k
};

/// Weight rows of block k, width_k x D.
Matrix block_weights(const FeaturePlan& plan, Index k);

/// act(X W_k^T). Pure function of its arguments.
FeatureBlock generate_block(const Matrix& inputs, const FeaturePlan& plan, Index k);

/// All P features at once (N x P); equal to the column-wise concatenation of every block.
Matrix generate_all(const Matrix& inputs, const FeaturePlan& plan);

/// S_k S_k^T (N x N, symmetric).
Matrix block_gram(const FeatureBlock& block);

void apply_activation(Activation a, Matrix& values);

} // namespace fabr
