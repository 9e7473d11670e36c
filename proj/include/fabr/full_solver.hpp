#pragma once

#include "fabr/data_io.hpp"
#include "fabr/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fabr {

struct FitOptions {
    /// Block counts (1-based, <= K_blocks) at which to store an intermediate solution.
    std::vector<Index> checkpoints;
    bool demean = true;
    SpectrumMode mode = SpectrumMode::exact;
    /// Overrides memory_budget_bytes() when set.
    std::optional<std::uint64_t> memory_budget;
    bool record_timing = false;
};

/// Running Gram Psi = sum_k S_k S_k^T.
struct GramState {
    Matrix psi;
    Index blocks_folded = 0;
};

struct FullFit {
    GramState gram;
    DualModel model;
};

/// Exact blocked solver. First pass folds S_k S_k^T into Psi; at each checkpoint and after the
/// last block, Psi/N is eigendecomposed once and Q(z) is formed for the whole grid.
FullFit fit(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid, const FitOptions& options);

/// Same, with targets already encoded.
FullFit fit_targets(const Matrix& inputs, const EncodedLabels& targets, const FeaturePlan& plan, const RidgeGrid& grid,
                    const FitOptions& options);

inline PredictionSet predict(const FullFit& fit, const Matrix& test_inputs, PredictMode mode = PredictMode::final_only) {
    return predict(fit.model, test_inputs, mode);
}

/// fit followed by predict.
PredictionSet fit_predict_scores(const LabeledDataset& train, const Matrix& test_inputs, const FeaturePlan& plan,
                                 const RidgeGrid& grid, const FitOptions& options,
                                 PredictMode mode = PredictMode::final_only);

/// Solves the dual problem on explicit features (no random projection): Psi = S S^T, one
/// eigendecomposition, then test scores S_test S^T Q(z) for every z. Used by the benchmark.
std::vector<Matrix> dense_dual_scores(const Matrix& train_features, const Matrix& targets, const RidgeGrid& grid,
                                      const Matrix& test_features);

/// Sorted, deduplicated checkpoint list; throws DomainError for values outside [1, blocks].
std::vector<Index> normalize_checkpoints(std::vector<Index> checkpoints, Index blocks);

} // namespace fabr
