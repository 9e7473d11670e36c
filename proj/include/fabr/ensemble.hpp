#pragma once

#include "fabr/data_io.hpp"
#include "fabr/full_solver.hpp"
#include "fabr/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fabr {

struct EnsembleConfig {
    Index batch_size = 0;
    SolverKind solver = SolverKind::full;
    Index rank_cap = 0; // nu, when solver == lowrank
    std::uint64_t shuffle_seed = 0;
};

/// Disjoint batches of [0, n): one seeded shuffle, contiguous chunks of batch_size (the last may be
/// smaller), each chunk sorted back into original row order. batch_size == n yields the identity.
std::vector<std::vector<Index>> batch_partition(Index n, Index batch_size, std::uint64_t seed);

/// Fits one independent solver per batch. All members share plan and grid; label means are per batch.
std::vector<DualModel> fit_ensemble(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid,
                                    const EnsembleConfig& config, const FitOptions& options);

/// Per (checkpoint, z), the arithmetic mean of member scores (means re-added), then argmax.
/// Throws DomainError when members disagree on grid, plan or class count.
PredictionSet predict_ensemble(std::span<const DualModel> members, const Matrix& test_inputs,
                               PredictMode mode = PredictMode::final_only);

/// Averages already-computed member predictions entry by entry.
PredictionSet average_predictions(std::span<const PredictionSet> member_predictions);

} // namespace fabr
