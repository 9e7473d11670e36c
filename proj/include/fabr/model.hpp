#pragma once

#include "fabr/feature_gen.hpp"
#include "fabr/matrix.hpp"
#include "fabr/ridge_spectral.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fabr {

enum class SolverKind { full, lowrank };

/// Everything the second (prediction) pass needs: the training representation to regenerate
/// S_k, the plan, and the dual weights for the final fit and every stored checkpoint.
struct DualModel {
    SolverKind kind = SolverKind::full;
    FeaturePlan plan;
    RidgeGrid grid;
    SpectrumMode mode = SpectrumMode::exact;
    Index rank_cap = 0;  // nu for the low-rank solver, 0 otherwise
    int num_classes = 0;
    bool demeaned = true;
    Matrix train_inputs; // N x D
    RidgeSolution final_solution;
    std::vector<RidgeSolution> checkpoints; // ascending block count
    std::vector<Matrix> beta;               // optional stacked P x K per z

    Index n_train() const noexcept { return train_inputs.rows(); }
};

enum class PredictMode { final_only, all_checkpoints };

struct PredictionEntry {
    Index checkpoint = 0;   // blocks contributing to this prediction
    double complexity = 0;  // features in those blocks / N
    std::size_t z_index = 0;
    double z = 0;
    Matrix scores;          // M x K, label means already re-added
    Labels classes;
};

struct PredictionSet {
    std::vector<PredictionEntry> entries;

    /// Entry for (checkpoint, z_index), or nullptr.
    const PredictionEntry* find(Index checkpoint, std::size_t z_index) const noexcept;
};

/// Regenerates train and test blocks and forms predictions.
///
/// final_only: y_hat(z) += S_k^test (S_k^T Q(z)) block by block (or S_k^test beta_k when beta is stored).
/// all_checkpoints: accumulates the cross-Gram T_k = sum_{j<=k} S_j^test S_j^T once and scores every
/// stored checkpoint as T_k Q_k(z), plus the final fit.
/// Throws DomainError when test columns do not match the plan.
PredictionSet predict(const DualModel& model, const Matrix& test_inputs, PredictMode mode = PredictMode::final_only);

/// Fills model.beta with stacked S^T Q(z) per z (P x K).
void materialize_beta(DualModel& model);

/// Memory budget for N x N (or M x N) buffers: FABR_MEM_BUDGET_BYTES when set, else 8 GiB.
std::uint64_t memory_budget_bytes();

/// Throws MemoryBudgetError if rows x cols doubles exceed `budget`.
void check_dense_budget(Index rows, Index cols, std::uint64_t budget, const char* what);

} // namespace fabr
