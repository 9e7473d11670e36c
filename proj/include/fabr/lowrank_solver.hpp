#pragma once

#include "fabr/data_io.hpp"
#include "fabr/full_solver.hpp"
#include "fabr/model.hpp"

#include <vector>

namespace fabr {

/// Rank-capped spectral sketch Psi_hat = V diag(d) V^T of the running Gram, kept in the
/// unnormalized Psi scale. Memory is O(N (nu + P1)); no N x N matrix is ever formed.
struct SketchState {
    Matrix basis;        // V, N x r, orthonormal columns
    Vector values;       // d, length r, nonincreasing, > 0
    Index rank_cap = 0;  // nu
    Index blocks_folded = 0;
    /// Sum over folds of the largest eigenvalue dropped by that fold (0 when nothing was dropped).
    double discarded_sum = 0.0;
    std::vector<double> discarded_per_fold;

    Index rows() const noexcept { return basis.rows(); }
    Index rank() const noexcept { return values.size(); }
};

/// Cutoff of the first thin-basis pass, relative to the reference scale.
inline constexpr double kBasisTolerance = 1e-20;

/// One pass: eigendecompose S^T S = W delta W^T and return S W delta^{-1/2},
/// dropping directions with delta <= tolerance * max(delta_max, reference_scale).
Matrix thin_basis_pass(const Matrix& s, double reference_scale, double tolerance = kRankTolerance);

/// Orthonormal basis of col(S): one thin_basis_pass at kBasisTolerance, then two repair passes
/// that re-orthogonalize against `against` and re-normalize.
Matrix thin_orthonormalize(const Matrix& s, double reference_scale, const Matrix& against);
Matrix thin_orthonormalize(const Matrix& s, double reference_scale);

/// Sketch of S_0 S_0^T using only P1 x P1 eigenproblems; keeps the top min(nu, rank) pairs.
SketchState init_state(const FeatureBlock& first, Index rank_cap);

/// Folds S_k into the sketch: orthogonalize S_k against V (twice), thin-orthonormalize the
/// remainder into W, eigendecompose the projected (r + r') x (r + r') matrix
/// Vbar diag(d) Vbar^T + Sbar Sbar^T with Vhat = [V, W], keep the top nu pairs and lift them by Vhat.
void fold_block(SketchState& state, const FeatureBlock& block);

/// Annihilation-mode dual weights from (V, d / n).
RidgeSolution solve_checkpoint(const SketchState& state, const EncodedLabels& targets, const RidgeGrid& grid, Index n);

struct BoundReport {
    Index blocks_folded = 0;
    double discarded_sum = 0.0;        // Psi scale
    double scaled_discarded_sum = 0.0; // Psi / N scale
    std::vector<double> resolvent_bound; // scaled_discarded_sum / z^2, per grid value
};

BoundReport bound_report(const SketchState& state, const RidgeGrid& grid);

struct LowRankFit {
    SketchState sketch;
    DualModel model;
};

/// options.mode is ignored: the sketch always solves in annihilation mode.
LowRankFit fit_lowrank(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid, Index rank_cap,
                       const FitOptions& options);

LowRankFit fit_lowrank_targets(const Matrix& inputs, const EncodedLabels& targets, const FeaturePlan& plan,
                               const RidgeGrid& grid, Index rank_cap, const FitOptions& options);

inline PredictionSet predict_lowrank(const LowRankFit& fit, const Matrix& test_inputs,
                                     PredictMode mode = PredictMode::final_only) {
    return predict(fit.model, test_inputs, mode);
}

} // namespace fabr
