#include "fabr/lowrank_solver.hpp"

#include "fabr/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>

namespace fabr {

namespace {

using Clock = std::chrono::steady_clock;

/// Keeps the top min(cap, #positive) pairs of the projected eigenproblem and lifts them.
/// Returns the largest eigenvalue that was dropped.
double truncate_and_lift(SketchState& state, const Matrix& lift, const Matrix& projected) {
    EigPairs eig = psd_eig(projected);
    const Index available = eig.rank();
    const double cutoff = available > 0 ? kNullTolerance * eig.values(0) : 0.0;
    Index keep = 0;
    while (keep < available && keep < state.rank_cap && eig.values(keep) > cutoff) ++keep;
    const double dropped = keep < available ? eig.values(keep) : 0.0;

    state.basis = lift * eig.vectors.leftCols(keep);
    state.values = eig.values.head(keep);
    return dropped;
}

void record_fold(SketchState& state, double dropped) {
    state.discarded_sum += dropped;
    state.discarded_per_fold.push_back(dropped);
    ++state.blocks_folded;
}

} // namespace

Matrix thin_basis_pass(const Matrix& s, double reference_scale, double tolerance) {
    if (s.cols() == 0 || s.rows() == 0) {
        return Matrix(s.rows(), 0);
    }
    Matrix gram = Matrix::Zero(s.cols(), s.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose());
    const EigPairs eig = sym_eig(Matrix(gram.selfadjointView<Eigen::Lower>()));
    const double cutoff = tolerance * std::max(eig.values(0), reference_scale);
    Index keep = 0;
    while (keep < eig.rank() && eig.values(keep) > cutoff) ++keep;
    const Vector inv_sqrt = eig.values.head(keep).array().rsqrt();
    return s * (eig.vectors.leftCols(keep) * inv_sqrt.asDiagonal());
}

Matrix thin_orthonormalize(const Matrix& s, double reference_scale, const Matrix& against) {
    Matrix basis = thin_basis_pass(s, reference_scale, kBasisTolerance);
    for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) {
        if (against.cols() > 0) basis.noalias() -= against * (against.transpose() * basis);
        basis = thin_basis_pass(basis, 1.0);
    }
    return basis;
}

Matrix thin_orthonormalize(const Matrix& s, double reference_scale) {
    return thin_orthonormalize(s, reference_scale, Matrix(s.rows(), 0));
}

SketchState init_state(const FeatureBlock& first, Index rank_cap) {
    if (rank_cap < 1) {
        throw DomainError(fmt::format("rank cap nu must be >= 1, got {}", rank_cap));
    }
    SketchState state;
    state.rank_cap = rank_cap;
    const Matrix& s = first.values;

    // Basis of col(S_0) from the P1 x P1 matrix S_0^T S_0; the nonzero spectrum of S_0 S_0^T is
    // then read off the small projected matrix (B^T S_0)(B^T S_0)^T.
    const Matrix basis = thin_orthonormalize(s, s.squaredNorm());
    const Matrix projected = basis.transpose() * s;
    Matrix small = Matrix::Zero(basis.cols(), basis.cols());
    small.selfadjointView<Eigen::Lower>().rankUpdate(projected);
    const double dropped = truncate_and_lift(state, basis, Matrix(small.selfadjointView<Eigen::Lower>()));
    if (state.basis.rows() != s.rows()) state.basis.resize(s.rows(), 0);
    record_fold(state, dropped);
    return state;
}

void fold_block(SketchState& state, const FeatureBlock& block) {
    const Matrix& s = block.values;
    if (s.rows() != state.rows()) {
        throw DomainError(fmt::format("block {} has {} rows, sketch has {}", block.block_index, s.rows(), state.rows()));
    }
    const Matrix& v = state.basis;

    // Theta S = S - V (V^T S), applied twice.
    Matrix residual = s - v * (v.transpose() * s);
    residual.noalias() -= v * (v.transpose() * residual);

    const Matrix fresh = thin_orthonormalize(residual, s.squaredNorm(), v);

    const Index r = v.cols();
    Matrix lift(s.rows(), r + fresh.cols());
    lift.leftCols(r) = v;
    lift.rightCols(fresh.cols()) = fresh;

    const Matrix vbar = lift.transpose() * v; // (r + r') x r
    const Matrix sbar = lift.transpose() * s; // (r + r') x P1
    Matrix projected = vbar * state.values.asDiagonal() * vbar.transpose();
    projected.selfadjointView<Eigen::Lower>().rankUpdate(sbar);
    projected = Matrix(projected.selfadjointView<Eigen::Lower>());

    const double dropped = truncate_and_lift(state, lift, projected);
    record_fold(state, dropped);
}

RidgeSolution solve_checkpoint(const SketchState& state, const EncodedLabels& targets, const RidgeGrid& grid, Index n) {
    if (targets.matrix.rows() != state.rows()) {
        throw DomainError(fmt::format("{} target rows for a sketch over {} rows", targets.matrix.rows(), state.rows()));
    }
    EigPairs scaled{state.basis, state.values / static_cast<double>(n)};
    RidgeSolution sol;
    sol.q = multi_z_apply(scaled, targets.matrix, grid, n, SpectrumMode::annihilate);
    sol.label_means = targets.column_means;
    sol.n_train = n;
    sol.checkpoint = state.blocks_folded;
    return sol;
}

BoundReport bound_report(const SketchState& state, const RidgeGrid& grid) {
    BoundReport report;
    report.blocks_folded = state.blocks_folded;
    report.discarded_sum = state.discarded_sum;
    const Index n = std::max<Index>(state.rows(), 1);
    report.scaled_discarded_sum = state.discarded_sum / static_cast<double>(n);
    for (const double z : grid.values()) {
        report.resolvent_bound.push_back(report.scaled_discarded_sum / (z * z));
    }
    return report;
}

LowRankFit fit_lowrank_targets(const Matrix& inputs, const EncodedLabels& targets, const FeaturePlan& plan,
                               const RidgeGrid& grid, Index rank_cap, const FitOptions& options) {
    plan.validate();
    if (grid.empty()) {
        throw DomainError("shrinkage grid is empty");
    }
    const Index n = inputs.rows();
    if (n < 1) {
        throw DomainError("training set is empty");
    }
    if (targets.matrix.rows() != n) {
        throw DomainError(fmt::format("{} target rows for {} training rows", targets.matrix.rows(), n));
    }
    const Index blocks = block_count(plan);
    const std::vector<Index> checkpoints = normalize_checkpoints(options.checkpoints, blocks);
    const auto start = Clock::now();

    LowRankFit out;
    auto next_cp = checkpoints.begin();
    for (Index b = 0; b < blocks; ++b) {
        const FeatureBlock block = generate_block(inputs, plan, b);
        if (b == 0) {
            out.sketch = init_state(block, rank_cap);
        } else {
            fold_block(out.sketch, block);
        }
        if (next_cp != checkpoints.end() && *next_cp == b + 1) {
            RidgeSolution sol = solve_checkpoint(out.sketch, targets, grid, n);
            if (options.record_timing) sol.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            out.model.checkpoints.push_back(std::move(sol));
            ++next_cp;
        }
    }
    if (!out.model.checkpoints.empty() && out.model.checkpoints.back().checkpoint == blocks) {
        out.model.final_solution = out.model.checkpoints.back();
    } else {
        out.model.final_solution = solve_checkpoint(out.sketch, targets, grid, n);
        if (options.record_timing) {
            out.model.final_solution.elapsed_ms =
                std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        }
    }

    out.model.kind = SolverKind::lowrank;
    out.model.plan = plan;
    out.model.grid = grid;
    out.model.mode = SpectrumMode::annihilate;
    out.model.rank_cap = rank_cap;
    out.model.num_classes = static_cast<int>(targets.matrix.cols());
    out.model.demeaned = targets.demeaned;
    out.model.train_inputs = inputs;
    return out;
}

LowRankFit fit_lowrank(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid, Index rank_cap,
                       const FitOptions& options) {
    validate(train);
    return fit_lowrank_targets(train.features, one_hot_encode(train.labels, train.num_classes, options.demean), plan,
                               grid, rank_cap, options);
}

} // namespace fabr
