#include "fabr/full_solver.hpp"

#include "fabr/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>

namespace fabr {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

RidgeSolution solve_gram(const Matrix& psi_lower, const EncodedLabels& targets, const RidgeGrid& grid,
                         SpectrumMode mode) {
    const Index n = psi_lower.rows();
    const Matrix normalized = Matrix(psi_lower.selfadjointView<Eigen::Lower>()) / static_cast<double>(n);
    const EigPairs eig = psd_eig(normalized);
    RidgeSolution sol;
    sol.q = multi_z_apply(eig, targets.matrix, grid, n, mode);
    sol.label_means = targets.column_means;
    sol.n_train = n;
    return sol;
}

} // namespace

std::vector<Index> normalize_checkpoints(std::vector<Index> checkpoints, Index blocks) {
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    for (const Index c : checkpoints) {
        if (c < 1 || c > blocks) {
            throw DomainError(fmt::format("checkpoint {} outside [1, {}]", c, blocks));
        }
    }
    return checkpoints;
}

FullFit fit_targets(const Matrix& inputs, const EncodedLabels& targets, const FeaturePlan& plan, const RidgeGrid& grid,
                    const FitOptions& options) {
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
    check_dense_budget(n, n, options.memory_budget.value_or(memory_budget_bytes()), "the exact Gram matrix");

    const Index blocks = block_count(plan);
    const std::vector<Index> checkpoints = normalize_checkpoints(options.checkpoints, blocks);
    const auto start = Clock::now();

    FullFit out;
    out.gram.psi = Matrix::Zero(n, n); // lower triangle is authoritative during accumulation
    auto next_cp = checkpoints.begin();
    for (Index b = 0; b < blocks; ++b) {
        const FeatureBlock block = generate_block(inputs, plan, b);
        gram_update(out.gram.psi, block.values);
        out.gram.blocks_folded = b + 1;
        if (next_cp != checkpoints.end() && *next_cp == b + 1) {
            RidgeSolution sol = solve_gram(out.gram.psi, targets, grid, options.mode);
            sol.checkpoint = b + 1;
            if (options.record_timing) sol.elapsed_ms = ms_since(start);
            out.model.checkpoints.push_back(std::move(sol));
            ++next_cp;
        }
    }
    out.gram.psi = Matrix(out.gram.psi.selfadjointView<Eigen::Lower>());

    if (!out.model.checkpoints.empty() && out.model.checkpoints.back().checkpoint == blocks) {
        out.model.final_solution = out.model.checkpoints.back();
    } else {
        out.model.final_solution = solve_gram(out.gram.psi, targets, grid, options.mode);
        out.model.final_solution.checkpoint = blocks;
        if (options.record_timing) out.model.final_solution.elapsed_ms = ms_since(start);
    }

    out.model.kind = SolverKind::full;
    out.model.plan = plan;
    out.model.grid = grid;
    out.model.mode = options.mode;
    out.model.num_classes = static_cast<int>(targets.matrix.cols());
    out.model.demeaned = targets.demeaned;
    out.model.train_inputs = inputs;
    return out;
}

FullFit fit(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid, const FitOptions& options) {
    validate(train);
    return fit_targets(train.features, one_hot_encode(train.labels, train.num_classes, options.demean), plan, grid,
                       options);
}

PredictionSet fit_predict_scores(const LabeledDataset& train, const Matrix& test_inputs, const FeaturePlan& plan,
                                 const RidgeGrid& grid, const FitOptions& options, PredictMode mode) {
    return predict(fit(train, plan, grid, options), test_inputs, mode);
}

std::vector<Matrix> dense_dual_scores(const Matrix& train_features, const Matrix& targets, const RidgeGrid& grid,
                                      const Matrix& test_features) {
    const Index n = train_features.rows();
    if (targets.rows() != n || test_features.cols() != train_features.cols()) {
        throw DomainError("dense_dual_scores: inconsistent shapes");
    }
    Matrix psi = Matrix::Zero(n, n);
    gram_update(psi, train_features, 1.0 / static_cast<double>(n));
    const EigPairs eig = psd_eig(Matrix(psi.selfadjointView<Eigen::Lower>()));
    psi.resize(0, 0);
    const std::vector<Matrix> q = multi_z_apply(eig, targets, grid, n, SpectrumMode::exact);

    const Index k = targets.cols();
    Matrix q_all(n, k * static_cast<Index>(q.size()));
    for (std::size_t zi = 0; zi < q.size(); ++zi) q_all.middleCols(static_cast<Index>(zi) * k, k) = q[zi];
    const Matrix beta_all = train_features.transpose() * q_all;
    const Matrix scores_all = test_features * beta_all;

    std::vector<Matrix> out;
    for (std::size_t zi = 0; zi < q.size(); ++zi) out.push_back(scores_all.middleCols(static_cast<Index>(zi) * k, k));
    return out;
}

} // namespace fabr
