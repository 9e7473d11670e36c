#include "fabr/model.hpp"

#include "fabr/errors.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <string>

namespace fabr {

namespace {

void check_model(const DualModel& model, const Matrix& test_inputs) {
    if (test_inputs.rows() > 0 && test_inputs.cols() != model.plan.input_dim) {
        throw DomainError(fmt::format("test inputs have {} columns but the model plan expects D={}",
                                      test_inputs.cols(), model.plan.input_dim));
    }
    if (model.final_solution.q.size() != model.grid.size()) {
        throw DomainError(fmt::format("model holds {} dual solutions for a grid of {}", model.final_solution.q.size(),
                                      model.grid.size()));
    }
    if (model.final_solution.n_train != model.n_train()) {
        throw DomainError(fmt::format("dual weights were fit on N={} but the model stores N={} training rows",
                                      model.final_solution.n_train, model.n_train()));
    }
}

void add_entries(PredictionSet& out, const DualModel& model, Index checkpoint, const Matrix& raw_all_z) {
    const Index k = model.num_classes;
    const double complexity =
        static_cast<double>(features_in_prefix(model.plan, checkpoint)) / static_cast<double>(model.n_train());
    const auto& means = model.final_solution.label_means;
    const Eigen::Map<const Eigen::RowVectorXd> mean_row(means.data(), static_cast<Index>(means.size()));
    for (std::size_t zi = 0; zi < model.grid.size(); ++zi) {
        PredictionEntry entry;
        entry.checkpoint = checkpoint;
        entry.complexity = complexity;
        entry.z_index = zi;
        entry.z = model.grid[zi];
        const auto raw = raw_all_z.middleCols(static_cast<Index>(zi) * k, k);
        entry.classes = classify(raw, means);
        entry.scores = raw.rowwise() + mean_row;
        out.entries.push_back(std::move(entry));
    }
}

Matrix stack_q(const RidgeSolution& sol, Index n, Index k) {
    Matrix stacked(n, k * static_cast<Index>(sol.q.size()));
    for (std::size_t zi = 0; zi < sol.q.size(); ++zi) {
        stacked.middleCols(static_cast<Index>(zi) * k, k) = sol.q[zi];
    }
    return stacked;
}

} // namespace

const PredictionEntry* PredictionSet::find(Index checkpoint, std::size_t z_index) const noexcept {
    for (const auto& e : entries) {
        if (e.checkpoint == checkpoint && e.z_index == z_index) return &e;
    }
    return nullptr;
}

std::uint64_t memory_budget_bytes() {
    if (const char* env = std::getenv("FABR_MEM_BUDGET_BYTES"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != nullptr && *end == '\0') return v;
        throw DomainError(fmt::format("FABR_MEM_BUDGET_BYTES='{}' is not a byte count", env));
    }
    return 8ull << 30;
}

void check_dense_budget(Index rows, Index cols, std::uint64_t budget, const char* what) {
    const auto bytes = static_cast<unsigned __int128>(rows) * static_cast<unsigned __int128>(cols) * sizeof(double);
    if (bytes > budget) {
        throw MemoryBudgetError(fmt::format(
            "{} needs a {} x {} matrix ({} bytes), above the memory budget of {} bytes; "
            "use the low-rank solver (--nu) or raise FABR_MEM_BUDGET_BYTES",
            what, rows, cols, static_cast<std::uint64_t>(bytes), budget));
    }
}

PredictionSet predict(const DualModel& model, const Matrix& test_inputs, PredictMode mode) {
    check_model(model, test_inputs);
    PredictionSet out;
    const Index m = test_inputs.rows();
    if (m == 0) return out;

    const Index n = model.n_train();
    const Index k = model.num_classes;
    const Index nz = static_cast<Index>(model.grid.size());
    const Index blocks = block_count(model.plan);

    if (mode == PredictMode::final_only) {
        Matrix scores = Matrix::Zero(m, k * nz);
        const bool use_beta = !model.beta.empty();
        const Matrix q_all = use_beta ? Matrix() : stack_q(model.final_solution, n, k);
        Matrix beta_all;
        if (use_beta) {
            beta_all.resize(model.plan.total_features, k * nz);
            for (Index zi = 0; zi < nz; ++zi) beta_all.middleCols(zi * k, k) = model.beta[static_cast<std::size_t>(zi)];
        }
        Index offset = 0;
        for (Index b = 0; b < blocks; ++b) {
            const Matrix test_block = generate_block(test_inputs, model.plan, b).values;
            if (use_beta) {
                scores.noalias() += test_block * beta_all.middleRows(offset, test_block.cols());
            } else {
                const Matrix train_block = generate_block(model.train_inputs, model.plan, b).values;
                const Matrix beta_block = train_block.transpose() * q_all;
                scores.noalias() += test_block * beta_block;
            }
            offset += test_block.cols();
        }
        add_entries(out, model, blocks, scores);
        return out;
    }

    check_dense_budget(m, n, memory_budget_bytes(), "checkpoint prediction cross-Gram");
    std::vector<const RidgeSolution*> targets(static_cast<std::size_t>(blocks) + 1, nullptr);
    for (const auto& cp : model.checkpoints) {
        if (!cp.checkpoint || *cp.checkpoint < 1 || *cp.checkpoint > blocks) {
            throw DomainError("stored checkpoint solution carries no valid block count");
        }
        targets[static_cast<std::size_t>(*cp.checkpoint)] = &cp;
    }
    targets[static_cast<std::size_t>(blocks)] = &model.final_solution;

    Matrix cross = Matrix::Zero(m, n);
    for (Index b = 0; b < blocks; ++b) {
        const Matrix test_block = generate_block(test_inputs, model.plan, b).values;
        const Matrix train_block = generate_block(model.train_inputs, model.plan, b).values;
        cross.noalias() += test_block * train_block.transpose();
        if (const RidgeSolution* sol = targets[static_cast<std::size_t>(b + 1)]; sol != nullptr) {
            const Matrix scores = cross * stack_q(*sol, n, k);
            add_entries(out, model, b + 1, scores);
        }
    }
    return out;
}

void materialize_beta(DualModel& model) {
    const Index n = model.n_train();
    const Index k = model.num_classes;
    const Index nz = static_cast<Index>(model.grid.size());
    const Matrix q_all = stack_q(model.final_solution, n, k);
    Matrix beta_all(model.plan.total_features, k * nz);
    Index offset = 0;
    for (Index b = 0; b < block_count(model.plan); ++b) {
        const Matrix train_block = generate_block(model.train_inputs, model.plan, b).values;
        beta_all.middleRows(offset, train_block.cols()).noalias() = train_block.transpose() * q_all;
        offset += train_block.cols();
    }
    model.beta.clear();
    for (Index zi = 0; zi < nz; ++zi) model.beta.push_back(beta_all.middleCols(zi * k, k));
}

} // namespace fabr
