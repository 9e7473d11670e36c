#include "fabr/ensemble.hpp"

#include "fabr/errors.hpp"
#include "fabr/lowrank_solver.hpp"
#include "fabr/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace fabr {

std::vector<std::vector<Index>> batch_partition(Index n, Index batch_size, std::uint64_t seed) {
    if (batch_size < 1 || batch_size > n) {
        throw DomainError(fmt::format("batch size {} outside [1, N={}]", batch_size, n));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    UniformSequence rng(seed, stream::id(stream::kEnsembleShuffle, 0));
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
    }
    std::vector<std::vector<Index>> batches;
    for (Index begin = 0; begin < n; begin += batch_size) {
        const Index end = std::min(n, begin + batch_size);
        std::vector<Index> batch(order.begin() + begin, order.begin() + end);
        std::sort(batch.begin(), batch.end());
        batches.push_back(std::move(batch));
    }
    return batches;
}

std::vector<DualModel> fit_ensemble(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid,
                                    const EnsembleConfig& config, const FitOptions& options) {
    validate(train);
    std::vector<DualModel> members;
    for (const auto& rows : batch_partition(train.size(), config.batch_size, config.shuffle_seed)) {
        const LabeledDataset batch = take_rows(train, rows);
        if (config.solver == SolverKind::lowrank) {
            members.push_back(fit_lowrank(batch, plan, grid, config.rank_cap, options).model);
        } else {
            members.push_back(fit(batch, plan, grid, options).model);
        }
    }
    return members;
}

PredictionSet average_predictions(std::span<const PredictionSet> member_predictions) {
    PredictionSet out;
    if (member_predictions.empty()) return out;
    out = member_predictions.front();
    if (member_predictions.size() == 1) return out;

    for (std::size_t i = 1; i < member_predictions.size(); ++i) {
        const auto& other = member_predictions[i];
        if (other.entries.size() != out.entries.size()) {
            throw DomainError("ensemble members produced different prediction layouts");
        }
        for (std::size_t e = 0; e < out.entries.size(); ++e) {
            auto& acc = out.entries[e];
            const auto& rhs = other.entries[e];
            if (rhs.checkpoint != acc.checkpoint || rhs.z_index != acc.z_index ||
                rhs.scores.rows() != acc.scores.rows() || rhs.scores.cols() != acc.scores.cols()) {
                throw DomainError("ensemble members produced different prediction layouts");
            }
            acc.scores += rhs.scores;
        }
    }
    const double inv = 1.0 / static_cast<double>(member_predictions.size());
    for (auto& entry : out.entries) {
        entry.scores *= inv;
        const std::vector<double> zeros(static_cast<std::size_t>(entry.scores.cols()), 0.0);
        entry.classes = classify(entry.scores, zeros);
    }
    return out;
}

PredictionSet predict_ensemble(std::span<const DualModel> members, const Matrix& test_inputs, PredictMode mode) {
    if (members.empty()) {
        throw DomainError("ensemble has no members");
    }
    const DualModel& first = members.front();
    for (const auto& m : members) {
        if (!(m.grid == first.grid)) throw DomainError("ensemble members use different shrinkage grids");
        if (!(m.plan == first.plan)) throw DomainError("ensemble members use different feature plans");
        if (m.num_classes != first.num_classes) throw DomainError("ensemble members disagree on the class count");
    }
    std::vector<PredictionSet> per_member;
    per_member.reserve(members.size());
    for (const auto& m : members) per_member.push_back(predict(m, test_inputs, mode));
    PredictionSet out = average_predictions(per_member);

    // Complexity is relative to the pooled training size.
    Index pooled = 0;
    for (const auto& m : members) pooled += m.n_train();
    if (members.size() > 1) {
        for (auto& entry : out.entries) {
            entry.complexity = static_cast<double>(features_in_prefix(first.plan, entry.checkpoint)) /
                               static_cast<double>(pooled);
        }
    }
    return out;
}

} // namespace fabr
