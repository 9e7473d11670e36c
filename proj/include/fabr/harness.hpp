#pragma once

#include "fabr/data_io.hpp"
#include "fabr/full_solver.hpp"
#include "fabr/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fabr {

/// Fraction of exact matches. Throws DomainError on length mismatch; 0 for empty input.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// c = P / N.
double complexity(Index features, Index n);

struct SolverChoice {
    SolverKind kind = SolverKind::full;
    Index rank_cap = 0;     // nu for lowrank
    Index batch_size = 0;   // > 0 selects the mini-batch ensemble
    std::uint64_t shuffle_seed = 0;
};

struct VocRow {
    Index checkpoint = 0;
    double complexity = 0;
    double z = 0;
    double train_acc = 0;
    double test_acc = 0;
    double ms = 0;
};

struct VocCurve {
    std::vector<VocRow> rows; // ordered by checkpoint, then z
    /// Checkpoint whose complexity is closest to 1 (the interpolation threshold).
    Index threshold_checkpoint = 0;
};

/// One fitting pass storing a solution at every checkpoint, then one checkpoint-mode prediction
/// pass over train and test. `checkpoints` must lie in [1, K_blocks] and include K_blocks.
VocCurve run_voc(const LabeledDataset& train, const LabeledDataset& test, const FeaturePlan& plan,
                 const RidgeGrid& grid, const std::vector<Index>& checkpoints, const SolverChoice& solver,
                 const FitOptions& options = {});

/// Header: checkpoint,complexity,z,train_acc,test_acc,ms
void write_voc_csv(std::ostream& out, const VocCurve& curve);

struct BenchRecord {
    std::string method; // "engine" or "baseline"
    Index d = 0;
    std::size_t num_z = 0;
    double mean_s = 0;
    double std_s = 0;
    int reps = 0;
    int threads = 1;
};

struct BenchConfig {
    std::vector<Index> dims;
    std::vector<std::size_t> num_z;
    Index n_total = 5000;
    Index n_train = 4000; // first n_train rows train, the rest test
    int reps = 5;
    std::uint64_t seed = 0;
    /// One untimed single-z run per method and d before timing, on the first
    /// min(n_train, warmup_rows) training rows.
    bool warmup = true;
    Index warmup_rows = 500;
};

/// Log-spaced grid of `count` values in [1e-2, 1e2].
RidgeGrid bench_grid(std::size_t count);

/// Per-z refit baseline: for every z, forms the smaller Gram (S^T S or S S^T), factorizes
/// (Gram/N + zI) by Cholesky and predicts. Returns test scores per z.
std::vector<Matrix> naive_per_z_scores(const Matrix& train_features, const Matrix& targets, const RidgeGrid& grid,
                                       const Matrix& test_features);

/// Times the engine's one-decomposition multi-z path against naive_per_z_scores on the linear
/// synthetic task, for every (d, |z|) pair. Records: engine rows first, then baseline, per d.
std::vector<BenchRecord> run_bench(const BenchConfig& config);

/// Header: method,d,num_z,mean_s,std_s,reps,threads
void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records);

/// Shortest round-trip decimal form.
std::string format_double(double v);

} // namespace fabr
