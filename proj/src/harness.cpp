#include "fabr/harness.hpp"

#include "fabr/ensemble.hpp"
#include "fabr/errors.hpp"
#include "fabr/lowrank_solver.hpp"
#include "fabr/threading.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace fabr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct VocFit {
    std::vector<DualModel> members;
};

VocFit fit_for_voc(const LabeledDataset& train, const FeaturePlan& plan, const RidgeGrid& grid,
                   const SolverChoice& solver, const FitOptions& options) {
    VocFit out;
    if (solver.batch_size > 0) {
        EnsembleConfig config{solver.batch_size, solver.kind, solver.rank_cap, solver.shuffle_seed};
        out.members = fit_ensemble(train, plan, grid, config, options);
    } else if (solver.kind == SolverKind::lowrank) {
        out.members.push_back(fit_lowrank(train, plan, grid, solver.rank_cap, options).model);
    } else {
        out.members.push_back(fit(train, plan, grid, options).model);
    }
    return out;
}

} // namespace

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw DomainError(fmt::format("accuracy: {} predictions for {} labels", predicted.size(), truth.size()));
    }
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double complexity(Index features, Index n) {
    if (n < 1) throw DomainError("complexity needs at least one training row");
    return static_cast<double>(features) / static_cast<double>(n);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

VocCurve run_voc(const LabeledDataset& train, const LabeledDataset& test, const FeaturePlan& plan,
                 const RidgeGrid& grid, const std::vector<Index>& checkpoints, const SolverChoice& solver,
                 const FitOptions& options) {
    const Index blocks = block_count(plan);
    const std::vector<Index> cps = normalize_checkpoints(checkpoints, blocks);
    if (cps.empty() || cps.back() != blocks) {
        throw DomainError(fmt::format("VoC checkpoints must include the final block count {}", blocks));
    }
    FitOptions fit_options = options;
    fit_options.checkpoints = cps;

    const VocFit fitted = fit_for_voc(train, plan, grid, solver, fit_options);
    const PredictionSet train_pred = predict_ensemble(fitted.members, train.features, PredictMode::all_checkpoints);
    const PredictionSet test_pred = predict_ensemble(fitted.members, test.features, PredictMode::all_checkpoints);

    VocCurve curve;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const Index cp : cps) {
        double ms = 0.0;
        if (options.record_timing) {
            for (const auto& m : fitted.members) {
                for (const auto& sol : m.checkpoints) {
                    if (sol.checkpoint == cp) ms += sol.elapsed_ms;
                }
            }
        }
        for (std::size_t zi = 0; zi < grid.size(); ++zi) {
            VocRow row;
            row.checkpoint = cp;
            row.complexity = complexity(features_in_prefix(plan, cp), train.size());
            row.z = grid[zi];
            row.ms = ms;
            if (const auto* e = train_pred.find(cp, zi)) row.train_acc = accuracy(e->classes, train.labels);
            if (const auto* e = test_pred.find(cp, zi)) row.test_acc = accuracy(e->classes, test.labels);
            curve.rows.push_back(row);
        }
        const double gap = std::abs(complexity(features_in_prefix(plan, cp), train.size()) - 1.0);
        if (gap < best_gap) {
            best_gap = gap;
            curve.threshold_checkpoint = cp;
        }
    }
    return curve;
}

void write_voc_csv(std::ostream& out, const VocCurve& curve) {
    out << "checkpoint,complexity,z,train_acc,test_acc,ms\n";
    for (const auto& r : curve.rows) {
        out << r.checkpoint << ',' << format_double(r.complexity) << ',' << format_double(r.z) << ','
            << format_double(r.train_acc) << ',' << format_double(r.test_acc) << ',' << fmt::format("{:.3f}", r.ms)
            << '\n';
    }
}

RidgeGrid bench_grid(std::size_t count) {
    if (count == 0) throw DomainError("benchmark grid needs at least one z");
    std::vector<double> z(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
        z[i] = std::pow(10.0, -2.0 + 4.0 * t);
    }
    return RidgeGrid(std::move(z));
}

std::vector<Matrix> naive_per_z_scores(const Matrix& train_features, const Matrix& targets, const RidgeGrid& grid,
                                       const Matrix& test_features) {
    const Index n = train_features.rows();
    const Index p = train_features.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Matrix> out;
    out.reserve(grid.size());
    for (const double z : grid.values()) {
        // Nothing is shared between shrinkages: each z is a fresh fit.
        Matrix beta;
        if (p <= n) {
            Matrix system = Matrix::Zero(p, p);
            system.selfadjointView<Eigen::Lower>().rankUpdate(train_features.transpose(), inv_n);
            system.diagonal().array() += z;
            const Eigen::LLT<Matrix, Eigen::Lower> llt(system);
            if (llt.info() != Eigen::Success) throw NumericError("baseline Cholesky failed");
            beta = llt.solve(train_features.transpose() * targets * inv_n);
        } else {
            Matrix system = Matrix::Zero(n, n);
            gram_update(system, train_features, inv_n);
            system.diagonal().array() += z;
            const Eigen::LLT<Matrix, Eigen::Lower> llt(system);
            if (llt.info() != Eigen::Success) throw NumericError("baseline Cholesky failed");
            beta = train_features.transpose() * llt.solve(targets * inv_n);
        }
        out.push_back(test_features * beta);
    }
    return out;
}

std::vector<BenchRecord> run_bench(const BenchConfig& config) {
    if (config.reps < 1) throw DomainError("benchmark needs at least one repetition");
    if (config.n_train < 1 || config.n_train >= config.n_total) {
        throw DomainError(fmt::format("benchmark split {} of {} leaves no test rows", config.n_train, config.n_total));
    }
    std::vector<BenchRecord> records;
    for (const Index d : config.dims) {
        const LabeledDataset ds = synth_classification(config.n_total, d, config.seed);
        const LabeledDataset train = slice_rows(ds, 0, config.n_train);
        const LabeledDataset test = slice_rows(ds, config.n_train, config.n_total);
        const Matrix targets = one_hot_encode(train.labels, train.num_classes, true).matrix;

        using Method = std::vector<Matrix> (*)(const Matrix&, const Matrix&, const RidgeGrid&, const Matrix&);
        const std::pair<const char*, Method> methods[] = {{"engine", &dense_dual_scores},
                                                         {"baseline", &naive_per_z_scores}};
        for (const auto& [name, method] : methods) {
            if (config.warmup) {
                const Index rows = std::min(config.warmup_rows, train.size());
                (void)method(train.features.topRows(rows), targets.topRows(rows), bench_grid(1), test.features);
            }
            for (const std::size_t nz : config.num_z) {
                const RidgeGrid grid = bench_grid(nz);
                std::vector<double> times;
                for (int rep = 0; rep < config.reps; ++rep) {
                    const auto start = Clock::now();
                    const auto scores = method(train.features, targets, grid, test.features);
                    times.push_back(seconds_since(start));
                    if (scores.size() != nz) throw NumericError("benchmark method returned a wrong grid size");
                }
                BenchRecord rec;
                rec.method = name;
                rec.d = d;
                rec.num_z = nz;
                rec.reps = config.reps;
                rec.threads = num_threads();
                double sum = 0.0;
                for (const double t : times) sum += t;
                rec.mean_s = sum / static_cast<double>(times.size());
                double ss = 0.0;
                for (const double t : times) ss += (t - rec.mean_s) * (t - rec.mean_s);
                rec.std_s = times.size() > 1 ? std::sqrt(ss / static_cast<double>(times.size() - 1)) : 0.0;
                records.push_back(rec);
            }
        }
    }
    return records;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records) {
    out << "method,d,num_z,mean_s,std_s,reps,threads\n";
    for (const auto& r : records) {
        out << r.method << ',' << r.d << ',' << r.num_z << ',' << fmt::format("{:.6f}", r.mean_s) << ','
            << fmt::format("{:.6f}", r.std_s) << ',' << r.reps << ',' << r.threads << '\n';
    }
}

} // namespace fabr
