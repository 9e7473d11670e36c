#include "commands.hpp"

#include "fabr/data_io.hpp"
#include "fabr/ensemble.hpp"
#include "fabr/errors.hpp"
#include "fabr/full_solver.hpp"
#include "fabr/harness.hpp"
#include "fabr/lowrank_solver.hpp"
#include "fabr/model_io.hpp"
#include "fabr/threading.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

namespace fabr::cli {

namespace fs = std::filesystem;

namespace {

constexpr Index kDefaultRankCap = 2000;
constexpr Index kDefaultBatchSize = 2000;

struct DataArgs {
    std::string dir;
    std::string features;
    std::string labels;
    bool csv_header = false;
};

void add_data_args(CLI::App& app, DataArgs& a, const std::string& prefix, const std::string& what) {
    app.add_option("--" + prefix + "data", a.dir, "Directory holding features.fabm and labels.fabm (" + what + ")");
    app.add_option("--" + prefix + "features", a.features, "Feature matrix file, FABM or CSV (" + what + ")");
    app.add_option("--" + prefix + "labels", a.labels, "Label column file, FABM or CSV (" + what + ")");
}

fs::path features_path(const DataArgs& a) {
    if (!a.features.empty()) return a.features;
    if (!a.dir.empty()) return fs::path(a.dir) / "features.fabm";
    return {};
}

fs::path labels_path(const DataArgs& a) {
    if (!a.labels.empty()) return a.labels;
    if (!a.dir.empty()) return fs::path(a.dir) / "labels.fabm";
    return {};
}

LabeledDataset load_dataset(const DataArgs& a, int num_classes) {
    LabeledDataset ds;
    const CsvOptions csv{a.csv_header};
    ds.features = load_matrix(features_path(a), csv);
    ds.labels = labels_from_matrix(load_matrix(labels_path(a), csv));
    int max_label = 1;
    for (const int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
    validate(ds);
    return ds;
}

struct PlanArgs {
    Index p = 0;
    Index p1 = 0;
    std::uint64_t seed = 0;
    std::string activation = "relu";
    double weight_scale = 1.0;
};

void add_plan_args(CLI::App& app, PlanArgs& a) {
    app.add_option("--p", a.p, "Total random features P")->required()->check(CLI::PositiveNumber);
    app.add_option("--p1", a.p1, "Features per block P1")->required()->check(CLI::PositiveNumber);
    app.add_option("--seed", a.seed, "Master seed of the random feature weights");
    app.add_option("--activation", a.activation, "relu, tanh, identity or sign")
        ->check(CLI::IsMember({"relu", "tanh", "identity", "sign"}));
    app.add_option("--weight-scale", a.weight_scale, "Standard deviation of each weight")
        ->check(CLI::PositiveNumber);
}

FeaturePlan make_plan(const PlanArgs& a, Index input_dim) {
    FeaturePlan plan;
    plan.master_seed = a.seed;
    plan.total_features = a.p;
    plan.block_width = a.p1;
    plan.activation = parse_activation(a.activation);
    plan.weight_scale = a.weight_scale;
    plan.input_dim = input_dim;
    plan.validate();
    return plan;
}

struct SolverArgs {
    std::optional<Index> nu;
    std::optional<Index> batch_size;
    std::optional<std::uint64_t> shuffle_seed;
    bool demean = true;
    std::string mode = "exact";
    std::vector<double> z;
    std::vector<Index> checkpoints;
    int num_classes = 0;
    bool timing = false;
};

void add_solver_args(CLI::App& app, SolverArgs& a) {
    app.add_option("--z", a.z, "Shrinkage grid, comma separated")->required()->delimiter(',');
    app.add_option("--nu", a.nu, "Use the rank-nu low-rank solver (default rank 2000)")
        ->expected(0, 1)
        ->default_str(std::to_string(kDefaultRankCap))
        ->check(CLI::PositiveNumber);
    app.add_option("--batch-size", a.batch_size, "Mini-batch ensemble with this batch size (default 2000)")
        ->expected(0, 1)
        ->default_str(std::to_string(kDefaultBatchSize))
        ->check(CLI::PositiveNumber);
    app.add_option("--shuffle-seed", a.shuffle_seed, "Seed of the ensemble batch shuffle (defaults to --seed)");
    app.add_flag("--demean,!--no-demean", a.demean, "Demean one-hot targets (default on)");
    app.add_option("--mode", a.mode, "Full solver spectrum mode: exact or annihilate")
        ->check(CLI::IsMember({"exact", "annihilate"}));
    app.add_option("--checkpoints", a.checkpoints, "Block counts at which to keep intermediate solutions")
        ->delimiter(',');
    app.add_option("--classes", a.num_classes, "Number of classes (default: max label + 1)");
    app.add_flag("--timing", a.timing, "Record wall-clock times (makes output nondeterministic)");
}

FitOptions make_fit_options(const SolverArgs& a) {
    FitOptions o;
    o.checkpoints = a.checkpoints;
    o.demean = a.demean;
    o.mode = a.mode == "annihilate" ? SpectrumMode::annihilate : SpectrumMode::exact;
    o.record_timing = a.timing;
    return o;
}

SolverChoice make_choice(const SolverArgs& a, std::uint64_t seed) {
    SolverChoice c;
    c.kind = a.nu ? SolverKind::lowrank : SolverKind::full;
    c.rank_cap = a.nu.value_or(0);
    c.batch_size = a.batch_size.value_or(0);
    c.shuffle_seed = a.shuffle_seed.value_or(seed);
    return c;
}

fs::path require_parent(const fs::path& file) {
    const fs::path parent = file.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError(fmt::format("output directory '{}' does not exist", parent.string()));
    }
    return file;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(require_parent(path), std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    body(f);
    f.flush();
    if (!f) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

void write_predictions(std::ostream& out, const PredictionSet& set, int num_classes) {
    out << "checkpoint,row,z,class";
    for (int k = 0; k < num_classes; ++k) out << ",score_" << k;
    out << '\n';
    for (const auto& e : set.entries) {
        const std::string z = format_double(e.z);
        for (Index r = 0; r < e.scores.rows(); ++r) {
            out << e.checkpoint << ',' << r << ',' << z << ',' << e.classes[static_cast<std::size_t>(r)];
            for (Index k = 0; k < e.scores.cols(); ++k) out << ',' << format_double(e.scores(r, k));
            out << '\n';
        }
    }
}

void print_accuracy_table(std::ostream& out, const PredictionSet& set, const Labels& truth, const char* column) {
    out << "checkpoint,z," << column << '\n';
    for (const auto& e : set.entries) {
        out << e.checkpoint << ',' << format_double(e.z) << ',' << format_double(accuracy(e.classes, truth)) << '\n';
    }
}

// ---- synth ----

struct SynthArgs {
    Index n = 0;
    Index d = 0;
    Index n_test = 0;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    const LabeledDataset all = synth_classification(a.n + a.n_test, a.d, a.seed);
    const LabeledDataset train = a.n_test > 0 ? slice_rows(all, 0, a.n) : all;
    save_matrix(train.features, dir / "features.fabm");
    save_matrix(labels_to_matrix(train.labels), dir / "labels.fabm");
    out << fmt::format("wrote {} rows x {} features to {}\n", train.size(), a.d, dir.string());
    if (a.n_test > 0) {
        const LabeledDataset test = slice_rows(all, a.n, a.n + a.n_test);
        fs::create_directories(dir / "test");
        save_matrix(test.features, dir / "test" / "features.fabm");
        save_matrix(labels_to_matrix(test.labels), dir / "test" / "labels.fabm");
        out << fmt::format("wrote {} test rows to {}\n", test.size(), (dir / "test").string());
    }
}

// ---- train ----

struct TrainArgs {
    DataArgs data;
    PlanArgs plan;
    SolverArgs solver;
    bool store_beta = false;
    std::string out;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
    const LabeledDataset train = load_dataset(a.data, a.solver.num_classes);
    const FeaturePlan plan = make_plan(a.plan, train.features.cols());
    const RidgeGrid grid(a.solver.z);
    const FitOptions options = make_fit_options(a.solver);
    const SolverChoice choice = make_choice(a.solver, a.plan.seed);

    ModelBundle bundle;
    if (choice.batch_size > 0) {
        const EnsembleConfig config{choice.batch_size, choice.kind, choice.rank_cap, choice.shuffle_seed};
        bundle.members = fit_ensemble(train, plan, grid, config, options);
    } else if (choice.kind == SolverKind::lowrank) {
        LowRankFit f = fit_lowrank(train, plan, grid, choice.rank_cap, options);
        bundle.members.push_back(std::move(f.model));
        bundle.sketches.push_back(std::move(f.sketch));
    } else {
        bundle.members.push_back(fit(train, plan, grid, options).model);
    }
    if (a.store_beta) {
        for (auto& m : bundle.members) materialize_beta(m);
    }
    save_model(bundle, require_parent(a.out));

    const PredictionSet pred = predict_ensemble(bundle.members, train.features, PredictMode::final_only);
    print_accuracy_table(out, pred, train.labels, "train_acc");
}

// ---- predict ----

struct PredictArgs {
    DataArgs data;
    std::string model;
    std::string out;
    bool all_checkpoints = false;
    int threads = 1;
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
    const ModelBundle bundle = load_model(a.model);
    const fs::path fpath = features_path(a.data);
    if (fpath.empty()) throw CLI::RequiredError("--features or --data");
    const Matrix features = load_matrix(fpath, CsvOptions{a.data.csv_header});
    const DualModel& first = bundle.members.front();
    if (features.rows() > 0 && features.cols() != first.plan.input_dim) {
        throw DomainError(fmt::format("test features have {} columns but the model was trained on {}",
                                      features.cols(), first.plan.input_dim));
    }
    const PredictMode mode = a.all_checkpoints ? PredictMode::all_checkpoints : PredictMode::final_only;
    PredictionSet pred;
    if (features.rows() > 0) {
        pred = predict_ensemble(bundle.members, features, mode);
    }
    if (a.out.empty()) {
        write_predictions(out, pred, first.num_classes);
        return;
    }
    write_text(a.out, [&](std::ostream& f) { write_predictions(f, pred, first.num_classes); });

    const fs::path lpath = labels_path(a.data);
    if (!lpath.empty() && fs::exists(lpath) && features.rows() > 0) {
        const Labels truth = labels_from_matrix(load_matrix(lpath, CsvOptions{a.data.csv_header}));
        print_accuracy_table(out, pred, truth, "accuracy");
    }
}

// ---- voc ----

struct VocArgs {
    DataArgs train;
    DataArgs test;
    PlanArgs plan;
    SolverArgs solver;
    std::string out;
};

void cmd_voc(const VocArgs& a, std::ostream& out) {
    const LabeledDataset train = load_dataset(a.train, a.solver.num_classes);
    LabeledDataset test = load_dataset(a.test, train.num_classes);
    const FeaturePlan plan = make_plan(a.plan, train.features.cols());
    const RidgeGrid grid(a.solver.z);
    std::vector<Index> cps = a.solver.checkpoints;
    if (cps.empty()) {
        for (Index k = 1; k <= block_count(plan); ++k) cps.push_back(k);
    }
    const VocCurve curve = run_voc(train, test, plan, grid, cps, make_choice(a.solver, a.plan.seed),
                                   make_fit_options(a.solver));
    write_text(a.out, [&](std::ostream& f) { write_voc_csv(f, curve); });
    out << fmt::format("wrote {} rows to {}; interpolation threshold at checkpoint {}\n", curve.rows.size(), a.out,
                       curve.threshold_checkpoint);
}

// ---- bench ----

struct BenchArgs {
    std::vector<Index> dims;
    std::vector<std::size_t> num_z;
    Index n = 5000;
    Index n_train = 4000;
    int reps = 5;
    std::uint64_t seed = 0;
    bool no_warmup = false;
    std::string out;
};

void cmd_bench(const BenchArgs& a, std::ostream& out) {
    BenchConfig config;
    config.dims = a.dims;
    config.num_z = a.num_z;
    config.n_total = a.n;
    config.n_train = a.n_train;
    config.reps = a.reps;
    config.seed = a.seed;
    config.warmup = !a.no_warmup;
    const auto records = run_bench(config);
    if (a.out.empty()) {
        write_bench_csv(out, records);
    } else {
        write_text(a.out, [&](std::ostream& f) { write_bench_csv(f, records); });
    }
}

// ---- inspect ----

void inspect_matrix(const fs::path& path, std::ostream& out) {
    const Matrix m = load_matrix(path);
    out << fmt::format("matrix {} x {}\n", m.rows(), m.cols());
    if (m.size() > 0) {
        out << fmt::format("min {}\nmax {}\nmean {}\n", format_double(m.minCoeff()), format_double(m.maxCoeff()),
                           format_double(m.mean()));
    }
}

void inspect_model(const fs::path& path, std::ostream& out) {
    const ModelBundle bundle = load_model(path);
    out << fmt::format("members {}\n", bundle.members.size());
    for (std::size_t i = 0; i < bundle.members.size(); ++i) {
        const DualModel& m = bundle.members[i];
        out << fmt::format("[member {}]\n", i);
        out << fmt::format("kind {}\n", m.kind == SolverKind::lowrank ? "lowrank" : "full");
        if (m.kind == SolverKind::lowrank) out << fmt::format("nu {}\n", m.rank_cap);
        out << fmt::format("mode {}\n", m.mode == SpectrumMode::annihilate ? "annihilate" : "exact");
        out << fmt::format("n_train {}\ninput_dim {}\n", m.n_train(), m.plan.input_dim);
        out << fmt::format("p {}\np1 {}\nblocks {}\nseed {}\nactivation {}\nweight_scale {}\n", m.plan.total_features,
                           m.plan.block_width, block_count(m.plan), m.plan.master_seed, to_string(m.plan.activation),
                           format_double(m.plan.weight_scale));
        out << "z";
        for (const double z : m.grid.values()) out << ' ' << format_double(z);
        out << fmt::format("\nclasses {}\ndemean {}\nlabel_means", m.num_classes, m.demeaned ? "on" : "off");
        for (const double v : m.final_solution.label_means) out << ' ' << format_double(v);
        out << "\ncheckpoints";
        for (const auto& c : m.checkpoints) out << ' ' << c.checkpoint.value_or(0);
        out << fmt::format("\nbeta {}\n", m.beta.empty() ? "no" : "stored");
        if (i < bundle.sketches.size()) {
            const BoundReport r = bound_report(bundle.sketches[i], m.grid);
            out << fmt::format("sketch_rank {}\ndiscarded_sum {}\nscaled_discarded_sum {}\nresolvent_bound",
                               bundle.sketches[i].rank(), format_double(r.discarded_sum),
                               format_double(r.scaled_discarded_sum));
            for (const double b : r.resolvent_bound) out << ' ' << format_double(b);
            out << '\n';
        }
    }
}

void cmd_inspect(const std::string& file, std::ostream& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", file));
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::string_view(magic, 4) == "FABR") {
        inspect_model(file, out);
    } else {
        inspect_matrix(file, out);
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Blocked random-feature ridge regression"};
    app.name("fabr");
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads for linear algebra kernels")->check(CLI::PositiveNumber);

    std::function<void()> action;

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic binary classification dataset");
    s->add_option("--n", synth.n, "Training rows")->required()->check(CLI::PositiveNumber);
    s->add_option("--d", synth.d, "Input dimension")->required()->check(CLI::PositiveNumber);
    s->add_option("--n-test", synth.n_test, "Extra rows written to OUT/test")->check(CLI::NonNegativeNumber);
    s->add_option("--seed", synth.seed, "Dataset seed");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->callback([&] { action = [&] { cmd_synth(synth, out); }; });

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Fit a model and write it to a file");
    add_data_args(*t, train.data, "", "training set");
    t->add_flag("--csv-header", train.data.csv_header, "CSV inputs start with a header row");
    add_plan_args(*t, train.plan);
    add_solver_args(*t, train.solver);
    t->add_flag("--store-beta", train.store_beta, "Also store the primal coefficients");
    t->add_option("--out", train.out, "Model file")->required();
    t->callback([&] { action = [&] { cmd_train(train, out); }; });

    PredictArgs pred;
    auto* p = app.add_subcommand("predict", "Score a feature matrix with a saved model");
    add_data_args(*p, pred.data, "", "rows to score");
    p->add_flag("--csv-header", pred.data.csv_header, "CSV inputs start with a header row");
    p->add_option("--model", pred.model, "Model file")->required();
    p->add_option("--out", pred.out, "Predictions CSV (stdout when omitted)");
    p->add_flag("--all-checkpoints", pred.all_checkpoints, "Emit every stored checkpoint, not only the final fit");
    p->callback([&] { action = [&] { cmd_predict(pred, out); }; });

    VocArgs voc;
    auto* v = app.add_subcommand("voc", "Accuracy across model complexity from a single fitting pass");
    add_data_args(*v, voc.train, "", "training set");
    add_data_args(*v, voc.test, "test-", "test set");
    add_plan_args(*v, voc.plan);
    add_solver_args(*v, voc.solver);
    v->add_option("--out", voc.out, "VoC CSV")->required();
    v->callback([&] { action = [&] { cmd_voc(voc, out); }; });

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Time the multi-shrinkage path against a per-z refit");
    b->add_option("--d", bench.dims, "Input dimensions")->required()->delimiter(',')->check(CLI::PositiveNumber);
    b->add_option("--num-z", bench.num_z, "Grid sizes")->required()->delimiter(',')->check(CLI::PositiveNumber);
    b->add_option("--n", bench.n, "Total rows")->check(CLI::PositiveNumber);
    b->add_option("--n-train", bench.n_train, "Training rows (the rest is test)")->check(CLI::PositiveNumber);
    b->add_option("--reps", bench.reps, "Timed repetitions")->check(CLI::PositiveNumber);
    b->add_option("--seed", bench.seed, "Dataset seed");
    b->add_flag("--no-warmup", bench.no_warmup, "Skip the untimed warm-up run");
    b->add_option("--out", bench.out, "Bench CSV (stdout when omitted)");
    b->callback([&] { action = [&] { cmd_bench(bench, out); }; });

    std::string inspect_file;
    auto* i = app.add_subcommand("inspect", "Describe a model or FABM file");
    i->add_option("file", inspect_file, "Model or matrix file")->required();
    i->callback([&] { action = [&] { cmd_inspect(inspect_file, out); }; });

    for (auto* sub : {s, t, p, v, b, i}) {
        sub->add_option("--threads", threads, "Worker threads for linear algebra kernels")
            ->check(CLI::PositiveNumber);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        set_num_threads(threads);
        if (action) action();
        return kExitOk;
    } catch (const CLI::RequiredError& e) {
        err << "error: " << e.what() << " is required\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const MemoryBudgetError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory; try the low-rank solver (--nu) or a smaller --batch-size\n";
        return kExitData;
    }
}

} // namespace fabr::cli
