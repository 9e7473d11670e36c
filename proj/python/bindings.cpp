#include "commands.hpp"

#include "fabr/ensemble.hpp"
#include "fabr/errors.hpp"
#include "fabr/harness.hpp"
#include "fabr/lowrank_solver.hpp"
#include "fabr/model_io.hpp"
#include "fabr/threading.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace fabr;

namespace {

LabeledDataset make_dataset(const Matrix& x, const Labels& y, std::optional<int> num_classes) {
    LabeledDataset ds;
    ds.features = x;
    ds.labels = y;
    int k = 0;
    for (const int v : y) k = std::max(k, v + 1);
    ds.num_classes = num_classes.value_or(std::max(k, 2));
    validate(ds);
    return ds;
}

FitOptions make_options(const std::vector<Index>& checkpoints, bool demean, const std::string& mode) {
    FitOptions o;
    o.checkpoints = checkpoints;
    o.demean = demean;
    if (mode == "annihilate") {
        o.mode = SpectrumMode::annihilate;
    } else if (mode != "exact") {
        throw DomainError("mode must be 'exact' or 'annihilate', got '" + mode + "'");
    }
    return o;
}

py::list prediction_list(const PredictionSet& pred) {
    py::list out;
    for (const auto& e : pred.entries) {
        py::dict d;
        d["checkpoint"] = e.checkpoint;
        d["complexity"] = e.complexity;
        d["z"] = e.z;
        d["scores"] = e.scores;
        d["classes"] = e.classes;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Random-feature ridge classifier";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<MemoryBudgetError>(m, "MemoryBudgetError", PyExc_MemoryError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<FeaturePlan>(m, "FeaturePlan")
        .def(py::init([](Index p, Index p1, Index input_dim, std::uint64_t seed, const std::string& activation,
                         double weight_scale) {
                 FeaturePlan plan;
                 plan.total_features = p;
                 plan.block_width = p1;
                 plan.input_dim = input_dim;
                 plan.master_seed = seed;
                 plan.activation = parse_activation(activation);
                 plan.weight_scale = weight_scale;
                 plan.validate();
                 return plan;
             }),
             py::arg("p"), py::arg("p1"), py::arg("input_dim"), py::arg("seed") = 0, py::arg("activation") = "relu",
             py::arg("weight_scale") = 1.0)
        .def_readonly("p", &FeaturePlan::total_features)
        .def_readonly("p1", &FeaturePlan::block_width)
        .def_readonly("input_dim", &FeaturePlan::input_dim)
        .def_readonly("seed", &FeaturePlan::master_seed)
        .def_readonly("weight_scale", &FeaturePlan::weight_scale)
        .def_property_readonly("activation", [](const FeaturePlan& p) { return std::string(to_string(p.activation)); })
        .def_property_readonly("blocks", &block_count)
        .def(
            "features", [](const FeaturePlan& plan, const Matrix& x) { return generate_all(x, plan); }, py::arg("x"),
            "All P features of x (N x P).");

    py::class_<ModelBundle>(m, "Model")
        .def_property_readonly("members", [](const ModelBundle& b) { return b.members.size(); })
        .def_property_readonly("kind",
                               [](const ModelBundle& b) {
                                   return b.members.front().kind == SolverKind::lowrank ? "lowrank" : "full";
                               })
        .def_property_readonly("z", [](const ModelBundle& b) {
            const auto v = b.members.front().grid.values();
            return std::vector<double>(v.begin(), v.end());
        })
        .def_property_readonly("plan", [](const ModelBundle& b) { return b.members.front().plan; })
        .def_property_readonly("discarded_sum",
                               [](const ModelBundle& b) -> std::optional<double> {
                                   if (b.sketches.empty()) return std::nullopt;
                                   return b.sketches.front().discarded_sum;
                               })
        .def(
            "predict",
            [](const ModelBundle& b, const Matrix& x, bool all_checkpoints) {
                const PredictMode mode = all_checkpoints ? PredictMode::all_checkpoints : PredictMode::final_only;
                PredictionSet pred;
                {
                    py::gil_scoped_release release;
                    pred = predict_ensemble(b.members, x, mode);
                }
                return prediction_list(pred);
            },
            py::arg("x"), py::arg("all_checkpoints") = false,
            "List of dicts (checkpoint, complexity, z, scores, classes) in (checkpoint, z) order.")
        .def("save", [](const ModelBundle& b, const std::filesystem::path& path) { save_model(b, path); });

    m.def(
        "fit",
        [](const Matrix& x, const Labels& y, const FeaturePlan& plan, const std::vector<double>& z,
           std::optional<Index> nu, std::optional<Index> batch_size, std::uint64_t shuffle_seed,
           const std::vector<Index>& checkpoints, bool demean, const std::string& mode,
           std::optional<int> num_classes) {
            const LabeledDataset ds = make_dataset(x, y, num_classes);
            const RidgeGrid grid(z);
            const FitOptions options = make_options(checkpoints, demean, mode);
            py::gil_scoped_release release;
            ModelBundle bundle;
            if (batch_size) {
                const EnsembleConfig cfg{*batch_size, nu ? SolverKind::lowrank : SolverKind::full, nu.value_or(0),
                                         shuffle_seed};
                bundle.members = fit_ensemble(ds, plan, grid, cfg, options);
            } else if (nu) {
                LowRankFit f = fit_lowrank(ds, plan, grid, *nu, options);
                bundle.members.push_back(std::move(f.model));
                bundle.sketches.push_back(std::move(f.sketch));
            } else {
                bundle.members.push_back(fit(ds, plan, grid, options).model);
            }
            return bundle;
        },
        py::arg("x"), py::arg("y"), py::arg("plan"), py::arg("z"), py::kw_only(), py::arg("nu") = py::none(),
        py::arg("batch_size") = py::none(), py::arg("shuffle_seed") = 0,
        py::arg("checkpoints") = std::vector<Index>{}, py::arg("demean") = true, py::arg("mode") = "exact",
        py::arg("num_classes") = py::none(),
        "Fits the exact solver, the rank-nu sketch (nu) or a mini-batch ensemble (batch_size).");

    m.def("load_model", [](const std::filesystem::path& path) { return load_model(path); }, py::arg("path"));

    m.def(
        "synth",
        [](Index n, Index d, std::uint64_t seed) {
            LabeledDataset ds = synth_classification(n, d, seed);
            return py::make_tuple(ds.features, ds.labels);
        },
        py::arg("n"), py::arg("d"), py::arg("seed") = 0, "Synthetic binary task: (features N x d, labels).");

    m.def(
        "voc",
        [](const Matrix& x, const Labels& y, const Matrix& x_test, const Labels& y_test, const FeaturePlan& plan,
           const std::vector<double>& z, std::vector<Index> checkpoints, std::optional<Index> nu,
           std::optional<Index> batch_size) {
            const LabeledDataset train = make_dataset(x, y, std::nullopt);
            LabeledDataset test = make_dataset(x_test, y_test, train.num_classes);
            if (checkpoints.empty()) {
                for (Index k = 1; k <= block_count(plan); ++k) checkpoints.push_back(k);
            }
            SolverChoice choice;
            choice.kind = nu ? SolverKind::lowrank : SolverKind::full;
            choice.rank_cap = nu.value_or(0);
            choice.batch_size = batch_size.value_or(0);
            VocCurve curve;
            {
                py::gil_scoped_release release;
                curve = run_voc(train, test, plan, RidgeGrid(z), checkpoints, choice);
            }
            py::list rows;
            for (const auto& r : curve.rows) {
                py::dict d;
                d["checkpoint"] = r.checkpoint;
                d["complexity"] = r.complexity;
                d["z"] = r.z;
                d["train_acc"] = r.train_acc;
                d["test_acc"] = r.test_acc;
                rows.append(d);
            }
            return py::make_tuple(rows, curve.threshold_checkpoint);
        },
        py::arg("x"), py::arg("y"), py::arg("x_test"), py::arg("y_test"), py::arg("plan"), py::arg("z"),
        py::kw_only(), py::arg("checkpoints") = std::vector<Index>{}, py::arg("nu") = py::none(),
        py::arg("batch_size") = py::none(), "Accuracy per (checkpoint, z) and the checkpoint nearest c = 1.");

    m.def("accuracy", [](const Labels& p, const Labels& t) { return accuracy(p, t); }, py::arg("predicted"),
          py::arg("truth"));

    m.def("set_num_threads", &set_num_threads, py::arg("threads"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one fabr command in-process: (exit code, stdout, stderr).");
}
