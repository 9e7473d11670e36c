#include "commands.hpp"

#include "fabr/data_io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using fabr::cli::run_cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Train table rows as "checkpoint,z,acc", header dropped.
std::vector<std::string> table_rows(const std::string& s) {
    std::vector<std::string> rows;
    std::istringstream in(s);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) rows.push_back(line);
    return rows;
}


} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a deterministic dataset") {
    oracle::TempDir dir("cli_synth");
    const auto a = (dir / "a").string();
    const auto b = (dir / "b").string();
    REQUIRE(run({"synth", "--n", "5000", "--d", "4", "--seed", "3", "--out", a}).code == 0);
    REQUIRE(run({"synth", "--n", "5000", "--d", "4", "--seed", "3", "--out", b}).code == 0);
    REQUIRE(run({"synth", "--n", "5000", "--d", "4", "--seed", "3", "--out", (dir / "c").string(), "--n-test", "10"})
                .code == 0);
    CHECK(oracle::read_file(dir / "a/features.fabm") == oracle::read_file(dir / "b/features.fabm"));
    CHECK(oracle::read_file(dir / "a/labels.fabm") == oracle::read_file(dir / "b/labels.fabm"));
    const auto x = fabr::load_matrix(dir / "a/features.fabm");
    CHECK(x.rows() == 5000);
    CHECK(x.cols() == 4);
    CHECK(fabr::load_matrix(dir / "c/test/features.fabm").rows() == 10);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run({"synth", "--n", "10", "--d", "2"}).code == 2);
    CHECK(run({"nonsense"}).code == 2);
    oracle::TempDir dir("cli_usage");
    REQUIRE(run({"synth", "--n", "20", "--d", "2", "--out", (dir / "d").string()}).code == 0);
    CHECK(run({"train", "--data", (dir / "d").string(), "--p", "8", "--p1", "0", "--z", "1",
               "--out", (dir / "m").string()})
              .code == 2);
    CHECK(run({"train", "--data", (dir / "d").string(), "--p", "8", "--p1", "4", "--out", (dir / "m").string()})
              .code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("data and domain errors exit 3") {
    oracle::TempDir dir("cli_data");
    const auto d = (dir / "d").string();
    REQUIRE(run({"synth", "--n", "20", "--d", "2", "--out", d}).code == 0);
    const auto m = (dir / "m.fabr").string();
    auto r = run({"train", "--data", (dir / "missing").string(), "--p", "8", "--p1", "4", "--z", "1", "--out", m});
    CHECK(r.code == 3);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(run({"train", "--data", d, "--p", "8", "--p1", "4", "--z", "2,1", "--out", m}).code == 3);
    CHECK(run({"inspect", (dir / "nothing").string()}).code == 3);
}

TEST_CASE("train, predict, inspect") {
    oracle::TempDir dir("cli_train");
    const auto d = (dir / "d").string();
    const auto m = (dir / "m.fabr").string();
    REQUIRE(run({"synth", "--n", "60", "--d", "3", "--seed", "2", "--n-test", "0", "--out", d}).code == 0);
    const auto t = run({"train", "--data", d, "--p", "40", "--p1", "10", "--z", "0.01,0.1,1,10", "--out", m});
    REQUIRE(t.code == 0);
    const auto train_rows = table_rows(t.out);
    CHECK(train_rows.size() == 4);

    const auto csv = (dir / "pred.csv").string();
    const auto p = run({"predict", "--model", m, "--data", d, "--out", csv});
    REQUIRE(p.code == 0);
    const auto acc_rows = table_rows(p.out);
    REQUIRE(acc_rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(acc_rows[i] == train_rows[i]);
    const std::string pred = oracle::read_file(csv);
    CHECK(pred.substr(0, pred.find('\n')) == "checkpoint,row,z,class,score_0,score_1");
    CHECK(lines(pred) == 1 + 4 * 60);

    const auto again = run({"predict", "--model", m, "--features", d + "/features.fabm"});
    CHECK(again.code == 0);
    CHECK(again.out == pred);

    const auto info = run({"inspect", m});
    CHECK(info.code == 0);
    CHECK(info.out.find("kind full") != std::string::npos);
    CHECK(info.out.find("p 40") != std::string::npos);
    const auto minfo = run({"inspect", d + "/features.fabm"});
    CHECK(minfo.out.find("matrix 60 x 3") != std::string::npos);
}

TEST_CASE("empty test file gives a header-only prediction") {
    oracle::TempDir dir("cli_empty");
    const auto d = (dir / "d").string();
    const auto m = (dir / "m.fabr").string();
    REQUIRE(run({"synth", "--n", "20", "--d", "2", "--out", d}).code == 0);
    REQUIRE(run({"train", "--data", d, "--p", "8", "--p1", "4", "--z", "1", "--out", m}).code == 0);
    fabr::save_matrix(fabr::Matrix(0, 2), dir / "empty.fabm");
    const auto r = run({"predict", "--model", m, "--features", (dir / "empty.fabm").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "checkpoint,row,z,class,score_0,score_1\n");
}

TEST_CASE("lowrank and ensemble models") {
    oracle::TempDir dir("cli_lr");
    const auto d = (dir / "d").string();
    REQUIRE(run({"synth", "--n", "40", "--d", "2", "--out", d}).code == 0);
    const auto lr = (dir / "lr.fabr").string();
    REQUIRE(run({"train", "--data", d, "--p", "16", "--p1", "4", "--z", "1", "--nu", "5", "--out", lr}).code == 0);
    const auto info = run({"inspect", lr});
    CHECK(info.out.find("kind lowrank") != std::string::npos);
    CHECK(info.out.find("resolvent_bound") != std::string::npos);
    const auto ens = (dir / "ens.fabr").string();
    REQUIRE(run({"train", "--data", d, "--p", "16", "--p1", "4", "--z", "1", "--batch-size", "10", "--out", ens})
                .code == 0);
    CHECK(run({"inspect", ens}).out.find("members 4") != std::string::npos);
}

TEST_CASE("voc writes checkpoints x grid rows") {
    oracle::TempDir dir("cli_voc");
    const auto d = (dir / "d").string();
    REQUIRE(run({"synth", "--n", "40", "--d", "2", "--n-test", "20", "--out", d}).code == 0);
    const auto csv = (dir / "voc.csv").string();
    const auto r = run({"voc", "--data", d, "--test-data", d + "/test", "--p", "80", "--p1", "20", "--z",
                        "0.001,0.1,10", "--out", csv});
    REQUIRE(r.code == 0);
    CHECK(lines(oracle::read_file(csv)) == 1 + 4 * 3);
    CHECK(r.out.find("checkpoint 2") != std::string::npos);
}

TEST_CASE("bench record count") {
    const auto r = run({"bench", "--d", "3,4,5", "--num-z", "1,2", "--n", "50", "--n-train", "40", "--reps", "1"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 1 + 6 + 6);
    std::size_t engine = 0;
    for (const auto& row : table_rows(r.out)) engine += row.rfind("engine,", 0) == 0;
    CHECK(engine == 6);
}

TEST_CASE("memory guard exits 3 and suggests the low-rank solver") {
    oracle::TempDir dir("cli_mem");
    const auto d = (dir / "d").string();
    REQUIRE(run({"synth", "--n", "100", "--d", "2", "--out", d}).code == 0);
    ::setenv("FABR_MEM_BUDGET_BYTES", "4096", 1);
    const auto r = run({"train", "--data", d, "--p", "8", "--p1", "4", "--z", "1", "--out", (dir / "m").string()});
    const auto lr =
        run({"train", "--data", d, "--p", "8", "--p1", "4", "--z", "1", "--nu", "4", "--out", (dir / "m2").string()});
    ::unsetenv("FABR_MEM_BUDGET_BYTES");
    CHECK(r.code == 3);
    CHECK(r.err.find("--nu") != std::string::npos);
    CHECK(lr.code == 0);
}

}
