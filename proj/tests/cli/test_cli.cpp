#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "../unit/fixtures.hpp"
#include "wsgat/graph.hpp"
#include "wsgat/report.hpp"

namespace fs = std::filesystem;
using namespace wsgat;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" WSGAT_CLI "' " + args + " > '" + out.string() +
                            "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

void write_graph(const fs::path& p, const graph::SignedWeightedGraph& g) {
    std::ofstream out(p, std::ios::binary);
    graph::write_tsv3(g, out);
}

const char* kFastConfig =
    "hidden = 8\n"
    "attention_hidden = 8\n"
    "head_hidden = 16\n"
    "lr = 0.01\n"
    "epochs = 15\n"
    "sse_dim = 4\n";

}  // namespace

TEST_CASE("ingest prints stats and is idempotent") {
    const auto dir = test::scratch_dir("cli_ingest");
    write(dir / "raw.csv", "SOURCE,TARGET,RATING,TIME\n1,2,4,100\n2,3,-10,101\n3,1,1,102\n1,2,5,103\n");
    const auto first = cli("ingest raw.csv --format csv4 --name toy --out a", dir);
    REQUIRE(first.code == 0);
    CHECK(first.out.find("3 nodes, 3 edges, 66.67% positive") != std::string::npos);
    const auto second = cli("ingest a/toy.tsv --out b", dir);
    REQUIRE(second.code == 0);
    CHECK(slurp(dir / "a/toy.tsv") == slurp(dir / "b/toy.tsv"));
    CHECK(first.out == second.out);
}

TEST_CASE("ingest errors map to exit codes") {
    const auto dir = test::scratch_dir("cli_ingest_err");
    write(dir / "empty.tsv", "");
    const auto empty = cli("ingest empty.tsv", dir);
    CHECK(empty.code == 8);
    CHECK(empty.err.find("no edges") != std::string::npos);

    write(dir / "bad.tsv", "a\tb\t1\na\tb\n");
    const auto bad = cli("ingest bad.tsv", dir);
    CHECK(bad.code == 2);
    CHECK(bad.err.find("bad.tsv:2:") != std::string::npos);

    CHECK(cli("ingest missing.tsv", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
}

TEST_CASE("train writes checkpoint, report record and csv row; output is byte-stable") {
    const auto dir = test::scratch_dir("cli_train");
    write_graph(dir / "toy.tsv", test::faction_graph(50, 300, 1));
    write(dir / "fast.cfg", kFastConfig);
    const auto a = cli("train signed-weight toy.tsv fast.cfg --seed 1 --no-wall-time --out r1", dir);
    REQUIRE(a.code == 0);
    const auto b = cli("train signed-weight toy.tsv --config fast.cfg --seed 1 --no-wall-time --out r2", dir);
    REQUIRE(b.code == 0);
    for (const char* f : {"report.jsonl", "report.csv", "model.ckpt"}) {
        INFO(f);
        CHECK(fs::file_size(dir / "r1" / f) > 0);
        CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
    }
    const auto r = report::from_json_line(slurp(dir / "r1/report.jsonl"));
    CHECK(r.task == "signed-weight");
    CHECK(r.dataset == "toy");
    CHECK(r.seed == 1);
    CHECK(r.mae.has_value());
    CHECK(r.auc > 0.0);
    CHECK(r.wall_s == 0.0);
    CHECK(a.out == slurp(dir / "r1/report.jsonl"));
}

TEST_CASE("train errors map to exit codes") {
    const auto dir = test::scratch_dir("cli_train_err");
    write(dir / "pos.tsv", "a\tb\t1\nb\tc\t2\nc\ta\t1\na\tc\t3\nc\td\t1\nd\ta\t1\n");
    write(dir / "fast.cfg", kFastConfig);
    const auto degenerate = cli("train sign pos.tsv fast.cfg", dir);
    CHECK(degenerate.code == 3);
    CHECK(degenerate.err.find("negative") != std::string::npos);
    CHECK(cli("train signed-weight pos.tsv fast.cfg", dir).code == 3);
    CHECK(cli("train colour pos.tsv fast.cfg", dir).code == 1);

    write(dir / "bad.cfg", "colour = blue\n");
    CHECK(cli("train weight pos.tsv bad.cfg", dir).code == 1);

    write_graph(dir / "toy.tsv", test::faction_graph(30, 120, 2));
    write(dir / "slow_sse.cfg", std::string(kFastConfig) + "features = sse\nsse_iters = 1\nsse_tol = 1e-15\n");
    CHECK(cli("train weight toy.tsv slow_sse.cfg", dir).code == 4);
}

TEST_CASE("reproduce: missing datasets are listed") {
    const auto dir = test::scratch_dir("cli_reproduce_missing");
    const auto r = cli("reproduce 4 --data nowhere", dir);
    CHECK(r.code == 7);
    CHECK(r.err.find("bitcoin-alpha.tsv") != std::string::npos);
    CHECK(r.err.find("bitcoin-otc.tsv") != std::string::npos);
}

TEST_CASE("reproduce table 4 writes a summary that round-trips") {
    const auto dir = test::scratch_dir("cli_reproduce");
    fs::create_directories(dir / "data");
    write_graph(dir / "data/bitcoin-alpha.tsv", test::faction_graph(40, 200, 3));
    write_graph(dir / "data/bitcoin-otc.tsv", test::faction_graph(40, 220, 4));
    write(dir / "fast.cfg", kFastConfig);
    const auto r = cli("reproduce 4 --data data --seeds 2 --jobs 2 --config fast.cfg --out res", dir);
    REQUIRE(r.code == 0);
    std::ifstream csv(dir / "res/table4.csv");
    const auto rows = report::read_summary_csv(csv);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].dataset == "bitcoin-alpha");
    CHECK(rows[1].dataset == "bitcoin-otc");
    CHECK(rows[0].seeds == 2);
    CHECK(rows[0].mae_mean.has_value());

    std::ifstream runs(dir / "res/table4_runs.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(runs, line)) {
        CHECK(report::from_json_line(line).task == "signed-weight");
        ++n;
    }
    CHECK(n == 4);

    const auto one = cli("reproduce 4 --data data --seeds 1 --datasets bitcoin-otc --config fast.cfg --out res1", dir);
    REQUIRE(one.code == 0);
    std::ifstream csv1(dir / "res1/table4.csv");
    const auto single = report::read_summary_csv(csv1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].auc_std == 0.0);
    CHECK(single[0].f1_std == 0.0);
    CHECK(single[0].mae_std == 0.0);
}

TEST_CASE("verify passes on a clean build and names an injected fault") {
    const auto dir = test::scratch_dir("cli_verify");
    const auto clean = cli("verify gradcheck", dir);
    CHECK(clean.code == 0);
    CHECK(clean.out.find("FAIL") == std::string::npos);

    const auto faulty = cli("verify gradcheck --inject-fault tanh", dir);
    CHECK(faulty.code == 6);
    CHECK(faulty.out.find("FAIL autodiff gradient:tanh") != std::string::npos);

    CHECK(cli("verify everything", dir).code == 1);
}
