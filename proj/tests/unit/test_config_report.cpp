#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "wsgat/config.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/report.hpp"

using namespace wsgat;
using wsgat::pipeline::EvalReport;

TEST_CASE("config parses documented keys, comments and lists") {
    const auto c = RunConfig::parse(
        "# comment\n"
        "layers = 3\n"
        "hidden=16   # trailing\n"
        "heads = 2\n"
        "head_merge = mean\n"
        "attention_hidden = 8, 4\n"
        "lr = 5e-4\n"
        "epochs = 12\n"
        "patience = 4\n"
        "lambda_weight = 0.5\n"
        "features = degree_onehot_log\n"
        "sse_dim = 16\n"
        "projection = false\n"
        "self_loop_weight = -1\n");
    CHECK(c.layers == 3);
    CHECK(c.hidden == 16);
    CHECK(c.heads == 2);
    CHECK(c.head_merge == "mean");
    CHECK(c.attention_hidden == std::vector<std::size_t>{8, 4});
    CHECK(c.lr == 5e-4);
    CHECK(c.epochs == 12);
    CHECK(c.patience == 4);
    CHECK(c.lambda_weight == 0.5);
    CHECK(c.features == "degree_onehot_log");
    CHECK(c.sse_dim == 16);
    CHECK_FALSE(c.projection);
    CHECK(c.self_loop_weight == -1.0);
}

TEST_CASE("config defaults") {
    const RunConfig c;
    CHECK(c.layers == 2);
    CHECK(c.hidden == 64);
    CHECK(c.heads == 1);
    CHECK(c.head_layers == 3);
    CHECK(c.head_hidden == 100);
    CHECK(c.lr == 1e-3);
    CHECK(c.epochs == 300);
    CHECK(c.patience == 30);
    CHECK(c.val_fraction == 0.1);
    CHECK(c.train_fraction == 0.8);
    CHECK(c.sse_dim == 32);
    CHECK(c.feature_dim == 8);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(RunConfig::parse("colour = blue\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("layers = two\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("layers\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("projection = maybe\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("head_merge = sum\n").validate(), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("train_fraction = 1\n").validate(), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/wsgat.cfg"), ConfigError);
}

TEST_CASE("config text round trip and digest") {
    RunConfig c;
    c.hidden = 12;
    c.attention_hidden = {};
    c.lr = 0.1 + 0.2;
    const auto back = RunConfig::parse(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK(back.lr == c.lr);
    CHECK(back.digest() == c.digest());
    CHECK(c.digest().size() == 16);
    RunConfig d = c;
    d.epochs += 1;
    CHECK(d.digest() != c.digest());
}

TEST_CASE("shipped default config parses to the built-in defaults") {
    const auto c = RunConfig::load(WSGAT_SOURCE_DIR "/configs/default.cfg");
    CHECK(c.to_text() == RunConfig{}.to_text());
}

namespace {

EvalReport sample(std::uint64_t seed, double auc, std::optional<double> mae) {
    EvalReport r;
    r.task = mae ? "weight" : "sign";
    r.dataset = "toy";
    r.seed = seed;
    r.auc = auc;
    r.f1 = 0.1 + auc / 3;
    r.mae = mae;
    r.test_positive = 10;
    r.test_negative = 7;
    r.config_digest = "0123456789abcdef";
    r.epochs_run = 30;
    r.best_epoch = 21;
    r.wall_s = 1.25;
    return r;
}

void check_same(const EvalReport& a, const EvalReport& b) {
    CHECK(a.task == b.task);
    CHECK(a.dataset == b.dataset);
    CHECK(a.seed == b.seed);
    CHECK(a.auc == b.auc);
    CHECK(a.f1 == b.f1);
    CHECK(a.mae == b.mae);
}

}  // namespace

TEST_CASE("json line round trip keeps key order and exact values") {
    const EvalReport r = sample(3, 0.1 + 0.2, 1.0 / 3.0);
    const std::string line = report::to_json_line(r);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(line.find("\"task\"") < line.find("\"dataset\""));
    CHECK(line.find("\"mae\"") < line.find("\"epochs_run\""));
    CHECK(line.find("\"wall_s\"") != std::string::npos);
    const EvalReport back = report::from_json_line(line);
    check_same(r, back);
    CHECK(back.epochs_run == 30);
    CHECK(back.best_epoch == 21);
    CHECK(back.config_digest == r.config_digest);

    const EvalReport sign = sample(1, 0.8, std::nullopt);
    CHECK(report::to_json_line(sign).find("\"mae\":null") != std::string::npos);
    CHECK_FALSE(report::from_json_line(report::to_json_line(sign)).mae.has_value());
    CHECK_THROWS(report::from_json_line("{not json"));
}

TEST_CASE("csv row round trip") {
    CHECK(report::csv_header() == "task,dataset,seed,auc,f1,mae");
    for (const auto& r : {sample(2, 0.123456789012345, 0.07), sample(3, 2.0 / 3.0, std::nullopt)})
        check_same(r, report::from_csv_row(report::to_csv_row(r)));
}

TEST_CASE("summary over seeds") {
    const auto one = report::summarize({sample(1, 0.8, 0.1)});
    CHECK(one.seeds == 1);
    CHECK(one.auc_std == 0.0);
    CHECK(one.f1_std == 0.0);
    CHECK(one.mae_std == 0.0);

    const auto two = report::summarize({sample(1, 0.8, 0.1), sample(2, 0.6, 0.3)});
    CHECK(two.auc_mean == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(two.auc_std == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(*two.mae_mean == doctest::Approx(0.2).epsilon(1e-15));

    EvalReport other = sample(3, 0.5, 0.2);
    other.dataset = "other";
    CHECK_THROWS(report::summarize({sample(1, 0.8, 0.1), other}));

    std::stringstream csv;
    const auto sign = report::summarize({sample(1, 0.8, std::nullopt), sample(2, 0.9, std::nullopt)});
    report::write_summary_csv(csv, {two, sign});
    CHECK(csv.str().rfind(report::summary_csv_header(), 0) == 0);
    const auto back = report::read_summary_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == two);
    CHECK(back[1] == sign);
}

TEST_CASE("format_real is the shortest round-trip text") {
    CHECK(report::format_real(0.5) == "0.5");
    CHECK(report::format_real(0.1 + 0.2) == "0.30000000000000004");
    CHECK(std::stod(report::format_real(1.0 / 3.0)) == 1.0 / 3.0);
}
