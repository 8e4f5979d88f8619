#include <algorithm>
#include <atomic>
#include <exception>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "verify/suites.hpp"
#include "wsgat/autodiff/checkpoint.hpp"
#include "wsgat/autodiff/tape.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/graph.hpp"
#include "wsgat/metrics.hpp"
#include "wsgat/pipelines.hpp"
#include "wsgat/report.hpp"

namespace fs = std::filesystem;
using namespace wsgat;

namespace {

// Exit codes. Stable; documented in README.
enum Exit : int {
    kOk = 0,
    kUsage = 1,
    kParse = 2,
    kDegenerate = 3,
    kConvergence = 4,
    kNumeric = 5,
    kVerifyFailed = 6,
    kMissingData = 7,
    kEmptyGraph = 8,
    kFailure = 9,
};

struct MissingDataset : Error {
    using Error::Error;
};

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string stats_line(const graph::SignedWeightedGraph& g) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", 100.0 * g.positive_fraction());
    return std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) + " edges, " +
           pct + "% positive";
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
    std::string source;
    std::string format = "tsv3";
    std::string name;
    std::string out = ".";
    bool symmetrize = false;
};

int cmd_ingest(const IngestArgs& a) {
    graph::LoadOptions opts;
    opts.symmetrize = a.symmetrize;
    graph::LoadStats stats;
    const auto g = graph::load_edge_list(a.source, graph::parse_edge_format(a.format), opts, &stats);
    const std::string name = a.name.empty() ? fs::path(a.source).stem().string() : a.name;
    std::ostringstream text;
    graph::write_tsv3(g, text);
    const fs::path target = fs::path(a.out) / (name + ".tsv");
    write_file(target, text.str());
    std::cout << stats_line(g) << '\n';
    std::cerr << "wrote " << target.string() << " (" << stats.duplicates_collapsed
              << " duplicates collapsed, " << stats.self_loops_dropped << " self-loops dropped)\n";
    return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string task;
    std::string graph;
    std::string config;
    std::string dataset;
    std::string out = "run";
    std::uint64_t seed = 0;
    bool no_wall_time = false;
    bool native_mae = false;
};

int cmd_train(const TrainArgs& a) {
    const auto task = pipeline::parse_task(a.task);
    const RunConfig cfg = load_config(a.config);
    const auto g = graph::load_edge_list(a.graph, graph::EdgeFormat::tsv3);
    pipeline::TrainOptions opts;
    opts.dataset = a.dataset.empty() ? fs::path(a.graph).stem().string() : a.dataset;
    opts.seed = a.seed;
    auto result = pipeline::train(task, g, cfg, opts);
    if (a.no_wall_time) result.report.wall_s = 0.0;

    const fs::path out(a.out);
    fs::create_directories(out);
    autodiff::save_checkpoint(out / "model.ckpt", result.model.checkpoint_arrays());
    const std::string json = report::to_json_line(result.report);
    write_file(out / "report.jsonl", json + "\n");
    write_file(out / "report.csv", report::csv_header() + "\n" + report::to_csv_row(result.report) + "\n");
    std::cout << json << '\n';
    if (a.native_mae && result.report.mae) {
        // Model weights live on w / max|w|; undo that scale.
        std::cerr << "mae (native scale): " << report::format_real(*result.report.mae * g.max_abs_weight())
                  << '\n';
    }
    return kOk;
}

// ---- reproduce --------------------------------------------------------------

struct ReproduceArgs {
    int table = 0;
    std::string data = "data";
    std::string config;
    std::string out = "results";
    std::vector<std::string> datasets;
    std::size_t seeds = 5;
    std::size_t jobs = 1;
    bool no_wall_time = false;
};

std::vector<std::string> table_datasets(int table) {
    switch (table) {
        case 2: return {"bitcoin-alpha", "bitcoin-otc", "epinions"};
        case 3: return {"advogato", "bitcoin-alpha", "bitcoin-otc"};
        case 4: return {"bitcoin-alpha", "bitcoin-otc"};
    }
    throw ConfigError("table must be 2, 3 or 4");
}

pipeline::Task table_task(int table) {
    return table == 2 ? pipeline::Task::sign
                      : (table == 3 ? pipeline::Task::weight : pipeline::Task::signed_weight);
}

int cmd_reproduce(const ReproduceArgs& a) {
    const auto datasets = a.datasets.empty() ? table_datasets(a.table) : a.datasets;
    const auto task = table_task(a.table);
    const RunConfig cfg = load_config(a.config);
    if (a.seeds == 0) throw ConfigError("--seeds must be >= 1");

    std::vector<std::string> missing;
    for (const auto& d : datasets)
        if (!fs::exists(fs::path(a.data) / (d + ".tsv"))) missing.push_back((fs::path(a.data) / (d + ".tsv")).string());
    if (!missing.empty()) {
        std::string msg = "missing dataset files:";
        for (const auto& m : missing) msg += "\n  " + m;
        msg += "\ncreate them with `wsgat ingest <raw file> --name <dataset> --out " + a.data +
               "` (see README for download locations)";
        throw MissingDataset(msg);
    }

    std::map<std::string, graph::SignedWeightedGraph> graphs;
    for (const auto& d : datasets)
        graphs.emplace(d, graph::load_edge_list(fs::path(a.data) / (d + ".tsv"), graph::EdgeFormat::tsv3));

    struct Job {
        std::string dataset;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& d : datasets)
        for (std::uint64_t s = 1; s <= a.seeds; ++s) jobs.push_back({d, s});
    std::vector<pipeline::EvalReport> reports(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log;
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            try {
                pipeline::TrainOptions opts{jobs[k].dataset, jobs[k].seed};
                reports[k] = pipeline::train(task, graphs.at(jobs[k].dataset), cfg, opts).report;
                if (a.no_wall_time) reports[k].wall_s = 0.0;
                std::lock_guard lock(log);
                std::cerr << report::to_json_line(reports[k]) << '\n';
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::max<std::size_t>(1, a.jobs); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (std::size_t k = 0; k < jobs.size(); ++k)
        if (errors[k]) {
            std::cerr << jobs[k].dataset << " seed " << jobs[k].seed << " failed\n";
            std::rethrow_exception(errors[k]);
        }

    std::vector<report::Summary> rows;
    std::string runs;
    for (const auto& d : datasets) {
        std::vector<pipeline::EvalReport> mine;
        for (std::size_t k = 0; k < jobs.size(); ++k)
            if (jobs[k].dataset == d) {
                mine.push_back(reports[k]);
                runs += report::to_json_line(reports[k]) + "\n";
            }
        rows.push_back(report::summarize(mine));
    }
    std::ostringstream csv;
    report::write_summary_csv(csv, rows);
    const fs::path out(a.out);
    write_file(out / ("table" + std::to_string(a.table) + ".csv"), csv.str());
    write_file(out / ("table" + std::to_string(a.table) + "_runs.jsonl"), runs);
    std::cout << csv.str();
    return kOk;
}

// ---- verify -----------------------------------------------------------------

int cmd_verify(const std::string& suite, const std::string& fault) {
    if (!fault.empty()) autodiff::testing::set_gradient_fault(fault);
    const auto results = verify::run_suite(suite);
    autodiff::testing::clear_gradient_fault();
    std::size_t failed = 0;
    for (const auto& r : results) {
        failed += !r.passed;
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.module << " " << r.property
                  << " observed=" << report::format_real(r.observed)
                  << " threshold=" << report::format_real(r.threshold);
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << '\n';
    }
    std::cout << results.size() - failed << "/" << results.size() << " properties passed\n";
    return failed == 0 ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wsgat: graph attention for signed, weighted networks"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    std::string config;
    std::string out;

    IngestArgs ingest;
    auto* ing = app.add_subcommand("ingest", "Parse a raw edge list into canonical tsv3");
    ing->add_option("source", ingest.source, "Raw edge-list file")->required()->check(CLI::ExistingFile);
    ing->add_option("--format", ingest.format, "tsv3 or csv4")->check(CLI::IsMember({"tsv3", "csv4"}));
    ing->add_option("--name", ingest.name, "Output stem (default: source file stem)");
    ing->add_flag("--symmetrize", ingest.symmetrize, "Emit both arcs for every input link");

    TrainArgs tr;
    auto* trn = app.add_subcommand("train", "Train and evaluate one task on one graph");
    trn->add_option("task", tr.task, "sign, weight or signed-weight")->required();
    trn->add_option("graph", tr.graph, "Canonical tsv3 graph")->required()->check(CLI::ExistingFile);
    trn->add_option("config_file", tr.config, "Run config (same as --config)")->check(CLI::ExistingFile);
    trn->add_option("--dataset", tr.dataset, "Dataset name in the report (default: graph stem)");
    trn->add_flag("--no-wall-time", tr.no_wall_time, "Report wall_s = 0 for byte-stable output");
    trn->add_flag("--native-mae", tr.native_mae, "Also print MAE on the input weight range");

    ReproduceArgs rp;
    auto* rep = app.add_subcommand("reproduce", "Mean and std over seeds for one result table");
    rep->add_option("table", rp.table, "2 (sign), 3 (weight) or 4 (signed weight)")->required()->check(CLI::IsMember({2, 3, 4}));
    rep->add_option("--data", rp.data, "Directory holding <dataset>.tsv files");
    rep->add_option("--seeds", rp.seeds, "Number of seeds (1..N)");
    rep->add_option("--datasets", rp.datasets, "Subset of the table's datasets")->delimiter(',');
    rep->add_option("--jobs", rp.jobs, "Parallel runs");
    rep->add_flag("--no-wall-time", rp.no_wall_time, "Report wall_s = 0");

    std::string suite;
    std::string fault;
    auto* ver = app.add_subcommand("verify", "Run invariant suites");
    ver->add_option("suite", suite, "gradcheck, oracle, metrics or all")->required()
        ->check(CLI::IsMember({"gradcheck", "oracle", "metrics", "all"}));
    ver->add_option("--inject-fault", fault, "Scale the gradient of one op (test fixture)")->group("");

    for (auto* sub : {ing, trn, rep, ver}) {
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--config", config, "Run config file")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*ing) {
            if (!out.empty()) ingest.out = out;
            return cmd_ingest(ingest);
        }
        if (*trn) {
            tr.seed = seed;
            if (!config.empty()) tr.config = config;
            if (!out.empty()) tr.out = out;
            return cmd_train(tr);
        }
        if (*rep) {
            rp.config = config;
            if (!out.empty()) rp.out = out;
            return cmd_reproduce(rp);
        }
        return cmd_verify(suite, fault);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kParse;
    } catch (const EmptyGraphError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEmptyGraph;
    } catch (const DegenerateTaskError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDegenerate;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConvergence;
    } catch (const NumericFault& e) {
        std::cerr << "error: numeric fault: " << e.what() << '\n';
        return kNumeric;
    } catch (const MissingDataset& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingData;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
