#include "wsgat/report.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wsgat/errors.hpp"

namespace wsgat::report {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_csv(const std::string& row) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(row);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!row.empty() && row.back() == ',') fields.emplace_back();
    return fields;
}

double parse_real(const std::string& text, const std::string& what) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError("<csv>", 0, "bad " + what + " '" + text + "'");
    return v;
}

std::optional<double> parse_optional(const std::string& text, const std::string& what) {
    if (text.empty()) return std::nullopt;
    return parse_real(text, what);
}

std::string format_optional(const std::optional<double>& x) { return x ? format_real(*x) : ""; }

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

/// mean and population std
std::pair<double, double> moments(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

std::string format_real(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::string to_json_line(const EvalReport& r) {
    ordered_json j;
    j["task"] = r.task;
    j["dataset"] = r.dataset;
    j["seed"] = r.seed;
    j["auc"] = r.auc;
    j["f1"] = r.f1;
    j["mae"] = r.mae ? ordered_json(*r.mae) : ordered_json(nullptr);
    j["test_positive"] = r.test_positive;
    j["test_negative"] = r.test_negative;
    j["config_digest"] = r.config_digest;
    j["epochs_run"] = r.epochs_run;
    j["best_epoch"] = r.best_epoch;
    j["wall_s"] = r.wall_s;
    return j.dump();
}

EvalReport from_json_line(const std::string& line) {
    EvalReport r;
    try {
        const auto j = nlohmann::json::parse(line);
        r.task = j.at("task").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.auc = j.at("auc").get<double>();
        r.f1 = j.at("f1").get<double>();
        if (!j.at("mae").is_null()) r.mae = j.at("mae").get<double>();
        r.test_positive = j.at("test_positive").get<std::size_t>();
        r.test_negative = j.at("test_negative").get<std::size_t>();
        r.config_digest = j.at("config_digest").get<std::string>();
        r.epochs_run = j.at("epochs_run").get<std::size_t>();
        r.best_epoch = j.at("best_epoch").get<std::size_t>();
        r.wall_s = j.at("wall_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("<report>", 1, e.what());
    }
    return r;
}

std::string csv_header() { return "task,dataset,seed,auc,f1,mae"; }

std::string to_csv_row(const EvalReport& r) {
    return r.task + "," + r.dataset + "," + std::to_string(r.seed) + "," + format_real(r.auc) + "," +
           format_real(r.f1) + "," + format_optional(r.mae);
}

EvalReport from_csv_row(const std::string& row) {
    const auto f = split_csv(strip_cr(row));
    if (f.size() != 6) throw ParseError("<csv>", 0, "expected 6 fields, got " + std::to_string(f.size()));
    EvalReport r;
    r.task = f[0];
    r.dataset = f[1];
    r.seed = static_cast<std::uint64_t>(parse_real(f[2], "seed"));
    r.auc = parse_real(f[3], "auc");
    r.f1 = parse_real(f[4], "f1");
    r.mae = parse_optional(f[5], "mae");
    return r;
}

Summary summarize(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw Error("summarize: no reports");
    Summary s;
    s.dataset = reports.front().dataset;
    std::vector<double> auc, f1, mae;
    for (const auto& r : reports) {
        if (r.dataset != s.dataset) throw Error("summarize: mixed datasets");
        auc.push_back(r.auc);
        f1.push_back(r.f1);
        if (r.mae) mae.push_back(*r.mae);
    }
    std::tie(s.auc_mean, s.auc_std) = moments(auc);
    std::tie(s.f1_mean, s.f1_std) = moments(f1);
    if (mae.size() == reports.size()) {
        const auto [m, sd] = moments(mae);
        s.mae_mean = m;
        s.mae_std = sd;
    }
    s.seeds = reports.size();
    return s;
}

std::string summary_csv_header() { return "dataset,auc_mean,auc_std,f1_mean,f1_std,mae_mean,mae_std,seeds"; }

std::string to_csv_row(const Summary& s) {
    return s.dataset + "," + format_real(s.auc_mean) + "," + format_real(s.auc_std) + "," +
           format_real(s.f1_mean) + "," + format_real(s.f1_std) + "," + format_optional(s.mae_mean) +
           "," + format_optional(s.mae_std) + "," + std::to_string(s.seeds);
}

void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows) {
    out << summary_csv_header() << '\n';
    for (const auto& s : rows) out << to_csv_row(s) << '\n';
}

std::vector<Summary> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != summary_csv_header())
        throw ParseError("<csv>", 1, "missing summary header");
    std::vector<Summary> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 8)
            throw ParseError("<csv>", lineno, "expected 8 fields, got " + std::to_string(f.size()));
        Summary s;
        s.dataset = f[0];
        s.auc_mean = parse_real(f[1], "auc_mean");
        s.auc_std = parse_real(f[2], "auc_std");
        s.f1_mean = parse_real(f[3], "f1_mean");
        s.f1_std = parse_real(f[4], "f1_std");
        s.mae_mean = parse_optional(f[5], "mae_mean");
        s.mae_std = parse_optional(f[6], "mae_std");
        s.seeds = static_cast<std::size_t>(parse_real(f[7], "seeds"));
        rows.push_back(s);
    }
    return rows;
}

}  // namespace wsgat::report
