#ifndef WSGAT_REPORT_HPP
#define WSGAT_REPORT_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsgat/pipelines.hpp"

namespace wsgat::report {

using pipeline::EvalReport;

/// One JSON object per line; key order is fixed.
std::string to_json_line(const EvalReport& r);
EvalReport from_json_line(const std::string& line);

/// task,dataset,seed,auc,f1,mae (mae empty for the sign task).
std::string csv_header();
std::string to_csv_row(const EvalReport& r);
EvalReport from_csv_row(const std::string& row);

/// Per-dataset aggregate over seeds. std is the population standard
/// deviation, so a single seed gives 0.
struct Summary {
    std::string dataset;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    double f1_mean = 0.0;
    double f1_std = 0.0;
    std::optional<double> mae_mean;
    std::optional<double> mae_std;
    std::size_t seeds = 0;

    friend bool operator==(const Summary&, const Summary&) = default;
};

/// Reports must share one dataset.
Summary summarize(const std::vector<EvalReport>& reports);

std::string summary_csv_header();
std::string to_csv_row(const Summary& s);
void write_summary_csv(std::ostream& out, const std::vector<Summary>& rows);
std::vector<Summary> read_summary_csv(std::istream& in);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double x);

}  // namespace wsgat::report

#endif  // WSGAT_REPORT_HPP
