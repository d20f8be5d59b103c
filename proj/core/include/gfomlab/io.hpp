#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfomlab/harness.hpp"

namespace gfom {

// 17 significant digits; std::stod reproduces the value exactly.
std::string format_double(double x);

// One row per statistic:
// name,series,x,estimate_a,estimate_b,gap,se_a,se_b,combined_se,tolerance,pass
// Runtimes are kept out so reruns are byte-identical.
void write_report_csv(std::ostream& os, const ComparisonReport& report);
void write_report_csv(const std::string& path, const ComparisonReport& report);

// Columns series,x,y,y_err; an empty report gives the header alone.
void emit_plot_data(std::ostream& os, const ComparisonReport& report);
void emit_plot_data(const ComparisonReport& report, const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ConfigError when absent.
  std::size_t column(const std::string& name) const;
};
// Comma-separated, no quoting (the writers above never emit commas in fields).
CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::string& path);

}  // namespace gfom
