#include "gfomlab/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "gfomlab/error.hpp"

namespace gfom {

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw NumericalError("write to '" + path + "' failed");
}

}  // namespace

void write_report_csv(std::ostream& os, const ComparisonReport& report) {
  os << "name,series,x,estimate_a,estimate_b,gap,se_a,se_b,combined_se,tolerance,pass\n";
  for (const auto& s : report.stats) {
    os << s.name << ',' << s.series << ',' << format_double(s.x) << ','
       << format_double(s.estimate_a) << ',' << format_double(s.estimate_b) << ','
       << format_double(s.gap) << ',' << format_double(s.se_a) << ',' << format_double(s.se_b)
       << ',' << format_double(s.combined_se) << ',' << format_double(s.tolerance) << ','
       << (s.pass ? "true" : "false") << '\n';
  }
}

void write_report_csv(const std::string& path, const ComparisonReport& report) {
  auto out = open_out(path);
  write_report_csv(out, report);
  finish(out, path);
}

void emit_plot_data(std::ostream& os, const ComparisonReport& report) {
  os << "series,x,y,y_err\n";
  for (const auto& p : report.plot) {
    os << p.series << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
       << format_double(p.y_err) << '\n';
  }
}

void emit_plot_data(const ComparisonReport& report, const std::string& path) {
  auto out = open_out(path);
  emit_plot_data(out, report);
  finish(out, path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("CSV has no column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) return t;
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) throw ConfigError("CSV row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace gfom
