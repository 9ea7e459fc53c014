#include "gcnrobust/results_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gcnrobust/dataset.hpp"

namespace gcnrobust {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMarginHeader = "trial,method,surface,mode,quantile,perturbations,margin";
constexpr const char* kBudgetHeader = "method,success_prob,budget_mean,budget_stderr";
constexpr const char* kStatsHeader = "trial,method,train_size,avg_training_neighbors,f1_macro,accuracy";

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path, 0, "cannot open file for writing");
  return out;
}

std::string checked_text(const fs::path& path, const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw DataError(path, 0, "text field contains a separator: " + s);
  }
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const fs::path& path, std::size_t line, const std::string& s) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError(path, line, "bad number '" + s + "'");
  return x;
}

int parse_int(const fs::path& path, std::size_t line, const std::string& s) {
  char* end = nullptr;
  const long x = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError(path, line, "bad integer '" + s + "'");
  return static_cast<int>(x);
}

// Calls fn(line_no, fields) for each data row after checking the header.
template <typename Fn>
void read_rows(const fs::path& path, const char* header, std::size_t n_fields, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open file");
  std::string line;
  if (!std::getline(in, line) || line != header) throw DataError(path, 1, "unexpected header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != n_fields) throw DataError(path, line_no, "wrong field count");
    fn(line_no, fields);
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_margin_rows(const std::vector<MarginRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kMarginHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << checked_text(path, r.method) << ',' << checked_text(path, r.surface) << ','
        << checked_text(path, r.mode) << ',' << format_double(r.quantile) << ',' << r.perturbations << ','
        << (r.margin && !std::isnan(*r.margin) ? format_double(*r.margin) : std::string()) << '\n';
  }
  if (!out) throw DataError(path, 0, "write failed");
}

std::vector<MarginRow> read_margin_rows(const fs::path& path) {
  std::vector<MarginRow> rows;
  read_rows(path, kMarginHeader, 7, [&](std::size_t line, const std::vector<std::string>& f) {
    MarginRow r;
    r.trial = parse_int(path, line, f[0]);
    r.method = f[1];
    r.surface = f[2];
    r.mode = f[3];
    r.quantile = parse_double(path, line, f[4]);
    r.perturbations = parse_int(path, line, f[5]);
    if (!f[6].empty()) r.margin = parse_double(path, line, f[6]);
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_budget_rows(const std::vector<BudgetRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kBudgetHeader << '\n';
  for (const auto& r : rows) {
    out << checked_text(path, r.method) << ',' << format_double(r.success_prob) << ','
        << format_double(r.budget_mean) << ',' << format_double(r.budget_stderr) << '\n';
  }
  if (!out) throw DataError(path, 0, "write failed");
}

std::vector<BudgetRow> read_budget_rows(const fs::path& path) {
  std::vector<BudgetRow> rows;
  read_rows(path, kBudgetHeader, 4, [&](std::size_t line, const std::vector<std::string>& f) {
    rows.push_back({f[0], parse_double(path, line, f[1]), parse_double(path, line, f[2]),
                    parse_double(path, line, f[3])});
  });
  return rows;
}

void write_trial_stats(const std::vector<TrialStatsRow>& rows, const fs::path& path) {
  auto out = open_output(path);
  out << kStatsHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << checked_text(path, r.method) << ',' << r.train_size << ','
        << format_double(r.avg_training_neighbors) << ',' << format_double(r.f1_macro) << ','
        << format_double(r.accuracy) << '\n';
  }
  if (!out) throw DataError(path, 0, "write failed");
}

std::vector<TrialStatsRow> read_trial_stats(const fs::path& path) {
  std::vector<TrialStatsRow> rows;
  read_rows(path, kStatsHeader, 6, [&](std::size_t line, const std::vector<std::string>& f) {
    rows.push_back({parse_int(path, line, f[0]), f[1], parse_int(path, line, f[2]),
                    parse_double(path, line, f[3]), parse_double(path, line, f[4]),
                    parse_double(path, line, f[5])});
  });
  return rows;
}

}  // namespace gcnrobust
