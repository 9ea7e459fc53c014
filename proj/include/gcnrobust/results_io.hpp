#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gcnrobust {

/// One point of a margin-quantile curve:
/// `trial,method,surface,mode,quantile,perturbations,margin`.
/// A missing margin is written as an empty field.
struct MarginRow {
  int trial = 0;
  std::string method;
  std::string surface;
  std::string mode;
  double quantile = 0.0;
  int perturbations = 0;
  std::optional<double> margin;

  friend bool operator==(const MarginRow&, const MarginRow&) = default;
};

/// `method,success_prob,budget_mean,budget_stderr`
struct BudgetRow {
  std::string method;
  double success_prob = 0.0;
  double budget_mean = 0.0;
  double budget_stderr = 0.0;

  friend bool operator==(const BudgetRow&, const BudgetRow&) = default;
};

/// Per-trial clean-model statistics: `trial,method,train_size,avg_training_neighbors,f1_macro,accuracy`.
struct TrialStatsRow {
  int trial = 0;
  std::string method;
  int train_size = 0;
  double avg_training_neighbors = 0.0;
  double f1_macro = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const TrialStatsRow&, const TrialStatsRow&) = default;
};

void write_margin_rows(const std::vector<MarginRow>& rows, const std::filesystem::path& path);
std::vector<MarginRow> read_margin_rows(const std::filesystem::path& path);

void write_budget_rows(const std::vector<BudgetRow>& rows, const std::filesystem::path& path);
std::vector<BudgetRow> read_budget_rows(const std::filesystem::path& path);

void write_trial_stats(const std::vector<TrialStatsRow>& rows, const std::filesystem::path& path);
std::vector<TrialStatsRow> read_trial_stats(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace gcnrobust
