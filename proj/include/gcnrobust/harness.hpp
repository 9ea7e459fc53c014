#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcnrobust/attack.hpp"
#include "gcnrobust/results_io.hpp"

namespace gcnrobust {

struct TargetGroups {
  int high = 10;
  int low = 10;
  int random = 20;
  int total() const { return high + low + random; }
};

struct TargetSelection {
  std::vector<NodeId> high;    // largest margins, descending
  std::vector<NodeId> low;     // smallest margins, ascending
  std::vector<NodeId> random;  // uniform from the remaining correct nodes
  bool shrunk = false;

  std::vector<NodeId> all() const;
};

/// Picks targets among `test` nodes with correct[u] set. Margin ties go to
/// the lower index. When fewer correct nodes exist than requested the groups
/// shrink proportionally and `shrunk` is set.
TargetSelection select_targets(std::span<const NodeId> test, std::span<const double> margins,
                               std::span<const char> correct, const TargetGroups& groups, std::uint64_t seed);

/// Quantile with linear interpolation between closest order statistics
/// (h = (n - 1) q).
double quantile(std::vector<double> values, double q);

struct Curve {
  std::vector<int> steps;
  std::vector<double> values;
};

/// Margin trace restricted to its evaluated steps.
Curve evaluated_margins(const AttackTrace& t);

/// Evaluated margins on the grid {0, s, 2s, ..., budget} (budget always
/// included); a trace that ran out of candidates keeps its last margin.
Curve padded_margins(const AttackTrace& t, int budget, int stride);

/// q-quantile of the margins at each step. Throws std::invalid_argument when
/// the curves disagree on their steps.
Curve margin_quantile_curve(std::span<const Curve> traces, double q);

/// First crossing of the linearly interpolated curve to <= threshold;
/// steps.back() + 1 if it never crosses; 0 if it starts at or below.
double required_budget(const Curve& curve, double threshold, bool* degenerate = nullptr);

struct BudgetPoint {
  double success_prob = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  int n_trials = 0;
  bool single_trial = false;  // stderr reported as 0
};

/// For each success probability p: required budget of each trial's
/// p-quantile curve, then mean and sample-stddev / sqrt(n) across trials.
std::vector<BudgetPoint> budget_vs_success(const std::vector<std::vector<Curve>>& trials,
                                           std::span<const double> success_probs, double threshold);

struct TraceRecord {
  int trial = 0;
  std::string method;
  AttackConfig config;
  AttackTrace trace;
};

nlohmann::json trace_record_to_json(const TraceRecord& r);
TraceRecord trace_record_from_json(const nlohmann::json& j);
void write_traces(const std::vector<TraceRecord>& records, const std::filesystem::path& path);
std::vector<TraceRecord> read_traces(const std::filesystem::path& path);

struct Report {
  std::vector<MarginRow> margins;
  std::vector<BudgetRow> budgets;
};

/// Quantile curves (for every quantile plus the median) and budget
/// summaries, grouped by method then trial. Methods appear in order of first
/// occurrence.
Report build_report(const std::vector<TraceRecord>& records, std::span<const double> quantiles, double threshold);

struct DatasetSource {
  std::optional<std::filesystem::path> path;
  std::optional<SbmConfig> sbm;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<SelectionMethod> methods{SelectionMethod::Random, SelectionMethod::StratDegree,
                                       SelectionMethod::GreedyCover};
  double train_frac = 0.1;
  double val_frac = 0.1;
  AttackConfig attack;
  /// Use the filter matching each selection method (random stays unfiltered).
  bool adapted_attack = false;
  DefenseConfig defense;
  TrainConfig train;
  int n_trials = 5;
  TargetGroups targets;
  double success_threshold = 0.0;
  std::vector<double> quantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
/// `max_perturbations` sets the attack budget.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ExperimentResult {
  std::vector<TrialStatsRow> trial_stats;
  std::vector<TraceRecord> traces;
  Report report;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

Dataset load_source(const DatasetSource& src);

/// Runs every (method, trial) pair. Each trial's seed is shared across
/// methods; splits, models, targets and retraining seeds derive from it.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds);

/// traces.jsonl, margin_curves.csv, budgets.csv, trial_stats.csv and
/// manifest.json under `dir`.
void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace gcnrobust
