#include "gcnrobust/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace gcnrobust {

namespace fs = std::filesystem;

std::vector<NodeId> TargetSelection::all() const {
  std::vector<NodeId> out = high;
  out.insert(out.end(), low.begin(), low.end());
  out.insert(out.end(), random.begin(), random.end());
  return out;
}

TargetSelection select_targets(std::span<const NodeId> test, std::span<const double> margins,
                               std::span<const char> correct, const TargetGroups& groups, std::uint64_t seed) {
  std::vector<NodeId> pool;
  for (NodeId u : test) {
    if (correct[u]) pool.push_back(u);
  }
  std::sort(pool.begin(), pool.end());

  TargetSelection sel;
  int n_high = groups.high, n_low = groups.low, n_random = groups.random;
  const int available = static_cast<int>(pool.size());
  if (groups.total() > available) {
    sel.shrunk = true;
    const double scale = static_cast<double>(available) / groups.total();
    n_high = static_cast<int>(std::floor(groups.high * scale));
    n_low = static_cast<int>(std::floor(groups.low * scale));
    n_random = std::min(groups.random, available - n_high - n_low);
  }

  std::vector<NodeId> by_margin = pool;
  std::stable_sort(by_margin.begin(), by_margin.end(),
                   [&](NodeId a, NodeId b) { return margins[a] > margins[b]; });
  std::vector<char> used(margins.size(), 0);
  for (int i = 0; i < n_high; ++i) {
    sel.high.push_back(by_margin[i]);
    used[by_margin[i]] = 1;
  }
  std::stable_sort(by_margin.begin(), by_margin.end(),
                   [&](NodeId a, NodeId b) { return margins[a] < margins[b]; });
  for (NodeId u : by_margin) {
    if (static_cast<int>(sel.low.size()) == n_low) break;
    if (used[u]) continue;
    sel.low.push_back(u);
    used[u] = 1;
  }
  std::vector<NodeId> rest;
  for (NodeId u : pool) {
    if (!used[u]) rest.push_back(u);
  }
  Rng rng(seed);
  rng.shuffle(std::span<NodeId>(rest));
  rest.resize(std::min<std::size_t>(rest.size(), static_cast<std::size_t>(n_random)));
  sel.random = std::move(rest);
  return sel;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Curve evaluated_margins(const AttackTrace& t) {
  Curve c;
  for (std::size_t i = 0; i < t.margins.size(); ++i) {
    if (!t.margins[i]) continue;
    c.steps.push_back(static_cast<int>(i));
    c.values.push_back(*t.margins[i]);
  }
  return c;
}

Curve padded_margins(const AttackTrace& t, int budget, int stride) {
  const Curve evaluated = evaluated_margins(t);
  if (evaluated.steps.empty()) throw std::invalid_argument("trace has no evaluated margins");
  const int last = static_cast<int>(t.applied.size());
  Curve c;
  for (int s = 0; s <= budget; s = (s == budget ? budget + 1 : std::min(s + stride, budget))) {
    double value = evaluated.values.back();
    if (s <= last) {
      auto it = std::find(evaluated.steps.begin(), evaluated.steps.end(), s);
      if (it == evaluated.steps.end()) {
        throw std::invalid_argument("trace of target " + std::to_string(t.target) + " lacks step " + std::to_string(s));
      }
      value = evaluated.values[static_cast<std::size_t>(it - evaluated.steps.begin())];
    }
    c.steps.push_back(s);
    c.values.push_back(value);
  }
  return c;
}

Curve margin_quantile_curve(std::span<const Curve> traces, double q) {
  if (traces.empty()) throw std::invalid_argument("margin_quantile_curve: no traces");
  Curve out;
  out.steps = traces.front().steps;
  for (const auto& t : traces) {
    if (t.steps != out.steps || t.values.size() != t.steps.size()) {
      throw std::invalid_argument("margin_quantile_curve: traces evaluated at different steps");
    }
  }
  std::vector<double> column(traces.size());
  for (std::size_t i = 0; i < out.steps.size(); ++i) {
    for (std::size_t k = 0; k < traces.size(); ++k) column[k] = traces[k].values[i];
    out.values.push_back(quantile(column, q));
  }
  return out;
}

double required_budget(const Curve& curve, double threshold, bool* degenerate) {
  if (curve.values.empty() || curve.values.size() != curve.steps.size()) {
    throw std::invalid_argument("required_budget: malformed curve");
  }
  if (degenerate) *degenerate = false;
  if (curve.values.front() <= threshold) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  for (std::size_t i = 1; i < curve.values.size(); ++i) {
    if (curve.values[i] <= threshold) {
      const double prev = curve.values[i - 1];
      const double frac = (prev - threshold) / (prev - curve.values[i]);
      return curve.steps[i - 1] + frac * (curve.steps[i] - curve.steps[i - 1]);
    }
  }
  return curve.steps.back() + 1.0;
}

std::vector<BudgetPoint> budget_vs_success(const std::vector<std::vector<Curve>>& trials,
                                           std::span<const double> success_probs, double threshold) {
  if (trials.empty()) throw std::invalid_argument("budget_vs_success: no trials");
  std::vector<BudgetPoint> out;
  for (double p : success_probs) {
    std::vector<double> budgets;
    for (const auto& traces : trials) {
      budgets.push_back(required_budget(margin_quantile_curve(traces, p), threshold));
    }
    const double n = static_cast<double>(budgets.size());
    BudgetPoint pt;
    pt.success_prob = p;
    pt.n_trials = static_cast<int>(budgets.size());
    pt.mean = std::accumulate(budgets.begin(), budgets.end(), 0.0) / n;
    if (budgets.size() < 2) {
      pt.single_trial = true;
    } else {
      double ss = 0.0;
      for (double b : budgets) ss += (b - pt.mean) * (b - pt.mean);
      pt.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    out.push_back(pt);
  }
  return out;
}

nlohmann::json trace_record_to_json(const TraceRecord& r) {
  nlohmann::json j = trace_to_json(r.trace, r.config);
  j["trial"] = r.trial;
  j["method"] = r.method;
  return j;
}

TraceRecord trace_record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.trial = j.at("trial").get<int>();
  r.method = j.at("method").get<std::string>();
  r.config = attack_config_from_json(j.at("config"));
  r.trace = trace_from_json(j);
  return r;
}

void write_traces(const std::vector<TraceRecord>& records, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path, 0, "cannot open file for writing");
  for (const auto& r : records) out << trace_record_to_json(r).dump() << '\n';
}

std::vector<TraceRecord> read_traces(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open file");
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trace_record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path, line_no, e.what());
    }
  }
  return out;
}

Report build_report(const std::vector<TraceRecord>& records, std::span<const double> quantiles, double threshold) {
  std::vector<std::string> methods;
  std::map<std::string, std::map<int, std::vector<const TraceRecord*>>> grouped;
  for (const auto& r : records) {
    if (grouped.find(r.method) == grouped.end()) methods.push_back(r.method);
    grouped[r.method][r.trial].push_back(&r);
  }
  std::vector<double> curve_qs(quantiles.begin(), quantiles.end());
  if (std::find(curve_qs.begin(), curve_qs.end(), 0.5) == curve_qs.end()) curve_qs.push_back(0.5);
  std::sort(curve_qs.begin(), curve_qs.end());

  Report rep;
  for (const auto& method : methods) {
    std::vector<std::vector<Curve>> trials;
    for (const auto& [trial, recs] : grouped[method]) {
      const AttackConfig& cfg = recs.front()->config;
      std::vector<Curve> curves;
      for (const auto* r : recs) {
        if (r->config.budget != cfg.budget || r->config.eval_stride != cfg.eval_stride) {
          throw std::invalid_argument("traces of one trial use different budgets or strides");
        }
        curves.push_back(padded_margins(r->trace, cfg.budget, cfg.eval_stride));
      }
      for (double q : curve_qs) {
        const Curve qc = margin_quantile_curve(curves, q);
        for (std::size_t i = 0; i < qc.steps.size(); ++i) {
          rep.margins.push_back({trial, method, std::string(to_string(cfg.surface)), std::string(to_string(cfg.mode)),
                                 q, qc.steps[i], qc.values[i]});
        }
      }
      trials.push_back(std::move(curves));
    }
    for (const auto& pt : budget_vs_success(trials, quantiles, threshold)) {
      rep.budgets.push_back({method, pt.success_prob, pt.mean, pt.std_error});
    }
  }
  return rep;
}

void ExperimentConfig::validate() const {
  if (!dataset.path && !dataset.sbm) throw std::invalid_argument("experiment: no dataset source");
  if (methods.empty()) throw std::invalid_argument("experiment: no selection methods");
  if (n_trials < 1) throw std::invalid_argument("experiment: n_trials must be >= 1");
  if (targets.high < 0 || targets.low < 0 || targets.random < 0 || targets.total() < 1) {
    throw std::invalid_argument("experiment: invalid target group sizes");
  }
  for (double q : quantiles) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("experiment: quantile outside [0,1]");
  }
  attack.validate();
  train.validate();
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0)) {
    throw std::invalid_argument("experiment: fractions must be positive with sum < 1");
  }
}

namespace {

nlohmann::json sbm_to_json(const SbmConfig& s) {
  return {{"block_sizes", s.block_sizes},
          {"inprob", s.inprob},
          {"n_features", s.n_features},
          {"per_class_feature_count", s.per_class_feature_count},
          {"p_feature_on_class", s.p_feature_on_class},
          {"p_feature_off_class", s.p_feature_off_class},
          {"seed", s.seed}};
}

SbmConfig sbm_from_json(const nlohmann::json& j) {
  SbmConfig s;
  s.block_sizes = j.value("block_sizes", s.block_sizes);
  s.inprob = j.value("inprob", s.inprob);
  s.n_features = j.value("n_features", s.n_features);
  s.per_class_feature_count = j.value("per_class_feature_count", s.per_class_feature_count);
  s.p_feature_on_class = j.value("p_feature_on_class", s.p_feature_on_class);
  s.p_feature_off_class = j.value("p_feature_off_class", s.p_feature_off_class);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

AdaptedFilter filter_for(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::StratDegree: return AdaptedFilter::StratDegree;
    case SelectionMethod::GreedyCover: return AdaptedFilter::GreedyCover;
    case SelectionMethod::Random: break;
  }
  return AdaptedFilter::None;
}

}  // namespace

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json dataset;
  if (c.dataset.path) dataset["path"] = c.dataset.path->string();
  if (c.dataset.sbm) dataset["sbm"] = sbm_to_json(*c.dataset.sbm);
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  return {{"dataset", dataset},
          {"methods", methods},
          {"train_frac", c.train_frac},
          {"val_frac", c.val_frac},
          {"attack", attack_config_to_json(c.attack)},
          {"max_perturbations", c.attack.budget},
          {"adapted_attack", c.adapted_attack},
          {"defense", defense_config_to_json(c.defense)},
          {"train", train_config_to_json(c.train)},
          {"n_trials", c.n_trials},
          {"targets", {{"high", c.targets.high}, {"low", c.targets.low}, {"random", c.targets.random}}},
          {"success_threshold", c.success_threshold},
          {"quantiles", c.quantiles},
          {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  const auto& ds = j.at("dataset");
  if (ds.contains("path")) c.dataset.path = ds.at("path").get<std::string>();
  if (ds.contains("sbm")) c.dataset.sbm = sbm_from_json(ds.at("sbm"));
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_selection_method(m.get<std::string>()));
  }
  c.train_frac = j.value("train_frac", c.train_frac);
  c.val_frac = j.value("val_frac", c.val_frac);
  if (j.contains("attack")) c.attack = attack_config_from_json(j.at("attack"));
  c.attack.budget = j.value("max_perturbations", c.attack.budget);
  c.adapted_attack = j.value("adapted_attack", c.adapted_attack);
  if (j.contains("defense")) c.defense = defense_config_from_json(j.at("defense"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  c.n_trials = j.value("n_trials", c.n_trials);
  if (j.contains("targets")) {
    const auto& t = j.at("targets");
    c.targets.high = t.value("high", c.targets.high);
    c.targets.low = t.value("low", c.targets.low);
    c.targets.random = t.value("random", c.targets.random);
  }
  c.success_threshold = j.value("success_threshold", c.success_threshold);
  c.quantiles = j.value("quantiles", c.quantiles);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

Dataset load_source(const DatasetSource& src) {
  if (src.path) return load_dataset(*src.path);
  if (src.sbm) return generate_sbm(*src.sbm);
  throw std::invalid_argument("dataset source is empty");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_source(cfg.dataset)); }

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
  cfg.validate();
  ds.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;

  for (SelectionMethod method : cfg.methods) {
    const std::string method_name(to_string(method));
    for (int trial = 0; trial < cfg.n_trials; ++trial) {
      const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
      const std::string context = method_name + " trial " + std::to_string(trial) + ": ";
      try {
        const Split split = make_split(method, ds, cfg.train_frac, cfg.val_frac, derive_seed(trial_seed, 1));
        TrainConfig victim = cfg.train;
        const AttackEnvironment env = make_attack_environment(ds, split, victim, cfg.defense, derive_seed(trial_seed, 2));

        const auto predictions = argmax_rows(env.clean_logits);
        TrialStatsRow stats;
        stats.trial = trial;
        stats.method = method_name;
        stats.train_size = static_cast<int>(split.train.size());
        stats.avg_training_neighbors = avg_training_neighbors(ds.graph, split.train);
        stats.f1_macro = f1_macro(predictions, ds.labels, split.test, ds.n_classes);
        stats.accuracy = accuracy(predictions, ds.labels, split.test);
        result.trial_stats.push_back(stats);

        std::vector<double> margins(static_cast<std::size_t>(ds.n_nodes()));
        std::vector<char> correct(static_cast<std::size_t>(ds.n_nodes()), 0);
        for (NodeId u = 0; u < ds.n_nodes(); ++u) {
          margins[u] = margin_from_logits(env.clean_logits.row(u), ds.labels[u]);
          // Influencer attacks need at least one neighbor to perturb.
          const bool attackable = cfg.attack.mode == AttackMode::Direct || ds.graph.degree(u) > 0;
          correct[u] = margins[u] > 0.0 && attackable;
        }
        const TargetSelection sel = select_targets(split.test, margins, correct, cfg.targets, derive_seed(trial_seed, 3));
        if (sel.shrunk) {
          result.warnings.push_back(context + "too few correctly classified test nodes; target groups shrunk");
        }
        const auto targets = sel.all();

        AttackConfig attack = cfg.attack;
        attack.adapted = cfg.adapted_attack ? filter_for(method) : AdaptedFilter::None;
        attack.seed = derive_seed(trial_seed, 4);
        std::vector<AttackTrace> traces(targets.size());
        std::vector<std::string> errors(targets.size());
        const auto n_targets = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n_targets; ++i) {
          try {
            traces[i] = attack_target(env, targets[i], attack);
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
        for (std::size_t i = 0; i < targets.size(); ++i) {
          if (!errors[i].empty()) {
            throw std::runtime_error("target " + std::to_string(targets[i]) + ": " + errors[i]);
          }
          result.traces.push_back({trial, method_name, attack, std::move(traces[i])});
        }
      } catch (const std::exception& e) {
        throw std::runtime_error(context + e.what());
      }
    }
  }
  result.report = build_report(result.traces, cfg.quantiles, cfg.success_threshold);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  write_traces(result.traces, dir / "traces.jsonl");
  write_margin_rows(result.report.margins, dir / "margin_curves.csv");
  write_budget_rows(result.report.budgets, dir / "budgets.csv");
  write_trial_stats(result.trial_stats, dir / "trial_stats.csv");
  nlohmann::json manifest{{"config", experiment_config_to_json(cfg)},
                          {"trial_seeds", nlohmann::json::array()},
                          {"version", "gcnrobust 1.0.0"},
                          {"n_traces", result.traces.size()},
                          {"warnings", result.warnings},
                          {"seconds", result.seconds}};
  for (int t = 0; t < cfg.n_trials; ++t) manifest["trial_seeds"].push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw DataError(dir / "manifest.json", 0, "cannot open file for writing");
  out << manifest.dump(2) << '\n';
}

}  // namespace gcnrobust
