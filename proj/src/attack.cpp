#include "gcnrobust/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gcnrobust {

std::string_view to_string(AttackMode m) { return m == AttackMode::Direct ? "direct" : "influencer"; }

std::string_view to_string(AttackSurface s) {
  switch (s) {
    case AttackSurface::Structure: return "structure";
    case AttackSurface::Features: return "features";
    case AttackSurface::Both: return "both";
  }
  return "?";
}

std::string_view to_string(AdaptedFilter a) {
  switch (a) {
    case AdaptedFilter::None: return "none";
    case AdaptedFilter::StratDegree: return "strat-degree";
    case AdaptedFilter::GreedyCover: return "greedy-cover";
  }
  return "?";
}

AttackMode parse_attack_mode(std::string_view s) {
  if (s == "direct") return AttackMode::Direct;
  if (s == "influencer") return AttackMode::Influencer;
  throw std::invalid_argument("unknown attack mode '" + std::string(s) + "'");
}

AttackSurface parse_attack_surface(std::string_view s) {
  if (s == "structure") return AttackSurface::Structure;
  if (s == "features") return AttackSurface::Features;
  if (s == "both") return AttackSurface::Both;
  throw std::invalid_argument("unknown attack surface '" + std::string(s) + "'");
}

AdaptedFilter parse_adapted_filter(std::string_view s) {
  if (s == "none") return AdaptedFilter::None;
  if (s == "strat-degree") return AdaptedFilter::StratDegree;
  if (s == "greedy-cover") return AdaptedFilter::GreedyCover;
  throw std::invalid_argument("unknown adapted filter '" + std::string(s) + "'");
}

void AttackConfig::validate() const {
  if (budget < 1) throw std::invalid_argument("attack budget must be >= 1");
  if (eval_stride < 1) throw std::invalid_argument("eval_stride must be >= 1");
  if (!(unnoticeable_cfg.d_min > 0.5)) throw std::invalid_argument("d_min must exceed 0.5");
}

nlohmann::json attack_config_to_json(const AttackConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"surface", to_string(c.surface)},
          {"budget", c.budget},
          {"adapted", to_string(c.adapted)},
          {"unnoticeable", c.unnoticeable},
          {"d_min", c.unnoticeable_cfg.d_min},
          {"ll_cutoff", c.unnoticeable_cfg.cutoff},
          {"eval_stride", c.eval_stride},
          {"seed", c.seed}};
}

AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig c) {
  if (j.contains("mode")) c.mode = parse_attack_mode(j.at("mode").get<std::string>());
  if (j.contains("surface")) c.surface = parse_attack_surface(j.at("surface").get<std::string>());
  if (j.contains("adapted")) c.adapted = parse_adapted_filter(j.at("adapted").get<std::string>());
  c.budget = j.value("budget", c.budget);
  c.unnoticeable = j.value("unnoticeable", c.unnoticeable);
  c.unnoticeable_cfg.d_min = j.value("d_min", c.unnoticeable_cfg.d_min);
  c.unnoticeable_cfg.cutoff = j.value("ll_cutoff", c.unnoticeable_cfg.cutoff);
  c.eval_stride = j.value("eval_stride", c.eval_stride);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

nlohmann::json perturbation_to_json(const Perturbation& p) {
  return p.is_edge() ? nlohmann::json{"edge", p.a, p.b} : nlohmann::json{"feature", p.a, p.b};
}

Perturbation perturbation_from_json(const nlohmann::json& j) {
  const auto kind = j.at(0).get<std::string>();
  const auto a = j.at(1).get<std::int32_t>();
  const auto b = j.at(2).get<std::int32_t>();
  if (kind == "edge") return Perturbation::edge(a, b);
  if (kind == "feature") return Perturbation::feature(a, b);
  throw std::invalid_argument("unknown perturbation kind '" + kind + "'");
}

}  // namespace

nlohmann::json trace_to_json(const AttackTrace& t, const AttackConfig& cfg) {
  nlohmann::json steps = nlohmann::json::array();
  nlohmann::json margins = nlohmann::json::array();
  for (std::size_t i = 0; i < t.margins.size(); ++i) {
    if (!t.margins[i]) continue;
    steps.push_back(i);
    margins.push_back(*t.margins[i]);
  }
  nlohmann::json applied = nlohmann::json::array();
  for (const auto& p : t.applied) applied.push_back(perturbation_to_json(p));
  return {{"target", t.target},
          {"true_class", t.true_class},
          {"config", attack_config_to_json(cfg)},
          {"steps", steps},
          {"margins", margins},
          {"surrogate_margins", t.surrogate_margins},
          {"applied", applied},
          {"exhausted", t.exhausted}};
}

AttackTrace trace_from_json(const nlohmann::json& j) {
  AttackTrace t;
  t.target = j.at("target").get<NodeId>();
  t.true_class = j.at("true_class").get<ClassId>();
  for (const auto& p : j.at("applied")) t.applied.push_back(perturbation_from_json(p));
  t.surrogate_margins = j.value("surrogate_margins", std::vector<double>{});
  t.exhausted = j.value("exhausted", false);
  const auto steps = j.at("steps").get<std::vector<std::size_t>>();
  const auto margins = j.at("margins").get<std::vector<double>>();
  if (steps.size() != margins.size()) throw std::invalid_argument("trace: steps and margins differ in length");
  t.margins.assign(t.applied.size() + 1, std::nullopt);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] >= t.margins.size()) throw std::invalid_argument("trace: step beyond applied perturbations");
    t.margins[steps[i]] = margins[i];
  }
  return t;
}

std::vector<NodeId> select_attackers(const Graph& g, NodeId target, AttackMode mode) {
  if (target < 0 || target >= g.n_nodes()) throw std::out_of_range("target outside graph");
  if (mode == AttackMode::Direct) return {target};
  auto nbrs = g.neighbors(target);
  if (nbrs.empty()) {
    throw std::invalid_argument("influencer attack on isolated target " + std::to_string(target));
  }
  return {nbrs.begin(), nbrs.end()};
}

std::vector<Perturbation> candidate_perturbations(const Graph& g, const FeatureMatrix& x,
                                                  std::span<const NodeId> attackers, AttackSurface surface,
                                                  NodeId target, AttackMode mode) {
  std::vector<Perturbation> edges;
  std::vector<Perturbation> features;
  if (surface != AttackSurface::Features) {
    for (NodeId a : attackers) {
      for (NodeId v = 0; v < g.n_nodes(); ++v) {
        if (v == a) continue;
        if (mode == AttackMode::Influencer && (v == target || a == target)) continue;
        edges.push_back(Perturbation::edge(a, v));
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }
  if (surface != AttackSurface::Structure) {
    for (NodeId a : attackers) {
      for (FeatureId f : x.row(a)) features.push_back(Perturbation::feature(a, f));
    }
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
  }
  edges.insert(edges.end(), features.begin(), features.end());
  return edges;
}

std::vector<Perturbation> filter_singletons(std::span<const Perturbation> cands, const Graph& g) {
  std::vector<Perturbation> out;
  out.reserve(cands.size());
  for (const auto& p : cands) {
    if (p.is_edge() && g.has_edge(p.a, p.b) && (g.degree(p.a) <= 1 || g.degree(p.b) <= 1)) continue;
    out.push_back(p);
  }
  return out;
}

namespace {

// Sufficient statistics of the degrees >= d_min: count and sum of logs.
struct PowerLawStats {
  double n = 0.0;
  double sum_log = 0.0;

  void add(double d, double d_min, double sign) {
    if (d >= d_min) {
      n += sign;
      sum_log += sign * std::log(d);
    }
  }
};

PowerLawStats powerlaw_stats(const DegreeVector& degrees, double d_min) {
  PowerLawStats s;
  for (NodeId d : degrees) s.add(d, d_min, 1.0);
  return s;
}

double powerlaw_log_likelihood(const PowerLawStats& s, double d_min) {
  if (s.n <= 0.0) return 0.0;
  const double alpha = 1.0 + s.n / (s.sum_log - s.n * std::log(d_min - 0.5));
  return s.n * std::log(alpha) + s.n * alpha * std::log(d_min) - (alpha + 1.0) * s.sum_log;
}

double likelihood_ratio(const PowerLawStats& original, const PowerLawStats& perturbed, double d_min) {
  const PowerLawStats combined{original.n + perturbed.n, original.sum_log + perturbed.sum_log};
  return -2.0 * powerlaw_log_likelihood(combined, d_min) +
         2.0 * (powerlaw_log_likelihood(original, d_min) + powerlaw_log_likelihood(perturbed, d_min));
}

}  // namespace

double powerlaw_likelihood_ratio(const DegreeVector& original, const DegreeVector& perturbed, double d_min) {
  return likelihood_ratio(powerlaw_stats(original, d_min), powerlaw_stats(perturbed, d_min), d_min);
}

std::vector<Perturbation> unnoticeable_structure(std::span<const Perturbation> cands, const Graph& current,
                                                 const Graph& original, const UnnoticeableConfig& cfg) {
  const PowerLawStats clean = powerlaw_stats(degree_vector(original), cfg.d_min);
  const PowerLawStats now = powerlaw_stats(degree_vector(current), cfg.d_min);
  std::vector<Perturbation> out;
  out.reserve(cands.size());
  for (const auto& p : cands) {
    if (!p.is_edge()) {
      out.push_back(p);
      continue;
    }
    const double delta = current.has_edge(p.a, p.b) ? -1.0 : 1.0;
    PowerLawStats next = now;
    for (NodeId end : {p.a, p.b}) {
      const double d = current.degree(end);
      next.add(d, cfg.d_min, -1.0);
      next.add(d + delta, cfg.d_min, 1.0);
    }
    if (likelihood_ratio(clean, next, cfg.d_min) < cfg.cutoff) out.push_back(p);
  }
  return out;
}

std::vector<Perturbation> filter_training(std::span<const Perturbation> cands, const Graph& current,
                                          std::span<const ClassId> labels, ClassId n_classes, const Split& split,
                                          AdaptedFilter adapted) {
  if (adapted == AdaptedFilter::None) return {cands.begin(), cands.end()};
  const bool matches = (adapted == AdaptedFilter::StratDegree && split.method == SelectionMethod::StratDegree) ||
                       (adapted == AdaptedFilter::GreedyCover && split.method == SelectionMethod::GreedyCover);
  if (!matches) {
    throw std::invalid_argument("filter_training: filter " + std::string(to_string(adapted)) +
                                " does not match split method " + std::string(to_string(split.method)));
  }

  std::vector<Perturbation> out;
  out.reserve(cands.size());
  if (adapted == AdaptedFilter::StratDegree) {
    const DegreeVector degrees = degree_vector(current);
    const std::vector<ClassId> label_vec(labels.begin(), labels.end());
    const auto thresholds = per_class_degree_thresholds(degrees, label_vec, n_classes, split.train_frac);
    for (const auto& p : cands) {
      if (!p.is_edge()) {
        out.push_back(p);
        continue;
      }
      const int delta = current.has_edge(p.a, p.b) ? -1 : 1;
      bool crosses = false;
      for (NodeId end : {p.a, p.b}) {
        const double before = degrees[end];
        const double after = before + delta;
        const double thr = thresholds[labels[end]];
        crosses = crosses || (before < thr && after >= thr) || (before > thr && after <= thr);
      }
      if (!crosses) out.push_back(p);
    }
    return out;
  }

  // Greedy cover: count of non-training neighbors per node.
  const auto in_train = node_mask(current.n_nodes(), split.train);
  std::vector<int> outside(static_cast<std::size_t>(current.n_nodes()), 0);
  int max_nontrain = std::numeric_limits<int>::min();
  int min_train = std::numeric_limits<int>::max();
  for (NodeId u = 0; u < current.n_nodes(); ++u) {
    for (NodeId w : current.neighbors(u)) outside[u] += in_train[w] ? 0 : 1;
    if (in_train[u]) {
      min_train = std::min(min_train, outside[u]);
    } else {
      max_nontrain = std::max(max_nontrain, outside[u]);
    }
  }
  auto borderline_train = [&](NodeId u) { return in_train[u] && outside[u] <= min_train + 1; };
  auto borderline_nontrain = [&](NodeId u) { return !in_train[u] && outside[u] >= max_nontrain - 1; };
  for (const auto& p : cands) {
    if (!p.is_edge()) {
      out.push_back(p);
      continue;
    }
    const NodeId u = p.a;
    const NodeId v = p.b;
    bool blocked = false;
    if (current.has_edge(u, v)) {
      blocked = (borderline_nontrain(u) && in_train[v]) || (borderline_nontrain(v) && in_train[u]);
    } else {
      blocked = (borderline_train(u) && !in_train[v]) || (borderline_train(v) && !in_train[u]);
    }
    if (!blocked) out.push_back(p);
  }
  return out;
}

namespace {

// Neighborhood access on the current graph, optionally with one edge toggled.
struct GraphView {
  const Graph* g;
  const std::vector<double>* inv_sqrt;  // of the untoggled degrees (+1 with self-loops)
  bool self_loops;
  NodeId u = -1;
  NodeId v = -1;
  bool add = false;

  double scale(NodeId i) const {
    if (i != u && i != v) return (*inv_sqrt)[i];
    const double d = g->degree(i) + (add ? 1.0 : -1.0) + (self_loops ? 1.0 : 0.0);
    return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }

  template <typename Fn>
  void for_each_neighbor(NodeId i, Fn&& fn) const {
    const bool touched = i == u || i == v;
    const NodeId other = i == u ? v : u;
    for (NodeId w : g->neighbors(i)) {
      if (touched && !add && w == other) continue;
      fn(w);
    }
    if (touched && add) fn(other);
    if (self_loops) fn(i);
  }
};

// Row t of A^2 (X W): sum_j A_tj sum_k A_jk XW_k.
RowVector two_hop_logits(const GraphView& view, const Matrix& xw, NodeId t) {
  RowVector out = RowVector::Zero(xw.cols());
  RowVector acc(xw.cols());
  const double st = view.scale(t);
  view.for_each_neighbor(t, [&](NodeId j) {
    const double sj = view.scale(j);
    acc.setZero();
    view.for_each_neighbor(j, [&](NodeId k) { acc.noalias() += view.scale(k) * xw.row(k); });
    out.noalias() += (st * sj * sj) * acc;
  });
  return out;
}

class SurrogateScorer {
 public:
  SurrogateScorer(const SurrogateParams& s, const Graph& g, const FeatureMatrix& x, NodeId target, ClassId true_class,
                  bool self_loops)
      : w_(&s.w), g_(&g), target_(target), true_class_(true_class), self_loops_(self_loops) {
    if (x.cols() != s.w.rows() || x.rows() != g.n_nodes()) throw std::invalid_argument("scorer: dimension mismatch");
    xw_ = kernels::feature_product(x, {}, s.w, Exec::Serial);
    inv_sqrt_.resize(static_cast<std::size_t>(g.n_nodes()));
    for (NodeId i = 0; i < g.n_nodes(); ++i) {
      const double d = g.degree(i) + (self_loops ? 1.0 : 0.0);
      inv_sqrt_[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    const GraphView plain{g_, &inv_sqrt_, self_loops_};
    base_logits_ = two_hop_logits(plain, xw_, target_);
    // Two-hop weights from the target, for feature removals.
    two_hop_.assign(static_cast<std::size_t>(g.n_nodes()), 0.0);
    const double st = inv_sqrt_[target_];
    plain.for_each_neighbor(target_, [&](NodeId j) {
      const double sj = inv_sqrt_[j];
      plain.for_each_neighbor(j, [&](NodeId k) { two_hop_[k] += st * sj * sj * inv_sqrt_[k]; });
    });
  }

  double score(const Perturbation& p) const {
    if (p.is_edge()) {
      const GraphView view{g_, &inv_sqrt_, self_loops_, p.a, p.b, !g_->has_edge(p.a, p.b)};
      return margin_from_logits(two_hop_logits(view, xw_, target_), true_class_);
    }
    const RowVector logits = base_logits_ - two_hop_[p.a] * w_->row(p.b);
    return margin_from_logits(logits, true_class_);
  }

  double base_margin() const { return margin_from_logits(base_logits_, true_class_); }

 private:
  const Matrix* w_;
  const Graph* g_;
  NodeId target_;
  ClassId true_class_;
  bool self_loops_;
  Matrix xw_;
  std::vector<double> inv_sqrt_;
  RowVector base_logits_;
  std::vector<double> two_hop_;
};

}  // namespace

double score_perturbation(const SurrogateParams& s, const Graph& g, const FeatureMatrix& x, const Perturbation& pert,
                          NodeId target, ClassId true_class, bool self_loops) {
  return SurrogateScorer(s, g, x, target, true_class, self_loops).score(pert);
}

std::vector<double> score_candidates(const SurrogateParams& s, const Graph& g, const FeatureMatrix& x,
                                     std::span<const Perturbation> cands, NodeId target, ClassId true_class,
                                     bool self_loops, Exec exec) {
  const SurrogateScorer scorer(s, g, x, target, true_class, self_loops);
  std::vector<double> scores(cands.size());
  const auto n = static_cast<std::ptrdiff_t>(cands.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < n; ++i) scores[i] = scorer.score(cands[i]);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) scores[i] = scorer.score(cands[i]);
  }
  return scores;
}

std::size_t best_candidate(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("best_candidate: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

Dataset apply_perturbation(const Dataset& ds, const Perturbation& p) {
  Dataset out = ds;
  if (p.is_edge()) {
    out.graph = flip_edge(ds.graph, p.a, p.b);
  } else {
    out.features = ds.features.turn_off(p.a, p.b);
  }
  return out;
}

AttackEnvironment make_attack_environment(const Dataset& clean, const Split& split, const TrainConfig& victim,
                                          const DefenseConfig& defense, std::uint64_t seed) {
  AttackEnvironment env;
  env.clean = &clean;
  env.split = &split;
  env.victim = victim;
  env.defense = defense;
  env.seed = seed;
  TrainConfig clean_cfg = victim;
  clean_cfg.seed = derive_seed(seed, 0xC1EA);
  env.clean_logits = train_victim(clean, split, clean_cfg, defense).logits;
  TrainConfig surrogate_cfg = victim;
  surrogate_cfg.seed = derive_seed(seed, 0x5u);
  env.surrogate = train_surrogate(clean, split, surrogate_cfg, defense);
  return env;
}

AttackTrace attack_target(const AttackEnvironment& env, NodeId target, const AttackConfig& cfg) {
  cfg.validate();
  const Dataset& clean = *env.clean;
  const Split& split = *env.split;
  AttackTrace trace;
  trace.target = target;
  trace.true_class = clean.labels.at(static_cast<std::size_t>(target));
  const double clean_margin = margin_from_logits(env.clean_logits.row(target), trace.true_class);
  if (!(clean_margin > 0.0)) {
    throw std::invalid_argument("target " + std::to_string(target) + " is misclassified by the clean model");
  }
  trace.margins.push_back(clean_margin);

  const bool self_loops = env.victim.self_loops;
  const auto attackers = select_attackers(clean.graph, target, cfg.mode);
  Dataset current = clean;
  trace.surrogate_margins.push_back(
      SurrogateScorer(env.surrogate, current.graph, current.features, target, trace.true_class, self_loops)
          .base_margin());

  auto evaluate = [&](int step) {
    TrainConfig retrain = env.victim;
    retrain.seed = derive_seed(env.seed, static_cast<std::uint64_t>(target), static_cast<std::uint64_t>(step));
    const Matrix logits = train_victim(current, split, retrain, env.defense).logits;
    trace.margins.back() = margin_from_logits(logits.row(target), trace.true_class);
  };

  for (int step = 1; step <= cfg.budget; ++step) {
    auto cands = candidate_perturbations(current.graph, current.features, attackers, cfg.surface, target, cfg.mode);
    cands = filter_singletons(cands, current.graph);
    if (cfg.unnoticeable) cands = unnoticeable_structure(cands, current.graph, clean.graph, cfg.unnoticeable_cfg);
    cands = filter_training(cands, current.graph, current.labels, current.n_classes, split, cfg.adapted);
    if (cands.empty()) {
      trace.exhausted = true;
      if (!trace.applied.empty() && !trace.margins.back()) evaluate(step - 1);
      break;
    }
    const auto scores = score_candidates(env.surrogate, current.graph, current.features, cands, target,
                                         trace.true_class, self_loops);
    const std::size_t best = best_candidate(scores);
    current = apply_perturbation(current, cands[best]);
    trace.applied.push_back(cands[best]);
    trace.surrogate_margins.push_back(scores[best]);
    trace.margins.emplace_back(std::nullopt);
    if (step % cfg.eval_stride == 0 || step == cfg.budget) evaluate(step);
  }
  return trace;
}

}  // namespace gcnrobust
