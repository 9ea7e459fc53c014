#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcnrobust/defenses.hpp"
#include "gcnrobust/gcn.hpp"

namespace gcnrobust {

/// An edge flip (u < v) or turning off feature `b` of node `a`. The
/// ordering (edge flips first, then by indices) is the greedy tie rule.
struct Perturbation {
  enum class Kind : std::uint8_t { EdgeFlip = 0, FeatureOff = 1 };
  Kind kind = Kind::EdgeFlip;
  NodeId a = 0;
  std::int32_t b = 0;

  static Perturbation edge(NodeId u, NodeId v) { return {Kind::EdgeFlip, std::min(u, v), std::max(u, v)}; }
  static Perturbation feature(NodeId node, FeatureId f) { return {Kind::FeatureOff, node, f}; }
  bool is_edge() const { return kind == Kind::EdgeFlip; }

  friend auto operator<=>(const Perturbation&, const Perturbation&) = default;
};

enum class AttackMode { Direct, Influencer };
enum class AttackSurface { Structure, Features, Both };
enum class AdaptedFilter { None, StratDegree, GreedyCover };

std::string_view to_string(AttackMode m);
std::string_view to_string(AttackSurface s);
std::string_view to_string(AdaptedFilter a);
AttackMode parse_attack_mode(std::string_view s);
AttackSurface parse_attack_surface(std::string_view s);
AdaptedFilter parse_adapted_filter(std::string_view s);

/// Settings of the degree-distribution test. The statistic compares power-law
/// fits of the clean and perturbed degree sequences (degrees >= d_min).
struct UnnoticeableConfig {
  double d_min = 2.0;
  double cutoff = 0.004;
};

struct AttackConfig {
  AttackMode mode = AttackMode::Influencer;
  AttackSurface surface = AttackSurface::Structure;
  int budget = 50;
  AdaptedFilter adapted = AdaptedFilter::None;
  bool unnoticeable = true;
  UnnoticeableConfig unnoticeable_cfg;
  int eval_stride = 1;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

nlohmann::json attack_config_to_json(const AttackConfig& c);
AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig defaults = {});

struct AttackTrace {
  NodeId target = 0;
  ClassId true_class = 0;
  /// Victim margin after i perturbations, i = 0..applied.size(); absent
  /// entries were not evaluated (eval_stride > 1).
  std::vector<std::optional<double>> margins;
  /// Surrogate margin after i perturbations (always present).
  std::vector<double> surrogate_margins;
  std::vector<Perturbation> applied;
  bool exhausted = false;
};

nlohmann::json trace_to_json(const AttackTrace& t, const AttackConfig& cfg);
AttackTrace trace_from_json(const nlohmann::json& j);

/// Direct: {target}. Influencer: the target's neighbors. Throws
/// std::invalid_argument for an isolated target in influencer mode.
std::vector<NodeId> select_attackers(const Graph& g, NodeId target, AttackMode mode);

/// Every flip (a, v), a an attacker and v != a, plus every FeatureOff (a, f)
/// with X[a, f] = 1, sorted by the tie order and deduplicated. In influencer
/// mode flips incident to the target are excluded.
std::vector<Perturbation> candidate_perturbations(const Graph& g, const FeatureMatrix& x,
                                                  std::span<const NodeId> attackers, AttackSurface surface,
                                                  NodeId target, AttackMode mode);

/// Removes edge deletions that would leave an endpoint with degree 0.
std::vector<Perturbation> filter_singletons(std::span<const Perturbation> cands, const Graph& g);

/// Likelihood-ratio statistic between power-law fits of two degree sequences.
double powerlaw_likelihood_ratio(const DegreeVector& original, const DegreeVector& perturbed, double d_min);

/// Keeps features and the flips whose statistic against the clean degree
/// sequence stays below the cutoff.
std::vector<Perturbation> unnoticeable_structure(std::span<const Perturbation> cands, const Graph& current,
                                                 const Graph& original, const UnnoticeableConfig& cfg);

/// Drops flips that could change which nodes the selection method would
/// train on. Identity for AdaptedFilter::None. Throws std::invalid_argument
/// when the filter does not match split.method.
std::vector<Perturbation> filter_training(std::span<const Perturbation> cands, const Graph& current,
                                          std::span<const ClassId> labels, ClassId n_classes, const Split& split,
                                          AdaptedFilter adapted);

/// Surrogate margin of `target` after hypothetically applying `pert`.
double score_perturbation(const SurrogateParams& s, const Graph& g, const FeatureMatrix& x, const Perturbation& pert,
                          NodeId target, ClassId true_class, bool self_loops = false);

/// Scores for a batch of candidates against one graph state.
std::vector<double> score_candidates(const SurrogateParams& s, const Graph& g, const FeatureMatrix& x,
                                     std::span<const Perturbation> cands, NodeId target, ClassId true_class,
                                     bool self_loops = false, Exec exec = Exec::Parallel);

/// Index of the lowest score; earliest index on ties. Candidates must be in
/// tie order.
std::size_t best_candidate(std::span<const double> scores);

Dataset apply_perturbation(const Dataset& ds, const Perturbation& p);

/// Clean data and models shared by every target of one trial.
struct AttackEnvironment {
  const Dataset* clean = nullptr;
  const Split* split = nullptr;
  TrainConfig victim;
  DefenseConfig defense;
  SurrogateParams surrogate;
  Matrix clean_logits;
  std::uint64_t seed = 0;
};

/// Trains the clean victim and the surrogate (both on defended inputs).
AttackEnvironment make_attack_environment(const Dataset& clean, const Split& split, const TrainConfig& victim,
                                          const DefenseConfig& defense, std::uint64_t seed);

/// Greedy poisoning of one target. The victim is retrained on the poisoned
/// data every eval_stride steps, at the last step, and whenever the
/// candidate set runs out. Throws std::invalid_argument if the target is
/// misclassified by the clean model.
AttackTrace attack_target(const AttackEnvironment& env, NodeId target, const AttackConfig& cfg);

}  // namespace gcnrobust
