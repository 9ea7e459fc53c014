#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcnrobust/dataset.hpp"

namespace gcnrobust {

enum class SelectionMethod { Random, StratDegree, GreedyCover };

std::string_view to_string(SelectionMethod m);
/// Accepts "random", "strat-degree", "greedy-cover". Throws std::invalid_argument.
SelectionMethod parse_selection_method(std::string_view s);

/// Disjoint train/validation/test partition of the node set. Node lists are
/// sorted ascending.
struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
  SelectionMethod method = SelectionMethod::Random;
  double train_frac = 0.0;
  double val_frac = 0.0;
  std::uint64_t seed = 0;
  bool stratified = true;

  /// Throws std::invalid_argument unless the three sets partition [0, n).
  void validate(NodeId n) const;

  friend bool operator==(const Split&, const Split&) = default;
};

nlohmann::json split_to_json(const Split& s);
Split split_from_json(const nlohmann::json& j);

/// floor(x + 1/2) with a small tolerance for values like 0.15 * 10.
std::int64_t round_half_up(double x);
/// Number of nodes GreedyCover selects: ceil(t * n).
NodeId cover_train_count(double t, NodeId n);

Split random_split(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed,
                   bool stratified = true);

/// Per class, the round(t * |class|) highest-degree nodes train (ties to the
/// lower index); the rest is split stratified at random.
Split strat_degree(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed);

Split greedy_cover(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed);

Split make_split(SelectionMethod method, const Dataset& ds, double train_frac, double val_frac,
                 std::uint64_t seed);

/// Marks of the greedy cover: -1 for training nodes, otherwise the number
/// of training neighbors. `k` is the current threshold.
struct CoverState {
  std::vector<int> marks;
  int k = 0;
};

using CoverObserver = std::function<void(const CoverState&, const std::vector<NodeId>& train)>;

/// Greedy cover selection of `count` nodes using a lazy max-heap keyed on
/// the number of neighbors whose mark equals k. Returned in selection order.
std::vector<NodeId> greedy_cover_train(const Graph& g, NodeId count);

/// The same selection recounting every candidate each iteration, O(|V||E|).
/// The observer, if set, runs after every iteration (selection or k increment).
std::vector<NodeId> greedy_cover_train_naive(const Graph& g, NodeId count, const CoverObserver& observer = {});

/// For each class: its degrees sorted ascending, element at
/// floor(|class| * (1 - t)). Throws std::invalid_argument on an empty class.
std::vector<double> per_class_degree_thresholds(const DegreeVector& degrees, const std::vector<ClassId>& labels,
                                                ClassId n_classes, double train_frac);
std::vector<double> per_class_degree_thresholds(const Dataset& ds, double train_frac);

}  // namespace gcnrobust
