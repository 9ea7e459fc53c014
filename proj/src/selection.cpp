#include "gcnrobust/selection.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "gcnrobust/rng.hpp"

namespace gcnrobust {

std::string_view to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::Random: return "random";
    case SelectionMethod::StratDegree: return "strat-degree";
    case SelectionMethod::GreedyCover: return "greedy-cover";
  }
  return "?";
}

SelectionMethod parse_selection_method(std::string_view s) {
  if (s == "random") return SelectionMethod::Random;
  if (s == "strat-degree") return SelectionMethod::StratDegree;
  if (s == "greedy-cover") return SelectionMethod::GreedyCover;
  throw std::invalid_argument("unknown selection method '" + std::string(s) + "'");
}

void Split::validate(NodeId n) const {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto* part : {&train, &val, &test}) {
    for (NodeId u : *part) {
      if (u < 0 || u >= n) throw std::invalid_argument("split: node out of range");
      if (seen[u]++) throw std::invalid_argument("split: node " + std::to_string(u) + " assigned twice");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::invalid_argument("split: some node is unassigned");
  }
}

nlohmann::json split_to_json(const Split& s) {
  return {{"method", to_string(s.method)}, {"train_frac", s.train_frac}, {"val_frac", s.val_frac},
          {"seed", s.seed},  {"stratified", s.stratified}, {"train", s.train},
          {"val", s.val},    {"test", s.test}};
}

Split split_from_json(const nlohmann::json& j) {
  Split s;
  s.method = parse_selection_method(j.at("method").get<std::string>());
  s.train_frac = j.at("train_frac").get<double>();
  s.val_frac = j.at("val_frac").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.stratified = j.value("stratified", true);
  s.train = j.at("train").get<std::vector<NodeId>>();
  s.val = j.at("val").get<std::vector<NodeId>>();
  s.test = j.at("test").get<std::vector<NodeId>>();
  return s;
}

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5 + 1e-9)); }

NodeId cover_train_count(double t, NodeId n) { return static_cast<NodeId>(std::ceil(t * n - 1e-9)); }

namespace {

void check_fractions(double t, double v) {
  if (!(t >= 0.0 && v >= 0.0 && t + v < 1.0)) {
    throw std::invalid_argument("split fractions must satisfy t >= 0, v >= 0, t + v < 1");
  }
}

NodeId capped(std::int64_t want, std::size_t available) {
  return static_cast<NodeId>(std::min<std::int64_t>(want, static_cast<std::int64_t>(available)));
}

Split finish(Split s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// Stratified random val/test assignment of every node not in `train`.
// Validation takes round(v * |class|) nodes of each class.
Split fill_val_test(const Dataset& ds, Split s, Rng& rng) {
  const auto in_train = node_mask(ds.n_nodes(), s.train);
  for (const auto& members : ds.nodes_by_class()) {
    std::vector<NodeId> rest;
    for (NodeId u : members) {
      if (!in_train[u]) rest.push_back(u);
    }
    rng.shuffle(std::span<NodeId>(rest));
    const NodeId n_val = capped(round_half_up(s.val_frac * static_cast<double>(members.size())), rest.size());
    s.val.insert(s.val.end(), rest.begin(), rest.begin() + n_val);
    s.test.insert(s.test.end(), rest.begin() + n_val, rest.end());
  }
  return finish(std::move(s));
}

}  // namespace

Split random_split(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed, bool stratified) {
  check_fractions(train_frac, val_frac);
  Split s;
  s.method = SelectionMethod::Random;
  s.train_frac = train_frac;
  s.val_frac = val_frac;
  s.seed = seed;
  s.stratified = stratified;
  Rng rng(seed);

  auto take = [&](std::vector<NodeId> pool) {
    rng.shuffle(std::span<NodeId>(pool));
    const auto n = static_cast<double>(pool.size());
    const NodeId n_train = capped(round_half_up(train_frac * n), pool.size());
    const NodeId n_val = capped(round_half_up(val_frac * n), pool.size() - n_train);
    s.train.insert(s.train.end(), pool.begin(), pool.begin() + n_train);
    s.val.insert(s.val.end(), pool.begin() + n_train, pool.begin() + n_train + n_val);
    s.test.insert(s.test.end(), pool.begin() + n_train + n_val, pool.end());
  };

  if (stratified) {
    for (auto& members : ds.nodes_by_class()) take(std::move(members));
  } else {
    std::vector<NodeId> all(static_cast<std::size_t>(ds.n_nodes()));
    for (NodeId u = 0; u < ds.n_nodes(); ++u) all[u] = u;
    take(std::move(all));
  }
  return finish(std::move(s));
}

Split strat_degree(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed) {
  check_fractions(train_frac, val_frac);
  Split s;
  s.method = SelectionMethod::StratDegree;
  s.train_frac = train_frac;
  s.val_frac = val_frac;
  s.seed = seed;
  for (auto members : ds.nodes_by_class()) {
    std::stable_sort(members.begin(), members.end(), [&](NodeId a, NodeId b) {
      return ds.graph.degree(a) > ds.graph.degree(b);
    });
    const NodeId n_train =
        capped(round_half_up(train_frac * static_cast<double>(members.size())), members.size());
    s.train.insert(s.train.end(), members.begin(), members.begin() + n_train);
  }
  Rng rng(seed);
  return fill_val_test(ds, std::move(s), rng);
}

Split greedy_cover(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed) {
  check_fractions(train_frac, val_frac);
  Split s;
  s.method = SelectionMethod::GreedyCover;
  s.train_frac = train_frac;
  s.val_frac = val_frac;
  s.seed = seed;
  s.train = greedy_cover_train(ds.graph, cover_train_count(train_frac, ds.n_nodes()));
  Rng rng(seed);
  return fill_val_test(ds, std::move(s), rng);
}

Split make_split(SelectionMethod method, const Dataset& ds, double train_frac, double val_frac,
                 std::uint64_t seed) {
  switch (method) {
    case SelectionMethod::Random: return random_split(ds, train_frac, val_frac, seed, true);
    case SelectionMethod::StratDegree: return strat_degree(ds, train_frac, val_frac, seed);
    case SelectionMethod::GreedyCover: return greedy_cover(ds, train_frac, val_frac, seed);
  }
  throw std::invalid_argument("make_split: bad method");
}

namespace {

NodeId max_degree(const Graph& g) {
  NodeId best = 0;
  for (NodeId u = 0; u < g.n_nodes(); ++u) best = std::max(best, g.degree(u));
  return best;
}

// When no candidate has a neighbor at mark k for any k <= max degree the
// greedy rule cannot make progress; the remaining picks go to the lowest
// indices not yet chosen.
void fill_lowest(std::vector<NodeId>& train, std::vector<int>& marks, NodeId count) {
  for (NodeId u = 0; u < static_cast<NodeId>(marks.size()) && static_cast<NodeId>(train.size()) < count; ++u) {
    if (marks[u] != -1) {
      marks[u] = -1;
      train.push_back(u);
    }
  }
}

void add_to_cover(const Graph& g, std::vector<int>& marks, NodeId v) {
  marks[v] = -1;
  for (NodeId w : g.neighbors(v)) {
    if (marks[w] != -1) ++marks[w];
  }
}

}  // namespace

std::vector<NodeId> greedy_cover_train_naive(const Graph& g, NodeId count, const CoverObserver& observer) {
  const NodeId n = g.n_nodes();
  count = std::min(count, n);
  const NodeId max_deg = max_degree(g);
  CoverState state{std::vector<int>(static_cast<std::size_t>(n), 0), 0};
  std::vector<NodeId> train;
  while (static_cast<NodeId>(train.size()) < count) {
    NodeId best = -1;
    int best_count = -1;
    for (NodeId u = 0; u < n; ++u) {
      if (state.marks[u] == -1) continue;
      int c = 0;
      for (NodeId w : g.neighbors(u)) c += state.marks[w] == state.k ? 1 : 0;
      if (c > best_count) {
        best_count = c;
        best = u;
      }
    }
    if (best_count == 0) {
      ++state.k;
      if (state.k > max_deg) {
        fill_lowest(train, state.marks, count);
        if (observer) observer(state, train);
        break;
      }
    } else {
      add_to_cover(g, state.marks, best);
      train.push_back(best);
    }
    if (observer) observer(state, train);
  }
  return train;
}

std::vector<NodeId> greedy_cover_train(const Graph& g, NodeId count) {
  const NodeId n = g.n_nodes();
  count = std::min(count, n);
  const NodeId max_deg = max_degree(g);
  std::vector<int> marks(static_cast<std::size_t>(n), 0);
  std::vector<int> score(static_cast<std::size_t>(n), 0);
  int k = 0;

  // Max-heap on score, ties to the lower node index.
  using Entry = std::pair<int, NodeId>;
  auto worse = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);

  auto rebuild = [&] {
    heap = decltype(heap)(worse);
    for (NodeId u = 0; u < n; ++u) {
      if (marks[u] == -1) continue;
      int c = 0;
      for (NodeId w : g.neighbors(u)) c += marks[w] == k ? 1 : 0;
      score[u] = c;
      heap.emplace(c, u);
    }
  };
  auto bump = [&](NodeId changed, int delta) {
    for (NodeId w : g.neighbors(changed)) {
      if (marks[w] == -1) continue;
      score[w] += delta;
      heap.emplace(score[w], w);
    }
  };

  rebuild();
  std::vector<NodeId> train;
  while (static_cast<NodeId>(train.size()) < count) {
    while (!heap.empty()) {
      auto [c, u] = heap.top();
      if (marks[u] != -1 && score[u] == c) break;
      heap.pop();
    }
    if (heap.empty() || heap.top().first == 0) {
      ++k;
      if (k > max_deg) {
        fill_lowest(train, marks, count);
        break;
      }
      rebuild();
      continue;
    }
    const NodeId v = heap.top().second;
    heap.pop();
    const int old_mark = marks[v];
    marks[v] = -1;
    train.push_back(v);
    if (old_mark == k) bump(v, -1);
    for (NodeId u : g.neighbors(v)) {
      if (marks[u] == -1) continue;
      const int before = marks[u]++;
      if (before == k) bump(u, -1);
      if (before + 1 == k) bump(u, +1);
    }
  }
  return train;
}

std::vector<double> per_class_degree_thresholds(const DegreeVector& degrees, const std::vector<ClassId>& labels,
                                                ClassId n_classes, double train_frac) {
  std::vector<std::vector<NodeId>> per_class(static_cast<std::size_t>(n_classes));
  for (std::size_t u = 0; u < labels.size(); ++u) per_class[labels[u]].push_back(degrees[u]);
  std::vector<double> thresholds;
  thresholds.reserve(per_class.size());
  for (ClassId c = 0; c < n_classes; ++c) {
    auto& d = per_class[c];
    if (d.empty()) throw std::invalid_argument("per_class_degree_thresholds: class " + std::to_string(c) + " is empty");
    std::sort(d.begin(), d.end());
    auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(d.size()) * (1.0 - train_frac)));
    idx = std::min(idx, d.size() - 1);
    thresholds.push_back(d[idx]);
  }
  return thresholds;
}

std::vector<double> per_class_degree_thresholds(const Dataset& ds, double train_frac) {
  return per_class_degree_thresholds(degree_vector(ds.graph), ds.labels, ds.n_classes, train_frac);
}

}  // namespace gcnrobust
