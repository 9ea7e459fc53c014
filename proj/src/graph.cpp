#include "gcnrobust/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gcnrobust {

namespace {

void check_node(NodeId n, NodeId u) {
  if (u < 0 || u >= n) {
    throw std::out_of_range("node index " + std::to_string(u) + " outside [0, " +
                            std::to_string(n) + ")");
  }
}

}  // namespace

Graph::Graph(NodeId n_nodes) : n_nodes_(n_nodes), offsets_(static_cast<std::size_t>(n_nodes) + 1, 0) {
  if (n_nodes < 0) throw std::invalid_argument("negative node count");
}

Graph Graph::from_edges(NodeId n_nodes, std::span<const Edge> edges) {
  Graph g(n_nodes);
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    check_node(n_nodes, u);
    check_node(n_nodes, v);
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  g.neighbors_.reserve(directed.size());
  for (auto [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.neighbors_.push_back(v);
  }
  for (NodeId u = 0; u < n_nodes; ++u) g.offsets_[u + 1] += g.offsets_[u];
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(n_edges());
  for (NodeId u = 0; u < n_nodes_; ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

DegreeVector degree_vector(const Graph& g) {
  DegreeVector d(static_cast<std::size_t>(g.n_nodes()));
  for (NodeId u = 0; u < g.n_nodes(); ++u) d[u] = g.degree(u);
  return d;
}

Graph flip_edge(const Graph& g, NodeId u, NodeId v) {
  check_node(g.n_nodes(), u);
  check_node(g.n_nodes(), v);
  if (u == v) throw std::invalid_argument("flip_edge: self-loop (" + std::to_string(u) + ")");
  std::vector<Edge> edges = g.edges();
  const Edge key{std::min(u, v), std::max(u, v)};
  auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it != edges.end() && *it == key) {
    edges.erase(it);
  } else {
    edges.insert(it, key);
  }
  return Graph::from_edges(g.n_nodes(), edges);
}

double NormalizedAdjacency::at(NodeId i, NodeId j) const {
  const auto begin = columns.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
  const auto end = columns.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - columns.begin())];
}

Matrix NormalizedAdjacency::to_dense() const {
  Matrix out = Matrix::Zero(n, n);
  for (NodeId i = 0; i < n; ++i) {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out(i, columns[k]) = values[k];
  }
  return out;
}

NormalizedAdjacency normalized_adjacency(const Graph& g, bool self_loops) {
  const NodeId n = g.n_nodes();
  NormalizedAdjacency out;
  out.n = n;
  out.self_loops = self_loops;
  out.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  out.columns.reserve(2 * g.n_edges() + (self_loops ? n : 0));
  out.values.reserve(out.columns.capacity());

  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (NodeId u = 0; u < n; ++u) {
    const double d = g.degree(u) + (self_loops ? 1.0 : 0.0);
    inv_sqrt[u] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  for (NodeId u = 0; u < n; ++u) {
    bool diagonal_done = !self_loops;
    for (NodeId v : g.neighbors(u)) {
      if (!diagonal_done && v > u) {
        out.columns.push_back(u);
        out.values.push_back(inv_sqrt[u] * inv_sqrt[u]);
        diagonal_done = true;
      }
      out.columns.push_back(v);
      out.values.push_back(inv_sqrt[u] * inv_sqrt[v]);
    }
    if (!diagonal_done) {
      out.columns.push_back(u);
      out.values.push_back(inv_sqrt[u] * inv_sqrt[u]);
    }
    out.offsets[u + 1] = out.columns.size();
  }
  return out;
}

std::vector<char> node_mask(NodeId n, std::span<const NodeId> nodes) {
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  for (NodeId u : nodes) {
    check_node(n, u);
    mask[u] = 1;
  }
  return mask;
}

double avg_training_neighbors(const Graph& g, std::span<const NodeId> train) {
  const auto in_train = node_mask(g.n_nodes(), train);
  const auto n_train = static_cast<NodeId>(std::count(in_train.begin(), in_train.end(), 1));
  const NodeId n_rest = g.n_nodes() - n_train;
  if (n_rest == 0) {
    throw std::invalid_argument("avg_training_neighbors: training set covers every node");
  }
  std::size_t cut = 0;
  for (NodeId u = 0; u < g.n_nodes(); ++u) {
    if (!in_train[u]) continue;
    for (NodeId v : g.neighbors(u)) cut += in_train[v] ? 0 : 1;
  }
  return static_cast<double>(cut) / static_cast<double>(n_rest);
}

}  // namespace gcnrobust
