#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gcnrobust/types.hpp"

namespace gcnrobust {

using Edge = std::pair<NodeId, NodeId>;

/// Immutable simple undirected graph in CSR form. Neighbor lists are sorted,
/// so edge lookup is a binary search.
class Graph {
 public:
  Graph() = default;
  explicit Graph(NodeId n_nodes);

  /// Builds from an arbitrary edge list: pairs are symmetrized, duplicates
  /// merged and self-loops dropped. Throws std::out_of_range on bad indices.
  static Graph from_edges(NodeId n_nodes, std::span<const Edge> edges);

  NodeId n_nodes() const { return n_nodes_; }
  std::size_t n_edges() const { return neighbors_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {neighbors_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  NodeId degree(NodeId u) const { return static_cast<NodeId>(offsets_[u + 1] - offsets_[u]); }
  bool has_edge(NodeId u, NodeId v) const;

  /// Canonical (u < v) edge list, lexicographically sorted.
  std::vector<Edge> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  NodeId n_nodes_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbors_;
};

using DegreeVector = std::vector<NodeId>;

DegreeVector degree_vector(const Graph& g);

/// Returns a copy of `g` with edge (u,v) toggled. Throws std::invalid_argument
/// when u == v and std::out_of_range for bad indices.
Graph flip_edge(const Graph& g, NodeId u, NodeId v);

/// Symmetric normalization D^{-1/2} A D^{-1/2}, optionally of A + I. Rows and
/// columns of zero-degree nodes are all zero.
struct NormalizedAdjacency {
  NodeId n = 0;
  bool self_loops = false;
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> columns;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  double at(NodeId i, NodeId j) const;
  Matrix to_dense() const;
};

NormalizedAdjacency normalized_adjacency(const Graph& g, bool self_loops = false);

/// Cut size between `train` and the rest, divided by the number of
/// non-training nodes. Throws std::invalid_argument when train covers V.
double avg_training_neighbors(const Graph& g, std::span<const NodeId> train);

/// Membership mask of length n for a node list.
std::vector<char> node_mask(NodeId n, std::span<const NodeId> nodes);

}  // namespace gcnrobust
