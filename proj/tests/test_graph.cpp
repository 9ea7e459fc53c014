#include <doctest.h>

#include "gcnrobust/graph.hpp"
#include "oracles.hpp"

using namespace gcnrobust;

namespace {

Graph path3() {
  const std::vector<Edge> e{{0, 1}, {1, 2}};
  return Graph::from_edges(3, e);
}

Graph star(NodeId leaves) {
  std::vector<Edge> e;
  for (NodeId i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return Graph::from_edges(leaves + 1, e);
}

}  // namespace

TEST_CASE("degree vectors") {
  CHECK(degree_vector(path3()) == DegreeVector{1, 2, 1});
  CHECK(degree_vector(Graph(3)) == DegreeVector{0, 0, 0});
  CHECK(degree_vector(star(4)) == DegreeVector{4, 1, 1, 1, 1});
}

TEST_CASE("from_edges symmetrizes and drops duplicates and self-loops") {
  const std::vector<Edge> e{{0, 1}, {1, 0}, {2, 2}, {1, 2}, {2, 1}};
  const Graph g = Graph::from_edges(3, e);
  CHECK(g.n_edges() == 2);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(2, 2));
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {1, 2}});
  const std::vector<Edge> bad{{0, 3}};
  CHECK_THROWS_AS(Graph::from_edges(3, bad), std::out_of_range);
}

TEST_CASE("normalized adjacency on small graphs") {
  const std::vector<Edge> one{{0, 1}};
  const auto a = normalized_adjacency(Graph::from_edges(2, one));
  CHECK(a.at(0, 1) == 1.0);
  CHECK(a.at(1, 0) == 1.0);
  CHECK(a.at(0, 0) == 0.0);

  const auto p = normalized_adjacency(path3());
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(p.at(0, 1) == doctest::Approx(r).epsilon(1e-15));
  CHECK(p.at(2, 1) == doctest::Approx(r).epsilon(1e-15));
  CHECK(p.at(0, 2) == 0.0);

  const std::vector<Edge> e{{0, 1}};
  const auto iso = normalized_adjacency(Graph::from_edges(3, e)).to_dense();
  CHECK(iso.row(2).isZero(0.0));
  CHECK(iso.col(2).isZero(0.0));
  const auto iso_loops = normalized_adjacency(Graph::from_edges(3, e), true).to_dense();
  CHECK(iso_loops(2, 2) == 1.0);
}

TEST_CASE("normalized adjacency matches the dense computation") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const NodeId n = 1 + static_cast<NodeId>(rng.below(64));
    const Graph g = oracle::random_graph(n, rng.uniform(0.0, 0.4), rng);
    for (bool loops : {false, true}) {
      const Matrix got = normalized_adjacency(g, loops).to_dense();
      const auto want = oracle::normalized(g, loops);
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(got.minCoeff() >= 0.0);
      CHECK(got.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("flip_edge toggles one edge and is an involution") {
  const Graph g = path3();
  const Graph tri = flip_edge(g, 0, 2);
  CHECK(tri.n_edges() == 3);
  CHECK(tri.has_edge(2, 0));
  CHECK(g.n_edges() == 2);
  CHECK(flip_edge(tri, 2, 0) == g);

  const std::vector<Edge> e{{0, 1}};
  CHECK(flip_edge(Graph::from_edges(2, e), 1, 0).n_edges() == 0);
  CHECK_THROWS_AS(flip_edge(g, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(flip_edge(g, 0, 3), std::out_of_range);

  Rng rng(5);
  const Graph r = oracle::random_graph(20, 0.2, rng);
  for (int i = 0; i < 50; ++i) {
    const auto u = static_cast<NodeId>(rng.below(20));
    const auto v = static_cast<NodeId>(rng.below(20));
    if (u == v) continue;
    const Graph f = flip_edge(r, u, v);
    CHECK(f.has_edge(u, v) != r.has_edge(u, v));
    CHECK(f.has_edge(u, v) == f.has_edge(v, u));
    CHECK(flip_edge(f, v, u) == r);
  }
}

TEST_CASE("average training neighbors") {
  const std::vector<Edge> e{{0, 1}};
  const std::vector<NodeId> t0{0};
  CHECK(avg_training_neighbors(Graph::from_edges(2, e), t0) == 1.0);
  CHECK(avg_training_neighbors(Graph(5), t0) == 0.0);
  CHECK(avg_training_neighbors(star(4), t0) == 1.0);
  const std::vector<NodeId> all{0, 1};
  CHECK_THROWS_AS(avg_training_neighbors(Graph::from_edges(2, e), all), std::invalid_argument);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = oracle::random_graph(30, 0.15, rng);
    std::vector<NodeId> train;
    for (NodeId u = 0; u < 30; ++u) {
      if (rng.bernoulli(0.3)) train.push_back(u);
    }
    if (train.empty() || train.size() == 30) continue;
    const auto a = oracle::adjacency(g);
    const auto mask = node_mask(30, train);
    double cut = 0;
    int outside = 0;
    for (NodeId i = 0; i < 30; ++i) {
      if (!mask[i]) ++outside;
      for (NodeId j = 0; j < 30; ++j) {
        if (mask[i] && !mask[j]) cut += a(i, j);
      }
    }
    CHECK(avg_training_neighbors(g, train) == cut / outside);
  }
}
