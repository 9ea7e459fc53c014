// Small labelled graphs shared by the attack, harness and acceptance tests.
#pragma once

#include <vector>

#include "gcnrobust/dataset.hpp"
#include "gcnrobust/rng.hpp"

namespace fixture {

using namespace gcnrobust;

// n nodes split round-robin into C classes; edges inside a class with
// probability p_in, across with p_out; each node carries its class indicator
// plus random noise features.
inline Dataset small_dataset(NodeId n, ClassId n_classes, int n_noise, double p_in, double p_out,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId u = 0; u < n; ++u) labels[u] = u % n_classes;
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.bernoulli(labels[u] == labels[v] ? p_in : p_out)) edges.emplace_back(u, v);
    }
  }
  std::vector<FeatureEntry> ones;
  const int d = n_classes + n_noise;
  for (NodeId u = 0; u < n; ++u) {
    ones.emplace_back(u, labels[u]);
    for (int f = n_classes; f < d; ++f) {
      if (rng.bernoulli(0.3)) ones.emplace_back(u, f);
    }
  }
  Dataset ds;
  ds.name = "fixture";
  ds.graph = Graph::from_edges(n, edges);
  ds.features = FeatureMatrix(n, d, ones);
  ds.labels = std::move(labels);
  ds.n_classes = n_classes;
  return ds;
}

}  // namespace fixture
