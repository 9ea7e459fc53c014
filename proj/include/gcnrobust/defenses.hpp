#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include <json.hpp>

#include "gcnrobust/gcn.hpp"

namespace gcnrobust {

/// Drops every edge whose endpoints share no feature.
Graph remove_dissimilar_edges(const Graph& g, const FeatureMatrix& x);

/// Rank-r factors of an m x n source matrix: M ~ U diag(S) V^T.
struct LowRankFactors {
  Matrix u;  // m x r
  Vector s;  // r, descending
  Matrix v;  // n x r

  Eigen::Index rank() const { return s.size(); }
  Matrix reconstruct() const;
};

struct SvdOptions {
  int oversampling = 8;
  /// Minimum number of power (subspace) iterations.
  int power_iterations = 4;
  /// Further iterations continue until the leading r singular values change
  /// by less than this relative amount, up to max_iterations.
  double tolerance = 1e-14;
  int max_iterations = 500;
  std::uint64_t seed = 0;
};

/// Randomized subspace iteration for the top-r singular triplets.
/// Throws std::invalid_argument when r > min(rows, cols) or r < 1.
LowRankFactors truncated_svd(const LinearOperator& m, Eigen::Index r, const SvdOptions& opts = {});
LowRankFactors truncated_svd(const Matrix& m, Eigen::Index r, const SvdOptions& opts = {});

/// U (S (V^T rhs)), never forming the dense reconstruction.
class LowRankOperator final : public LinearOperator {
 public:
  explicit LowRankOperator(const LowRankFactors& f) : f_(&f) {}
  Eigen::Index rows() const override { return f_->u.rows(); }
  Eigen::Index cols() const override { return f_->v.rows(); }
  Matrix apply(const Matrix& rhs) const override;
  Matrix apply_transposed(const Matrix& rhs) const override;

 private:
  const LowRankFactors* f_;
};

/// gcn_forward with the propagation matrix and X replaced by their low-rank
/// reconstructions, evaluated in factored order.
Matrix low_rank_gcn_forward(const GcnParams& p, const LowRankFactors& adjacency, const LowRankFactors& features);

struct DefenseConfig {
  bool remove_dissimilar = false;
  /// Rank of the low-rank defense; 0 disables it.
  int low_rank = 0;
  std::uint64_t svd_seed = 0;

  bool any() const { return remove_dissimilar || low_rank > 0; }
};

nlohmann::json defense_config_to_json(const DefenseConfig& d);
DefenseConfig defense_config_from_json(const nlohmann::json& j);

/// Model inputs after applying the configured defenses: similarity removal
/// acts on the graph before normalization, the low-rank step replaces the
/// normalized adjacency and X by rank-r factors.
struct ModelInputs {
  Graph graph;
  NormalizedAdjacency adjacency;
  FeatureMatrix features;
  std::optional<LowRankFactors> adjacency_factors;
  std::optional<LowRankFactors> feature_factors;

  /// Operators reference this object; it must outlive them.
  std::unique_ptr<LinearOperator> adjacency_op() const;
  std::unique_ptr<LinearOperator> feature_op() const;
};

ModelInputs prepare_inputs(const Dataset& ds, bool self_loops, const DefenseConfig& defense);

struct TrainedModel {
  GcnParams params;
  Matrix logits;  // N x C, dropout off
};

/// Trains the full GCN on the defended inputs. Under the low-rank defense
/// feature dropout is off (the factored X has no sparse entries to drop).
TrainedModel train_victim(const Dataset& ds, const Split& split, const TrainConfig& cfg, const DefenseConfig& defense);

/// Surrogate trained on the same defended inputs the victim sees.
SurrogateParams train_surrogate(const Dataset& ds, const Split& split, const TrainConfig& cfg,
                                const DefenseConfig& defense);

nlohmann::json factors_to_json(const LowRankFactors& f);
LowRankFactors factors_from_json(const nlohmann::json& j);

}  // namespace gcnrobust
