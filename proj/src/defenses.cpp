#include "gcnrobust/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace gcnrobust {

Graph remove_dissimilar_edges(const Graph& g, const FeatureMatrix& x) {
  if (x.rows() != g.n_nodes()) throw std::invalid_argument("remove_dissimilar_edges: feature rows != node count");
  std::vector<Edge> kept;
  for (auto [u, v] : g.edges()) {
    if (x.overlap(u, v) > 0) kept.emplace_back(u, v);
  }
  return Graph::from_edges(g.n_nodes(), kept);
}

Matrix LowRankFactors::reconstruct() const { return u * s.asDiagonal() * v.transpose(); }

Matrix LowRankOperator::apply(const Matrix& rhs) const {
  if (rhs.rows() != f_->v.rows()) throw std::invalid_argument("LowRankOperator::apply: dimension mismatch");
  const Matrix inner = f_->s.asDiagonal() * (f_->v.transpose() * rhs);
  return f_->u * inner;
}

Matrix LowRankOperator::apply_transposed(const Matrix& rhs) const {
  if (rhs.rows() != f_->u.rows()) throw std::invalid_argument("LowRankOperator::apply_transposed: dimension mismatch");
  const Matrix inner = f_->s.asDiagonal() * (f_->u.transpose() * rhs);
  return f_->v * inner;
}

namespace {

Eigen::MatrixXd orthonormal_basis(const Matrix& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(y)};
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

LowRankFactors truncated_svd(const LinearOperator& m, Eigen::Index r, const SvdOptions& opts) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const Eigen::Index full = std::min(rows, cols);
  if (r < 1 || r > full) {
    throw std::invalid_argument("truncated_svd: rank " + std::to_string(r) + " outside [1, " + std::to_string(full) + "]");
  }
  const Eigen::Index width = std::min<Eigen::Index>(r + opts.oversampling, full);

  Rng rng(opts.seed);
  Matrix omega(cols, width);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(m.apply(omega));
  Eigen::BDCSVD<Eigen::MatrixXd> core;
  Vector previous;
  for (int it = 0;; ++it) {
    // B = Q^T M, held transposed as M^T Q.
    const Matrix bt = m.apply_transposed(Matrix(q));
    core.compute(Eigen::MatrixXd(bt.transpose()), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector current = core.singularValues().head(r);
    if (it >= opts.power_iterations) {
      const bool converged =
          previous.size() == r &&
          ((current - previous).cwiseAbs().array() <= opts.tolerance * current.cwiseAbs().maxCoeff()).all();
      if (converged || it >= opts.max_iterations || width == full) break;
    }
    previous = current;
    q = orthonormal_basis(m.apply(Matrix(orthonormal_basis(bt))));
  }

  LowRankFactors f;
  f.u = q * core.matrixU().leftCols(r);
  f.s = core.singularValues().head(r);
  f.v = core.matrixV().leftCols(r);
  return f;
}

LowRankFactors truncated_svd(const Matrix& m, Eigen::Index r, const SvdOptions& opts) {
  return truncated_svd(DenseOperator(m), r, opts);
}

Matrix low_rank_gcn_forward(const GcnParams& p, const LowRankFactors& adjacency, const LowRankFactors& features) {
  if (adjacency.u.rows() != adjacency.v.rows()) throw std::invalid_argument("adjacency factors are not square");
  if (features.u.rows() != adjacency.u.rows()) throw std::invalid_argument("feature factors: row mismatch");
  return gcn_forward(p, LowRankOperator(adjacency), LowRankOperator(features));
}

nlohmann::json defense_config_to_json(const DefenseConfig& d) {
  return {{"remove_dissimilar", d.remove_dissimilar}, {"low_rank", d.low_rank}, {"svd_seed", d.svd_seed}};
}

DefenseConfig defense_config_from_json(const nlohmann::json& j) {
  DefenseConfig d;
  d.remove_dissimilar = j.value("remove_dissimilar", d.remove_dissimilar);
  d.low_rank = j.value("low_rank", d.low_rank);
  d.svd_seed = j.value("svd_seed", d.svd_seed);
  if (d.low_rank < 0) throw std::invalid_argument("low_rank must be >= 0");
  return d;
}

std::unique_ptr<LinearOperator> ModelInputs::adjacency_op() const {
  if (adjacency_factors) return std::make_unique<LowRankOperator>(*adjacency_factors);
  return std::make_unique<AdjacencyOperator>(adjacency);
}

std::unique_ptr<LinearOperator> ModelInputs::feature_op() const {
  if (feature_factors) return std::make_unique<LowRankOperator>(*feature_factors);
  return std::make_unique<FeatureOperator>(features);
}

ModelInputs prepare_inputs(const Dataset& ds, bool self_loops, const DefenseConfig& defense) {
  ModelInputs in;
  in.graph = defense.remove_dissimilar ? remove_dissimilar_edges(ds.graph, ds.features) : ds.graph;
  in.adjacency = normalized_adjacency(in.graph, self_loops);
  in.features = ds.features;
  if (defense.low_rank > 0) {
    SvdOptions opts;
    opts.seed = defense.svd_seed;
    const Eigen::Index r_adj = std::min<Eigen::Index>(defense.low_rank, ds.n_nodes());
    in.adjacency_factors = truncated_svd(AdjacencyOperator(in.adjacency), r_adj, opts);
    opts.seed = derive_seed(defense.svd_seed, 1);
    const Eigen::Index r_x = std::min<Eigen::Index>(defense.low_rank, std::min<Eigen::Index>(ds.n_nodes(), ds.n_features()));
    in.feature_factors = truncated_svd(FeatureOperator(in.features), r_x, opts);
  }
  return in;
}

TrainedModel train_victim(const Dataset& ds, const Split& split, const TrainConfig& cfg, const DefenseConfig& defense) {
  const ModelInputs in = prepare_inputs(ds, cfg.self_loops, defense);
  const auto adj = in.adjacency_op();
  const auto x = in.feature_op();
  TrainedModel m;
  m.params = gcn_train(*adj, *x, ds.labels, ds.n_classes, split, cfg);
  m.logits = gcn_logits(m.params, *adj, *x);
  return m;
}

SurrogateParams train_surrogate(const Dataset& ds, const Split& split, const TrainConfig& cfg,
                                const DefenseConfig& defense) {
  const ModelInputs in = prepare_inputs(ds, cfg.self_loops, defense);
  return surrogate_train(*in.adjacency_op(), *in.feature_op(), ds.labels, ds.n_classes, split, cfg);
}

nlohmann::json factors_to_json(const LowRankFactors& f) {
  return {{"format", "gcnrobust-factors"},
          {"version", 1},
          {"u", matrix_to_json(f.u)},
          {"s", std::vector<double>(f.s.data(), f.s.data() + f.s.size())},
          {"v", matrix_to_json(f.v)}};
}

LowRankFactors factors_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "gcnrobust-factors" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version-1 factor checkpoint");
  }
  LowRankFactors f;
  f.u = matrix_from_json(j.at("u"));
  const auto s = j.at("s").get<std::vector<double>>();
  f.s = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  f.v = matrix_from_json(j.at("v"));
  if (f.u.cols() != f.s.size() || f.v.cols() != f.s.size()) throw std::invalid_argument("factor shapes disagree");
  return f;
}

}  // namespace gcnrobust
