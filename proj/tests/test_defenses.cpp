#include <doctest.h>

#include "fixtures.hpp"
#include "gcnrobust/defenses.hpp"
#include "gcnrobust/selection.hpp"
#include "oracles.hpp"

using namespace gcnrobust;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1, 1);
  }
  return m;
}

GcnParams random_params(Eigen::Index d, Eigen::Index h, Eigen::Index c, Rng& rng) {
  GcnParams p;
  p.w1 = random_matrix(d, h, rng);
  p.w2 = random_matrix(h, c, rng);
  p.b1 = random_matrix(1, h, rng);
  p.b2 = random_matrix(1, c, rng);
  p.use_bias = true;
  return p;
}

Matrix dense_gcn(const GcnParams& p, const Matrix& a, const Matrix& x) {
  const Matrix h = ((a * x * p.w1).rowwise() + p.b1).cwiseMax(0.0);
  const Matrix z = (a * h * p.w2).rowwise() + p.b2;
  return oracle::softmax(z);
}

}  // namespace

TEST_CASE("similarity defense drops edges without shared features") {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  const Graph g = Graph::from_edges(5, e);
  const std::vector<FeatureEntry> ones{{0, 0}, {1, 0}, {1, 1}, {2, 1}, {3, 2}};
  const FeatureMatrix x(5, 3, ones);
  const Graph kept = remove_dissimilar_edges(g, x);
  const std::vector<Edge> expect{{0, 1}, {1, 2}};
  CHECK(kept == Graph::from_edges(5, expect));
  CHECK(remove_dissimilar_edges(kept, x) == kept);

  const std::vector<FeatureEntry> none;
  CHECK(remove_dissimilar_edges(g, FeatureMatrix(5, 3, none)).n_edges() == 0);
  CHECK_THROWS_AS(remove_dissimilar_edges(g, FeatureMatrix(4, 3, none)), std::invalid_argument);
}

TEST_CASE("truncated SVD on small exact cases") {
  const LowRankFactors id = truncated_svd(Matrix(Matrix::Identity(3, 3)), 3);
  CHECK((id.s - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((id.reconstruct() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 1;
  const LowRankFactors one = truncated_svd(d, 1);
  CHECK(one.s(0) == doctest::Approx(2.0).epsilon(1e-12));
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 2;
  CHECK((one.reconstruct() - expect).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(truncated_svd(d, 3), std::invalid_argument);
  CHECK_THROWS_AS(truncated_svd(d, 0), std::invalid_argument);
}

TEST_CASE("truncated SVD matches a full decomposition") {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index m = 5 + rng.below(30);
    const Eigen::Index n = 5 + rng.below(30);
    const Matrix a = random_matrix(m, n, rng);
    const Eigen::Index r = 1 + rng.below(std::min(m, n));
    SvdOptions opts;
    opts.seed = rep;
    const LowRankFactors f = truncated_svd(a, r, opts);
    const Eigen::JacobiSVD<Matrix> full(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = full.singularValues();
    CHECK((f.s - sv.head(r)).cwiseAbs().maxCoeff() < 1e-8 * sv(0));
    const Matrix best = full.matrixU().leftCols(r) * sv.head(r).asDiagonal() * full.matrixV().leftCols(r).transpose();
    CHECK((f.reconstruct() - best).cwiseAbs().maxCoeff() < 1e-8 * sv(0));
    // Eckart-Young: the Frobenius error is the tail of the spectrum.
    const double tail = sv.tail(sv.size() - r).norm();
    CHECK((a - f.reconstruct()).norm() == doctest::Approx(tail).epsilon(1e-8).scale(sv(0)));
    CHECK((f.u.transpose() * f.u - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("low-rank forward pass") {
  Rng rng(5);
  for (int rep = 0; rep < 8; ++rep) {
    const NodeId n = 6 + rep;
    const Graph g = oracle::random_graph(n, 0.4, rng);
    const FeatureMatrix x = oracle::random_features(n, 5, 0.4, rng);
    const Matrix a = oracle::normalized(g, rep % 2 == 0);
    const Matrix xd = x.to_dense();
    const GcnParams p = random_params(5, 4, 3, rng);
    const Eigen::Index rx = std::min<Eigen::Index>(n, 5);

    const LowRankFactors fa = truncated_svd(a, n);
    const LowRankFactors fx = truncated_svd(xd, rx);
    CHECK((low_rank_gcn_forward(p, fa, fx) - dense_gcn(p, a, xd)).cwiseAbs().maxCoeff() < 1e-9);

    const LowRankFactors ra = truncated_svd(a, 1);
    const LowRankFactors rxf = truncated_svd(xd, 2);
    CHECK((low_rank_gcn_forward(p, ra, rxf) - dense_gcn(p, ra.reconstruct(), rxf.reconstruct())).cwiseAbs().maxCoeff() <
          1e-9);
  }
}

TEST_CASE("defended inputs and factor checkpoints") {
  const Dataset ds = fixture::small_dataset(30, 3, 3, 0.3, 0.05, 2);
  DefenseConfig d;
  d.remove_dissimilar = true;
  d.low_rank = 4;
  const ModelInputs in = prepare_inputs(ds, false, d);
  CHECK(in.graph == remove_dissimilar_edges(ds.graph, ds.features));
  REQUIRE(in.adjacency_factors);
  REQUIRE(in.feature_factors);
  CHECK(in.adjacency_factors->rank() == 4);
  CHECK(in.feature_factors->rank() == 4);
  const Matrix a = oracle::normalized(in.graph, false);
  const Eigen::JacobiSVD<Matrix> full(a);
  CHECK(in.adjacency_factors->s(0) == doctest::Approx(full.singularValues()(0)).epsilon(1e-8));

  const LowRankFactors back = factors_from_json(factors_to_json(*in.adjacency_factors));
  CHECK(back.u == in.adjacency_factors->u);
  CHECK(back.s == in.adjacency_factors->s);
  CHECK(back.v == in.adjacency_factors->v);
  CHECK_THROWS_AS(factors_from_json(nlohmann::json{{"format", "other"}}), std::invalid_argument);

  const DefenseConfig rt = defense_config_from_json(defense_config_to_json(d));
  CHECK(rt.remove_dissimilar);
  CHECK(rt.low_rank == 4);
  CHECK_THROWS_AS(defense_config_from_json(nlohmann::json{{"low_rank", -1}}), std::invalid_argument);

  const Split split = random_split(ds, 0.3, 0.2, 3);
  TrainConfig tc;
  tc.max_epochs = 30;
  tc.seed = 4;
  const TrainedModel m = train_victim(ds, split, tc, d);
  CHECK(m.logits.rows() == 30);
  CHECK(m.logits.allFinite());
  CHECK(train_victim(ds, split, tc, d).logits == m.logits);
  CHECK(train_surrogate(ds, split, tc, d).w.allFinite());
}
