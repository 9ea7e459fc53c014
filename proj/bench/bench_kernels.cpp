// Serial reference kernels against their OpenMP versions on the default SBM.

#include <benchmark/benchmark.h>

#include <numeric>

#include "gcnrobust/attack.hpp"

using namespace gcnrobust;

namespace {

const Dataset& sbm() {
  static const Dataset ds = [] {
    SbmConfig cfg;
    cfg.seed = 1;
    return generate_sbm(cfg);
  }();
  return ds;
}

Matrix dense(Eigen::Index rows, Eigen::Index cols) {
  Rng rng(7);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  return m;
}

void BM_Spmm(benchmark::State& state, Exec exec) {
  const auto a = normalized_adjacency(sbm().graph);
  const Matrix h = dense(a.n, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::spmm(a, h, exec));
}

void BM_FeatureProduct(benchmark::State& state, Exec exec) {
  const auto& x = sbm().features;
  const Matrix w = dense(x.cols(), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::feature_product(x, {}, w, exec));
}

void BM_FeatureTransposeProduct(benchmark::State& state, Exec exec) {
  const auto& x = sbm().features;
  const Matrix g = dense(x.rows(), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::feature_transpose_product(x, {}, g, exec));
}

// One greedy step's worth of candidate scoring for a direct structure attack.
void BM_ScoreCandidates(benchmark::State& state, Exec exec) {
  const Dataset& ds = sbm();
  SurrogateParams s{dense(ds.n_features(), ds.n_classes)};
  const NodeId target = 17;
  const std::vector<NodeId> attackers{target};
  const auto cands =
      candidate_perturbations(ds.graph, ds.features, attackers, AttackSurface::Both, target, AttackMode::Direct);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_candidates(s, ds.graph, ds.features, cands, target, ds.labels[target], false, exec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cands.size()));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Spmm, serial, Exec::Serial)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_Spmm, omp, Exec::Parallel)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_FeatureProduct, serial, Exec::Serial)->Arg(16);
BENCHMARK_CAPTURE(BM_FeatureProduct, omp, Exec::Parallel)->Arg(16);
BENCHMARK_CAPTURE(BM_FeatureTransposeProduct, serial, Exec::Serial)->Arg(16);
BENCHMARK_CAPTURE(BM_FeatureTransposeProduct, omp, Exec::Parallel)->Arg(16);
BENCHMARK_CAPTURE(BM_ScoreCandidates, serial, Exec::Serial);
BENCHMARK_CAPTURE(BM_ScoreCandidates, omp, Exec::Parallel);

BENCHMARK_MAIN();
