#include <doctest.h>

#include <numeric>

#include "fixtures.hpp"
#include "gcnrobust/attack.hpp"
#include "gcnrobust/selection.hpp"
#include "oracles.hpp"

using namespace gcnrobust;

namespace {

Graph path3() {
  const std::vector<Edge> e{{0, 1}, {1, 2}};
  return Graph::from_edges(4, e);
}

bool contains(const std::vector<Perturbation>& v, const Perturbation& p) {
  return std::find(v.begin(), v.end(), p) != v.end();
}

// A correctly classified target with at least one neighbor, or -1.
NodeId pick_target(const AttackEnvironment& env, std::span<const NodeId> pool) {
  for (NodeId u : pool) {
    if (env.clean->graph.degree(u) == 0) continue;
    if (margin_from_logits(env.clean_logits.row(u), env.clean->labels[u]) > 0) return u;
  }
  return -1;
}

}  // namespace

TEST_CASE("attackers") {
  const Graph g = path3();
  CHECK(select_attackers(g, 1, AttackMode::Direct) == std::vector<NodeId>{1});
  CHECK(select_attackers(g, 1, AttackMode::Influencer) == std::vector<NodeId>{0, 2});
  CHECK_THROWS_AS(select_attackers(g, 3, AttackMode::Influencer), std::invalid_argument);
  CHECK_THROWS_AS(select_attackers(g, 4, AttackMode::Direct), std::out_of_range);
}

TEST_CASE("candidate sets") {
  const Graph g = path3();
  const std::vector<FeatureEntry> ones{{1, 0}, {1, 2}, {0, 1}};
  const FeatureMatrix x(4, 3, ones);
  const std::vector<NodeId> direct{1};
  const auto s = candidate_perturbations(g, x, direct, AttackSurface::Structure, 1, AttackMode::Direct);
  CHECK(s.size() == 3);
  for (const auto& p : s) CHECK(p.is_edge());
  const auto f = candidate_perturbations(g, x, direct, AttackSurface::Features, 1, AttackMode::Direct);
  CHECK(f == std::vector<Perturbation>{Perturbation::feature(1, 0), Perturbation::feature(1, 2)});
  const auto b = candidate_perturbations(g, x, direct, AttackSurface::Both, 1, AttackMode::Direct);
  CHECK(b.size() == s.size() + f.size());
  CHECK(std::is_sorted(b.begin(), b.end()));

  // Influencers 0 and 2 of target 1: flips touching the target are excluded
  // and the shared flip (0, 2) appears once.
  const std::vector<NodeId> infl{0, 2};
  const auto i = candidate_perturbations(g, x, infl, AttackSurface::Structure, 1, AttackMode::Influencer);
  CHECK(i == std::vector<Perturbation>{Perturbation::edge(0, 2), Perturbation::edge(0, 3), Perturbation::edge(2, 3)});
}

TEST_CASE("singleton filter") {
  const Graph g = path3();
  const std::vector<Perturbation> c{Perturbation::edge(0, 1), Perturbation::edge(1, 2), Perturbation::edge(0, 2),
                                    Perturbation::feature(0, 0)};
  const auto kept = filter_singletons(c, g);
  CHECK(kept == std::vector<Perturbation>{Perturbation::edge(0, 2), Perturbation::feature(0, 0)});

  const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
  const Graph t = Graph::from_edges(3, tri);
  const std::vector<Perturbation> d{Perturbation::edge(0, 1)};
  CHECK(filter_singletons(d, t).size() == 1);
}

TEST_CASE("degree statistic") {
  const std::vector<Edge> e{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {3, 4}, {4, 5}};
  const Graph g = Graph::from_edges(6, e);
  const auto d = degree_vector(g);
  CHECK(powerlaw_likelihood_ratio(d, d, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  const auto od = oracle::degrees_of(g);
  const Graph h = flip_edge(g, 2, 5);
  CHECK(powerlaw_likelihood_ratio(d, degree_vector(h), 2.0) ==
        doctest::Approx(oracle::likelihood_ratio(od, oracle::degrees_of(h), 2.0)).epsilon(1e-10));
  // Degrees below d_min do not enter the fit.
  CHECK(powerlaw_likelihood_ratio(DegreeVector{1, 1, 3}, DegreeVector{0, 1, 3}, 2.0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("unnoticeability filter agrees with the brute-force statistic") {
  Rng rng(3);
  for (int rep = 0; rep < 15; ++rep) {
    const Graph original = oracle::random_graph(25, 0.15, rng);
    Graph current = original;
    for (int k = 0; k < 3; ++k) current = flip_edge(current, rng.below(12), 12 + rng.below(13));
    const FeatureMatrix x = oracle::random_features(25, 4, 0.3, rng);
    std::vector<NodeId> attackers{static_cast<NodeId>(rng.below(25))};
    auto cands = candidate_perturbations(current, x, attackers, AttackSurface::Both, attackers[0], AttackMode::Direct);
    const UnnoticeableConfig cfg;
    const auto kept = unnoticeable_structure(cands, current, original, cfg);
    const auto od = oracle::degrees_of(original);
    for (const auto& p : cands) {
      bool expect = true;
      if (p.is_edge()) {
        const Graph next = flip_edge(current, p.a, p.b);
        expect = oracle::likelihood_ratio(od, oracle::degrees_of(next), cfg.d_min) < cfg.cutoff;
      }
      CHECK(contains(kept, p) == expect);
    }
  }
}

TEST_CASE("training-set filters agree with the reference predicates") {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset ds = fixture::small_dataset(30, 3, 2, 0.3, 0.05, 100 + rep);
    std::vector<NodeId> all(30);
    std::iota(all.begin(), all.end(), 0);
    std::vector<Perturbation> cands;
    for (NodeId u = 0; u < 30; ++u) {
      for (NodeId v = u + 1; v < 30; ++v) cands.push_back(Perturbation::edge(u, v));
    }
    cands.push_back(Perturbation::feature(0, 0));

    const Split sd = strat_degree(ds, 0.2, 0.1, rep);
    const auto kept_sd = filter_training(cands, ds.graph, ds.labels, ds.n_classes, sd, AdaptedFilter::StratDegree);
    const Split gc = greedy_cover(ds, 0.2, 0.1, rep);
    const auto kept_gc = filter_training(cands, ds.graph, ds.labels, ds.n_classes, gc, AdaptedFilter::GreedyCover);
    const auto mask = node_mask(30, gc.train);
    std::size_t blocked = 0;
    for (const auto& p : cands) {
      if (!p.is_edge()) {
        CHECK(contains(kept_sd, p));
        CHECK(contains(kept_gc, p));
        continue;
      }
      CHECK(contains(kept_sd, p) == oracle::strat_degree_keeps(ds.graph, ds.labels, ds.n_classes, 0.2, p.a, p.b));
      CHECK(contains(kept_gc, p) == oracle::greedy_cover_keeps(ds.graph, mask, p.a, p.b));
      blocked += (contains(kept_sd, p) ? 0 : 1) + (contains(kept_gc, p) ? 0 : 1);
    }
    CHECK(blocked > 0);
    CHECK(filter_training(cands, ds.graph, ds.labels, ds.n_classes, sd, AdaptedFilter::None).size() == cands.size());
    CHECK_THROWS_AS(filter_training(cands, ds.graph, ds.labels, ds.n_classes, sd, AdaptedFilter::GreedyCover),
                    std::invalid_argument);
  }
}

TEST_CASE("candidate scores match the dense surrogate") {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const NodeId n = 6 + rep % 5;
    const Graph g = oracle::random_graph(n, 0.35, rng);
    const FeatureMatrix x = oracle::random_features(n, 4, 0.4, rng);
    SurrogateParams s;
    s.w = Matrix(4, 3);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) s.w(i, j) = rng.uniform(-1, 1);
    }
    const NodeId t = static_cast<NodeId>(rng.below(n));
    const ClassId c = static_cast<ClassId>(rng.below(3));
    const bool loops = rep % 2 == 1;
    std::vector<NodeId> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto cands = candidate_perturbations(g, x, all, AttackSurface::Both, t, AttackMode::Direct);
    const auto serial = score_candidates(s, g, x, cands, t, c, loops, Exec::Serial);
    const auto parallel = score_candidates(s, g, x, cands, t, c, loops, Exec::Parallel);
    CHECK(serial == parallel);
    const oracle::Dense xd = x.to_dense();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto& p = cands[i];
      double expect;
      if (p.is_edge()) {
        expect = oracle::surrogate_margin(flip_edge(g, p.a, p.b), xd, s.w, t, c, loops);
      } else {
        oracle::Dense xf = xd;
        xf(p.a, p.b) = 0;
        expect = oracle::surrogate_margin(g, xf, s.w, t, c, loops);
      }
      CHECK(serial[i] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
      CHECK(score_perturbation(s, g, x, p, t, c, loops) == serial[i]);
    }
  }
}

TEST_CASE("perturbations outside the two-hop neighborhood leave the score unchanged") {
  // 0-1-2-3-4-5 path plus 6-7: flips among {4, 5, 6, 7} are beyond two hops of 0.
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {6, 7}};
  const Graph g = Graph::from_edges(8, e);
  const std::vector<FeatureEntry> ones{{0, 0}, {1, 1}, {2, 0}, {4, 1}, {5, 0}, {6, 1}, {7, 0}};
  const FeatureMatrix x(8, 2, ones);
  SurrogateParams s;
  s.w = Matrix{{1.0, -0.5}, {0.25, 2.0}};
  const double base = oracle::surrogate_margin(g, x.to_dense(), s.w, 0, 0);
  CHECK(score_perturbation(s, g, x, Perturbation::edge(5, 6), 0, 0) == doctest::Approx(base).epsilon(1e-15));
  CHECK(score_perturbation(s, g, x, Perturbation::edge(4, 7), 0, 0) == doctest::Approx(base).epsilon(1e-15));
  CHECK(score_perturbation(s, g, x, Perturbation::feature(5, 0), 0, 0) == doctest::Approx(base).epsilon(1e-15));

  // A feature whose weight row is zero cannot move the score.
  SurrogateParams z = s;
  z.w.row(1).setZero();
  const double zbase = oracle::surrogate_margin(g, x.to_dense(), z.w, 0, 0);
  CHECK(score_perturbation(z, g, x, Perturbation::feature(1, 1), 0, 0) == doctest::Approx(zbase).epsilon(1e-15));
}

TEST_CASE("best candidate takes the first strict minimum") {
  const std::vector<double> s{3.0, 1.0, 2.0, 1.0};
  CHECK(best_candidate(s) == 1);
  CHECK_THROWS_AS(best_candidate(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("one-step attack picks the exhaustive minimizer") {
  TrainConfig tc;
  tc.max_epochs = 80;
  int checked = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const Dataset ds = fixture::small_dataset(20, 2, 2, 0.35, 0.08, 500 + rep);
    const Split split = rep % 2 == 0 ? strat_degree(ds, 0.3, 0.2, rep) : greedy_cover(ds, 0.3, 0.2, rep);
    const auto env = make_attack_environment(ds, split, tc, {}, 77 + rep);
    const NodeId t = pick_target(env, split.test);
    if (t < 0) continue;
    AttackConfig cfg;
    cfg.budget = 1;
    cfg.mode = rep % 3 == 0 ? AttackMode::Direct : AttackMode::Influencer;
    cfg.surface = AttackSurface::Both;
    cfg.adapted = rep % 2 == 0 ? AdaptedFilter::StratDegree : AdaptedFilter::GreedyCover;
    const AttackTrace trace = attack_target(env, t, cfg);
    const auto scored = oracle::exhaustive_scores(ds, ds.graph, split, env.surrogate.w, t, cfg);
    REQUIRE(!scored.empty());
    const std::size_t best = oracle::exhaustive_argmin(scored, 1e-12);
    REQUIRE(trace.applied.size() == 1);
    CHECK(trace.applied[0] == scored[best].pert);
    CHECK(trace.surrogate_margins[1] == doctest::Approx(scored[best].score).epsilon(1e-10));
    REQUIRE(trace.margins.size() == 2);
    CHECK(trace.margins[1].has_value());
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("attack runs until the candidates run out") {
  const Dataset ds = fixture::small_dataset(24, 2, 3, 0.35, 0.05, 41);
  const Split split = random_split(ds, 0.3, 0.2, 4);
  TrainConfig tc;
  tc.max_epochs = 60;
  const auto env = make_attack_environment(ds, split, tc, {}, 9);
  const NodeId t = pick_target(env, split.test);
  REQUIRE(t >= 0);
  AttackConfig cfg;
  cfg.mode = AttackMode::Direct;
  cfg.surface = AttackSurface::Features;
  const int n_feat = static_cast<int>(ds.features.row(t).size());
  cfg.budget = n_feat + 3;
  cfg.eval_stride = 100;
  const AttackTrace trace = attack_target(env, t, cfg);
  CHECK(trace.exhausted);
  CHECK(static_cast<int>(trace.applied.size()) == n_feat);
  REQUIRE(trace.margins.size() == trace.applied.size() + 1);
  CHECK(trace.margins.front().has_value());
  CHECK(trace.margins.back().has_value());

  // Replaying the applied perturbations reproduces the surrogate margins.
  Dataset replay = ds;
  for (std::size_t i = 0; i < trace.applied.size(); ++i) {
    replay = apply_perturbation(replay, trace.applied[i]);
    CHECK(trace.surrogate_margins[i + 1] ==
          doctest::Approx(oracle::surrogate_margin(replay.graph, replay.features.to_dense(), env.surrogate.w, t,
                                                   trace.true_class))
              .epsilon(1e-10));
  }
  CHECK(replay.features.row(t).empty());

  const AttackTrace back = trace_from_json(trace_to_json(trace, cfg));
  CHECK(back.applied == trace.applied);
  CHECK(back.margins == trace.margins);
  CHECK(back.surrogate_margins == trace.surrogate_margins);
  CHECK(back.exhausted);
  CHECK(attack_config_to_json(attack_config_from_json(attack_config_to_json(cfg))) == attack_config_to_json(cfg));
}

TEST_CASE("attack rejects misclassified targets and bad configs") {
  const Dataset ds = fixture::small_dataset(20, 2, 2, 0.35, 0.05, 3);
  const Split split = random_split(ds, 0.3, 0.2, 1);
  TrainConfig tc;
  tc.max_epochs = 40;
  auto env = make_attack_environment(ds, split, tc, {}, 1);
  env.clean_logits.setZero();
  AttackConfig cfg;
  CHECK_THROWS_AS(attack_target(env, split.test[0], cfg), std::invalid_argument);
  cfg.budget = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_mode("sideways"), std::invalid_argument);
  CHECK(parse_adapted_filter("greedy-cover") == AdaptedFilter::GreedyCover);
}
