#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; returns its exit code and stdout.
Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + CLI_BINARY + "\" " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gcnrobust_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json summary(const Run& r) { return nlohmann::json::parse(r.out); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("help text matches the golden files") {
  const bool update = std::getenv("GCNROBUST_UPDATE_GOLDEN") != nullptr;
  for (std::string cmd : {"", "sbm", "select", "train", "attack", "defend", "experiment", "report"}) {
    CAPTURE(cmd);
    const Run r = run(cmd + " --help");
    CHECK(r.code == 0);
    const fs::path golden = fs::path(GOLDEN_DIR) / ((cmd.empty() ? std::string("main") : cmd) + ".txt");
    if (update) std::ofstream(golden, std::ios::binary) << r.out;
    CHECK(r.out == slurp(golden));
  }
  const Run v = run("--version");
  CHECK(v.code == 0);
  CHECK(v.out == "gcnrobust 1.0.0\n");
}

TEST_CASE("usage errors exit 1, runtime errors exit 2") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("sbm").code == 1);
  CHECK(run("sbm --out x --inprob").code == 1);
  CHECK(run("select --data x --out y --method alphabetical").code == 1);
  CHECK(run("attack --data x --split y --out z --surface everywhere").code == 1);

  const fs::path dir = scratch("errors");
  CHECK(run("select --data " + q(dir / "missing") + " --out " + q(dir / "s.json")).code == 2);
  CHECK(run("sbm --block-sizes 10 10 --inprob 0.5 --out " + q(dir / "d")).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("generate, select, train, attack, report") {
  const fs::path dir = scratch("pipeline");
  const Run sbm = run("sbm --seed 3 --out " + q(dir / "data"));
  REQUIRE(sbm.code == 0);
  CHECK(summary(sbm).at("nodes") == 2000);
  CHECK(fs::exists(dir / "data"));

  const Run sel = run("select --data " + q(dir / "data") + " --method greedy-cover --train-frac 0.1 --seed 1 --out " +
                      q(dir / "split.json"));
  REQUIRE(sel.code == 0);
  CHECK(summary(sel).at("train") == 200);

  const Run tr = run("train --data " + q(dir / "data") + " --split " + q(dir / "split.json") +
                     " --epochs 60 --train-seed 2 --out " + q(dir / "model.json"));
  REQUIRE(tr.code == 0);
  const double f1 = summary(tr).at("f1_macro");
  CHECK(f1 > 0.5);
  CHECK(fs::exists(dir / "model.json"));

  const std::string attack = "attack --data " + q(dir / "data") + " --split " + q(dir / "split.json") +
                             " --budget 2 --epochs 30 --high 1 --low 1 --random 0 --jobs 1 --seed 5";
  const Run at = run(attack + " --adapted greedy-cover --out " + q(dir / "traces.jsonl"));
  REQUIRE(at.code == 0);
  CHECK(summary(at).at("targets") == 2);
  std::ifstream traces(dir / "traces.jsonl");
  int lines = 0;
  for (std::string line; std::getline(traces, line);) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("config").at("adapted") == "greedy-cover");
    CHECK(j.at("applied").size() == 2);
    ++lines;
  }
  CHECK(lines == 2);

  // The filter must match how the split was chosen.
  CHECK(run(attack + " --adapted strat-degree --out " + q(dir / "bad.jsonl")).code == 2);

  const Run rp = run("report --traces " + q(dir / "traces.jsonl") + " --quantiles 0.5 --out " + q(dir / "report"));
  REQUIRE(rp.code == 0);
  CHECK(slurp(dir / "report" / "budgets.csv").rfind("method,success_prob,budget_mean,budget_stderr\n", 0) == 0);
  CHECK(fs::exists(dir / "report" / "margin_curves.csv"));

  const Run df = run("defend --data " + q(dir / "data") + " --similarity true --low-rank 5 --out " + q(dir / "def"));
  REQUIRE(df.code == 0);
  CHECK(summary(df).at("edges_after") <= summary(df).at("edges_before"));
  CHECK(fs::exists(dir / "def" / "adjacency_factors.json"));
  CHECK(fs::exists(dir / "def" / "feature_factors.json"));
  fs::remove_all(dir);
}

TEST_CASE("experiment outputs are reproducible") {
  const fs::path dir = scratch("experiment");
  const nlohmann::json cfg{
      {"dataset", {{"sbm", {{"block_sizes", {150, 150}}, {"inprob", 0.02}, {"n_features", 20}, {"seed", 4}}}}},
      {"methods", {"random", "strat-degree", "greedy-cover"}},
      {"train_frac", 0.2},
      {"val_frac", 0.1},
      {"attack", {{"mode", "influencer"}, {"surface", "both"}, {"eval_stride", 1}}},
      {"max_perturbations", 2},
      {"adapted_attack", true},
      {"train", {{"max_epochs", 30}}},
      {"n_trials", 2},
      {"targets", {{"high", 1}, {"low", 1}, {"random", 1}}},
      {"quantiles", {0.5, 0.9}},
      {"seed", 9}};
  std::ofstream(dir / "cfg.json") << cfg.dump(2);
  const Run a = run("experiment --config " + q(dir / "cfg.json") + " --jobs 1 --out " + q(dir / "a"));
  const Run b = run("experiment --config " + q(dir / "cfg.json") + " --jobs 2 --out " + q(dir / "b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"traces.jsonl", "margin_curves.csv", "budgets.csv", "trial_stats.csv"}) {
    CAPTURE(f);
    CHECK(!slurp(dir / "a" / f).empty());
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(run("experiment --config " + q(dir / "missing.json") + " --out " + q(dir / "c")).code == 2);
  fs::remove_all(dir);
}
