#include "gcnrobust/cli.hpp"

#include <omp.h>

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gcnrobust/harness.hpp"

namespace gcnrobust {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--lr", t.learning_rate, "Adam learning rate");
  cmd->add_option("--weight-decay", t.weight_decay, "L2 penalty on first-layer weights");
  cmd->add_option("--epochs", t.max_epochs, "Maximum training epochs");
  cmd->add_option("--patience", t.patience, "Early-stopping patience on validation loss");
  cmd->add_option("--dropout", t.dropout, "Dropout rate on input features and hidden layer");
  cmd->add_option("--hidden", t.hidden, "Hidden units");
  cmd->add_option("--bias", t.use_bias, "Use layer biases (true/false)");
  cmd->add_option("--self-loops", t.self_loops, "Add self-loops before normalizing (true/false)");
  cmd->add_option("--train-seed", t.seed, "Seed for initialization and dropout");
}

void add_defense_flags(CLI::App* cmd, DefenseConfig& d) {
  cmd->add_option("--similarity", d.remove_dissimilar, "Remove edges between nodes sharing no feature (true/false)");
  cmd->add_option("--low-rank", d.low_rank, "Rank of the SVD approximation of adjacency and features (0 = off)");
  cmd->add_option("--svd-seed", d.svd_seed, "Seed for the randomized SVD");
}

Split read_split(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open file");
  try {
    return split_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path, 0, e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path, 0, "cannot open file for writing");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path, 0, e.what());
  }
}

void emit(const json& summary) { std::cout << summary.dump() << std::endl; }

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Training-set selection and poisoning robustness of graph convolutional networks", "gcnrobust"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "gcnrobust 1.0.0");

  int jobs = 0;

  // sbm
  SbmConfig sbm;
  fs::path sbm_out;
  auto* sbm_cmd = app.add_subcommand("sbm", "Generate a stochastic block model dataset directory");
  sbm_cmd->add_option("--block-sizes", sbm.block_sizes, "Nodes per class");
  sbm_cmd->add_option("--inprob", sbm.inprob, "Within-class excess probability x");
  sbm_cmd->add_option("--n-features", sbm.n_features, "Number of binary features");
  sbm_cmd->add_option("--class-features", sbm.per_class_feature_count, "Features associated with each class");
  sbm_cmd->add_option("--p-on", sbm.p_feature_on_class, "Probability of a class-associated feature");
  sbm_cmd->add_option("--p-off", sbm.p_feature_off_class, "Probability of any other feature");
  sbm_cmd->add_option("--seed", sbm.seed, "Generator seed");
  sbm_cmd->add_option("--out", sbm_out, "Output dataset directory")->required();

  // select
  fs::path sel_data, sel_out;
  std::string sel_method = "random";
  double sel_train = 0.1, sel_val = 0.1;
  std::uint64_t sel_seed = 0;
  auto* sel_cmd = app.add_subcommand("select", "Choose training, validation and test nodes");
  sel_cmd->add_option("--data", sel_data, "Dataset directory")->required();
  sel_cmd->add_option("--method", sel_method, "random, strat-degree or greedy-cover")
      ->check(CLI::IsMember({"random", "strat-degree", "greedy-cover"}));
  sel_cmd->add_option("--train-frac", sel_train, "Training fraction");
  sel_cmd->add_option("--val-frac", sel_val, "Validation fraction");
  sel_cmd->add_option("--seed", sel_seed, "Split seed");
  sel_cmd->add_option("--out", sel_out, "Output split JSON")->required();

  // train
  fs::path tr_data, tr_split, tr_out;
  TrainConfig tr_cfg;
  DefenseConfig tr_def;
  auto* tr_cmd = app.add_subcommand("train", "Train a GCN and report test metrics");
  tr_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  tr_cmd->add_option("--split", tr_split, "Split JSON")->required();
  tr_cmd->add_option("--out", tr_out, "Output model JSON")->required();
  add_train_flags(tr_cmd, tr_cfg);
  add_defense_flags(tr_cmd, tr_def);

  // attack
  fs::path at_data, at_split, at_out;
  TrainConfig at_train;
  DefenseConfig at_def;
  AttackConfig at_cfg;
  std::string at_mode = "influencer", at_surface = "structure", at_adapted = "none";
  std::vector<NodeId> at_targets;
  TargetGroups at_groups;
  std::uint64_t at_seed = 0;
  auto* at_cmd = app.add_subcommand("attack", "Run greedy poisoning attacks and write traces");
  at_cmd->add_option("--data", at_data, "Dataset directory")->required();
  at_cmd->add_option("--split", at_split, "Split JSON")->required();
  at_cmd->add_option("--out", at_out, "Output traces (JSON lines)")->required();
  at_cmd->add_option("--mode", at_mode, "direct or influencer")->check(CLI::IsMember({"direct", "influencer"}));
  at_cmd->add_option("--surface", at_surface, "structure, features or both")
      ->check(CLI::IsMember({"structure", "features", "both"}));
  at_cmd->add_option("--budget", at_cfg.budget, "Perturbations per target");
  at_cmd->add_option("--adapted", at_adapted, "Training-set filter: none, strat-degree or greedy-cover")
      ->check(CLI::IsMember({"none", "strat-degree", "greedy-cover"}));
  at_cmd->add_option("--unnoticeable", at_cfg.unnoticeable, "Apply the degree-distribution test (true/false)");
  at_cmd->add_option("--d-min", at_cfg.unnoticeable_cfg.d_min, "Minimum degree of the power-law fit");
  at_cmd->add_option("--ll-cutoff", at_cfg.unnoticeable_cfg.cutoff, "Likelihood-ratio cutoff");
  at_cmd->add_option("--eval-stride", at_cfg.eval_stride, "Retrain the victim every this many perturbations");
  at_cmd->add_option("--targets", at_targets, "Explicit target nodes (overrides the group counts)");
  at_cmd->add_option("--high", at_groups.high, "Targets with the largest clean margins");
  at_cmd->add_option("--low", at_groups.low, "Targets with the smallest clean margins");
  at_cmd->add_option("--random", at_groups.random, "Targets drawn uniformly from the remaining nodes");
  at_cmd->add_option("--seed", at_seed, "Attack seed");
  at_cmd->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  add_train_flags(at_cmd, at_train);
  add_defense_flags(at_cmd, at_def);

  // defend
  fs::path df_data, df_out;
  DefenseConfig df_cfg;
  bool df_self_loops = false;
  auto* df_cmd = app.add_subcommand("defend", "Write a defended dataset and low-rank factors");
  df_cmd->add_option("--data", df_data, "Dataset directory")->required();
  df_cmd->add_option("--out", df_out, "Output directory")->required();
  df_cmd->add_option("--self-loops", df_self_loops, "Add self-loops before normalizing (true/false)");
  add_defense_flags(df_cmd, df_cfg);

  // experiment
  fs::path ex_config, ex_out;
  auto* ex_cmd = app.add_subcommand("experiment", "Run a full experiment from a JSON config");
  ex_cmd->add_option("--config", ex_config, "Experiment config JSON")->required();
  ex_cmd->add_option("--out", ex_out, "Output directory")->required();
  ex_cmd->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

  // report
  fs::path rp_traces, rp_out;
  std::vector<double> rp_quantiles = ExperimentConfig{}.quantiles;
  double rp_threshold = 0.0;
  auto* rp_cmd = app.add_subcommand("report", "Aggregate traces into margin and budget tables");
  rp_cmd->add_option("--traces", rp_traces, "Traces (JSON lines)")->required();
  rp_cmd->add_option("--out", rp_out, "Output directory")->required();
  rp_cmd->add_option("--quantiles", rp_quantiles, "Success probabilities to report");
  rp_cmd->add_option("--threshold", rp_threshold, "Margin at or below which an attack succeeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (jobs < 0) throw std::invalid_argument("--jobs must be >= 0");
    omp_set_num_threads(jobs == 0 ? omp_get_num_procs() : jobs);

    if (*sbm_cmd) {
      const Dataset ds = generate_sbm(sbm);
      save_dataset(ds, sbm_out);
      emit({{"command", "sbm"}, {"out", sbm_out.string()}, {"nodes", ds.n_nodes()},
            {"edges", ds.graph.n_edges()}, {"features", ds.n_features()}, {"classes", ds.n_classes}});
    } else if (*sel_cmd) {
      const Dataset ds = load_dataset(sel_data);
      const Split split = make_split(parse_selection_method(sel_method), ds, sel_train, sel_val, sel_seed);
      write_json(split_to_json(split), sel_out);
      emit({{"command", "select"}, {"out", sel_out.string()}, {"method", sel_method}, {"train", split.train.size()},
            {"val", split.val.size()}, {"test", split.test.size()},
            {"avg_training_neighbors", avg_training_neighbors(ds.graph, split.train)}});
    } else if (*tr_cmd) {
      const Dataset ds = load_dataset(tr_data);
      const Split split = read_split(tr_split);
      split.validate(ds.n_nodes());
      const TrainedModel model = train_victim(ds, split, tr_cfg, tr_def);
      write_json({{"model", gcn_to_json(model.params)},
                  {"train", train_config_to_json(tr_cfg)},
                  {"defense", defense_config_to_json(tr_def)}},
                 tr_out);
      const auto pred = argmax_rows(model.logits);
      emit({{"command", "train"}, {"out", tr_out.string()},
            {"f1_macro", f1_macro(pred, ds.labels, split.test, ds.n_classes)},
            {"accuracy", accuracy(pred, ds.labels, split.test)}});
    } else if (*at_cmd) {
      const Dataset ds = load_dataset(at_data);
      const Split split = read_split(at_split);
      split.validate(ds.n_nodes());
      at_cfg.mode = parse_attack_mode(at_mode);
      at_cfg.surface = parse_attack_surface(at_surface);
      at_cfg.adapted = parse_adapted_filter(at_adapted);
      at_cfg.seed = at_seed;
      at_cfg.validate();
      const AttackEnvironment env = make_attack_environment(ds, split, at_train, at_def, derive_seed(at_seed, 2));
      std::vector<NodeId> targets = at_targets;
      bool shrunk = false;
      if (targets.empty()) {
        std::vector<double> margins(static_cast<std::size_t>(ds.n_nodes()));
        std::vector<char> correct(static_cast<std::size_t>(ds.n_nodes()), 0);
        for (NodeId u = 0; u < ds.n_nodes(); ++u) {
          margins[u] = margin_from_logits(env.clean_logits.row(u), ds.labels[u]);
          correct[u] = margins[u] > 0.0 && (at_cfg.mode == AttackMode::Direct || ds.graph.degree(u) > 0);
        }
        const auto sel = select_targets(split.test, margins, correct, at_groups, derive_seed(at_seed, 3));
        shrunk = sel.shrunk;
        targets = sel.all();
      }
      std::vector<AttackTrace> traces(targets.size());
      std::vector<std::string> errors(targets.size());
      const auto n = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
          traces[i] = attack_target(env, targets[i], at_cfg);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
      std::vector<TraceRecord> records;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!errors[i].empty()) throw std::runtime_error("target " + std::to_string(targets[i]) + ": " + errors[i]);
        records.push_back({0, std::string(to_string(split.method)), at_cfg, std::move(traces[i])});
      }
      write_traces(records, at_out);
      emit({{"command", "attack"}, {"out", at_out.string()}, {"targets", targets.size()}, {"shrunk", shrunk}});
    } else if (*df_cmd) {
      const Dataset ds = load_dataset(df_data);
      const ModelInputs inputs = prepare_inputs(ds, df_self_loops, df_cfg);
      Dataset defended = ds;
      defended.graph = inputs.graph;
      save_dataset(defended, df_out);
      if (inputs.adjacency_factors) write_json(factors_to_json(*inputs.adjacency_factors), df_out / "adjacency_factors.json");
      if (inputs.feature_factors) write_json(factors_to_json(*inputs.feature_factors), df_out / "feature_factors.json");
      write_json({{"defense", defense_config_to_json(df_cfg)}, {"self_loops", df_self_loops}}, df_out / "defense.json");
      emit({{"command", "defend"}, {"out", df_out.string()}, {"edges_before", ds.graph.n_edges()},
            {"edges_after", inputs.graph.n_edges()}, {"low_rank", df_cfg.low_rank}});
    } else if (*ex_cmd) {
      const ExperimentConfig cfg = experiment_config_from_json(read_json(ex_config));
      const ExperimentResult result = run_experiment(cfg);
      write_experiment(cfg, result, ex_out);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      emit({{"command", "experiment"}, {"out", ex_out.string()}, {"traces", result.traces.size()},
            {"warnings", result.warnings.size()}, {"seconds", result.seconds}});
    } else if (*rp_cmd) {
      const auto records = read_traces(rp_traces);
      const Report rep = build_report(records, rp_quantiles, rp_threshold);
      fs::create_directories(rp_out);
      write_margin_rows(rep.margins, rp_out / "margin_curves.csv");
      write_budget_rows(rep.budgets, rp_out / "budgets.csv");
      emit({{"command", "report"}, {"out", rp_out.string()}, {"traces", records.size()},
            {"margin_rows", rep.margins.size()}, {"budget_rows", rep.budgets.size()}});
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace gcnrobust
