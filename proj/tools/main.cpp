#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "egodiff/config.hpp"
#include "egodiff/io.hpp"
#include "egodiff/metrics.hpp"
#include "egodiff/model.hpp"
#include "egodiff/scorer.hpp"
#include "egodiff/solver.hpp"
#include "egodiff/train.hpp"

namespace fs = std::filesystem;
using namespace egodiff;

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> sets;
  bool print_config = false;
};

RunConfig resolve_config(const CliOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) cfg = load_run_config(opt.config_path);
  for (const std::string& s : opt.sets) apply_set_override(cfg, s);
  cfg.validate();
  return cfg;
}

std::string trial_dir(const RunConfig& cfg, int trial) {
  return (fs::path(cfg.paths_out_dir) / ("trial_" + std::to_string(trial))).string();
}

HyperDraw resolved_draw(const RunConfig& cfg, const TrainConfig& tc, int trial) {
  HyperDraw draw = draw_hyperparameters(tc, trial);
  if (cfg.model_hidden_dim > 0) draw.hidden_dim = cfg.model_hidden_dim;
  if (cfg.train_lr > 0.0) draw.lr = cfg.train_lr;
  if (cfg.scoring_alpha >= 0.0) draw.alpha = cfg.scoring_alpha;
  return draw;
}

ScoreNets nets_from_checkpoint(const Checkpoint& ck) {
  ScoreNets nets;
  nets.config = ck.model;
  nets.num_features = ck.num_features;
  nets.theta = ck.theta;
  nets.phi = ck.phi;
  return nets;
}

SparseNetwork load_scaled_bundle(const RunConfig& cfg, const Checkpoint& ck) {
  if (cfg.paths_bundle.empty()) throw ContractError("paths.bundle must be set");
  SparseNetwork net = load_bundle(cfg.paths_bundle);
  FeatureScaler scaler;
  scaler.std_dev = ck.scaler_std;
  scaler.unscaled = ck.scaler_unscaled;
  return net.with_features(scaler.apply(net.features()));
}

// Checkpoints to operate on: the explicit paths.checkpoint if set, otherwise
// every trained trial directory.
std::vector<std::pair<std::string, std::string>> checkpoint_targets(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> targets;  // (checkpoint dir, output dir)
  if (!cfg.paths_checkpoint.empty()) {
    targets.emplace_back(cfg.paths_checkpoint, cfg.paths_out_dir);
    return targets;
  }
  for (int t = 0; t < cfg.train_trials; ++t) {
    const std::string dir = (fs::path(trial_dir(cfg, t)) / "checkpoint").string();
    if (!fs::exists(fs::path(dir) / "manifest.json")) {
      throw DataError("missing checkpoint " + dir + " (run the train command first or set paths.checkpoint)");
    }
    targets.emplace_back(dir, trial_dir(cfg, t));
  }
  return targets;
}

int cmd_synth(const RunConfig& cfg) {
  if (cfg.paths_bundle.empty()) throw ContractError("paths.bundle must be set for synth");
  const SparseNetwork net = generate_synthetic(cfg.to_synth());
  save_bundle(net, cfg.paths_bundle, cfg.synth_name);
  write_resolved_config(cfg, cfg.paths_bundle);
  int anomalies = 0;
  for (int l : *net.labels()) anomalies += l;
  std::cout << "bundle " << cfg.paths_bundle << ": " << net.num_nodes() << " nodes, "
            << net.edges().size() << " edges, " << net.num_features() << " features, "
            << anomalies << " planted anomalies\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.paths_bundle.empty()) throw ContractError("paths.bundle must be set for train");
  const SparseNetwork raw = load_bundle(cfg.paths_bundle);
  auto [net, scaler] = standardize_features(raw);
  const TrainConfig tc = cfg.to_train();
  write_resolved_config(cfg, cfg.paths_out_dir);
  for (int trial = 0; trial < tc.trials; ++trial) {
    const HyperDraw draw = resolved_draw(cfg, tc, trial);
    const TrainResult result = train_model(net, tc, draw, scaler);
    const std::string dir = trial_dir(cfg, trial);
    save_checkpoint(result.checkpoint, (fs::path(dir) / "checkpoint").string());
    write_loss_csv((fs::path(dir) / "loss.csv").string(), result.loss_curve);
    std::cout << "trial " << trial << ": lr " << draw.lr << ", hidden_dim " << draw.hidden_dim
              << ", alpha " << draw.alpha;
    if (!result.loss_curve.empty()) {
      const auto& first = result.loss_curve.front();
      const auto& last = result.loss_curve.back();
      std::cout << ", loss " << (first[0] + first[1]) << " -> " << (last[0] + last[1]);
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_score(const RunConfig& cfg) {
  write_resolved_config(cfg, cfg.paths_out_dir);
  for (const auto& [ck_dir, out_dir] : checkpoint_targets(cfg)) {
    const Checkpoint ck = load_checkpoint(ck_dir);
    const SparseNetwork net = load_scaled_bundle(cfg, ck);
    const ScoreNets nets = nets_from_checkpoint(ck);
    const ScoringConfig sc = cfg.to_scoring(ck.alpha);
    const ScoreReport report = score_all(net, sc, nets, ck.sde, ck.ego, cfg.train_seed);
    write_scores_csv((fs::path(out_dir) / "scores.csv").string(), report, net.labels());
    write_breakdown_csv((fs::path(out_dir) / "breakdown.csv").string(), report);
    std::cout << "scored " << net.num_nodes() << " nodes -> " << out_dir << "/scores.csv";
    if (report.degenerate_count > 0) {
      std::cout << " (" << report.degenerate_count << " degenerate reconstructions)";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  std::vector<std::pair<std::string, ScoresFile>> runs;  // (trial name, scores)
  const fs::path root_scores = fs::path(cfg.paths_out_dir) / "scores.csv";
  if (!cfg.paths_checkpoint.empty() || fs::exists(root_scores)) {
    runs.emplace_back("0", read_scores_csv(root_scores.string()));
  } else {
    for (int t = 0; t < cfg.train_trials; ++t) {
      const fs::path p = fs::path(trial_dir(cfg, t)) / "scores.csv";
      if (!fs::exists(p)) {
        throw DataError("missing " + p.string() + " (run the score command first)");
      }
      runs.emplace_back(std::to_string(t), read_scores_csv(p.string()));
    }
  }

  std::optional<std::vector<int>> bundle_labels;
  if (!cfg.paths_bundle.empty()) {
    const SparseNetwork net = load_bundle(cfg.paths_bundle);
    bundle_labels = net.labels();
  }

  std::vector<MetricRow> rows;
  std::map<std::string, std::vector<double>> by_metric;
  for (const auto& [name, sf] : runs) {
    LabeledScores ls;
    ls.scores = sf.scores;
    if (sf.labels) {
      ls.labels = *sf.labels;
    } else if (bundle_labels) {
      ls.labels.reserve(sf.node_ids.size());
      for (int id : sf.node_ids) {
        if (id < 0 || id >= static_cast<int>(bundle_labels->size())) {
          throw DataError("scores reference node " + std::to_string(id) +
                          " outside the bundle's label range");
        }
        ls.labels.push_back((*bundle_labels)[static_cast<std::size_t>(id)]);
      }
    } else {
      throw DataError("no labels: scores file lacks a label column and paths.bundle is unset");
    }
    const double auc = roc_auc(ls);
    const double ap = average_precision(ls);
    const double rec = recall_at_k(ls);
    rows.push_back({name, "roc_auc", auc});
    rows.push_back({name, "average_precision", ap});
    rows.push_back({name, "recall_at_k", rec});
    by_metric["roc_auc"].push_back(auc);
    by_metric["average_precision"].push_back(ap);
    by_metric["recall_at_k"].push_back(rec);
  }
  for (const std::string metric : {"roc_auc", "average_precision", "recall_at_k"}) {
    const std::vector<double>& vals = by_metric[metric];
    double mean = 0.0;
    double mx = vals.front();
    for (double v : vals) {
      mean += v;
      mx = std::max(mx, v);
    }
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    rows.push_back({"mean", metric, mean});
    rows.push_back({"std", metric, std::sqrt(var)});
    rows.push_back({"max", metric, mx});
    std::cout << metric << ": mean " << mean << " +- " << std::sqrt(var) << " (max " << mx << ")\n";
  }
  write_resolved_config(cfg, cfg.paths_out_dir);
  write_metrics_csv((fs::path(cfg.paths_out_dir) / "metrics.csv").string(), rows);
  return 0;
}

std::vector<int> profile_node_sample(const RunConfig& cfg, const SparseNetwork& net) {
  const int count = std::min(cfg.scoring_profile_nodes, net.num_nodes());
  Rng rng = make_rng(cfg.train_seed, {stream::profile});
  std::vector<int> nodes = rng.sample_without_replacement(net.num_nodes(), count);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

int cmd_solver_compare(const RunConfig& cfg) {
  const auto targets = checkpoint_targets(cfg);
  const auto& [ck_dir, out_dir] = targets.front();
  const Checkpoint ck = load_checkpoint(ck_dir);
  const SparseNetwork net = load_scaled_bundle(cfg, ck);
  const ScoreNets nets = nets_from_checkpoint(ck);
  const ScoringConfig sc = cfg.to_scoring(ck.alpha);
  const std::vector<int> nodes = profile_node_sample(cfg, net);
  const std::vector<SolverKind> kinds = {SolverKind::Em, SolverKind::Reverse,
                                         SolverKind::EmLangevin, SolverKind::ReverseLangevin};
  const std::vector<double> taus = reconstruction_levels(sc.levels, ck.sde.t_max);
  const std::vector<ProfileRow> rows =
      solver_error_profile(net, nodes, kinds, taus, sc, nets, ck.sde, ck.ego, cfg.train_seed);
  write_resolved_config(cfg, cfg.paths_out_dir);
  write_profile_csv((fs::path(cfg.paths_out_dir) / "solver_profile.csv").string(), rows);
  std::cout << "profiled " << kinds.size() << " solvers x " << taus.size() << " levels over "
            << nodes.size() << " nodes -> " << cfg.paths_out_dir << "/solver_profile.csv\n";
  return 0;
}

int cmd_energy_hist(const RunConfig& cfg) {
  const auto targets = checkpoint_targets(cfg);
  const auto& [ck_dir, out_dir] = targets.front();
  const Checkpoint ck = load_checkpoint(ck_dir);
  const SparseNetwork net = load_scaled_bundle(cfg, ck);
  const ScoreNets nets = nets_from_checkpoint(ck);
  const ScoringConfig sc = cfg.to_scoring(ck.alpha);
  const std::vector<int> nodes = profile_node_sample(cfg, net);
  const std::vector<EnergyRow> rows =
      energy_histogram_data(net, nodes, sc, nets, ck.sde, ck.ego, cfg.train_seed);
  write_resolved_config(cfg, cfg.paths_out_dir);
  write_energy_csv((fs::path(cfg.paths_out_dir) / "energy_hist.csv").string(), rows);
  std::cout << rows.size() << " energy records over " << nodes.size() << " nodes -> "
            << cfg.paths_out_dir << "/energy_hist.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ego-graph diffusion anomaly detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.footer(config_help() +
             "\nExit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.");

  CliOptions opt;
  app.add_option("-c,--config", opt.config_path, "JSON config file");
  app.add_option("--set", opt.sets, "override a key: section.key=value")->take_all();
  app.add_flag("--print-config", opt.print_config,
               "print the fully resolved config and exit");

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic anomaly bundle");
  CLI::App* train = app.add_subcommand("train", "train score networks, one checkpoint per trial");
  CLI::App* score = app.add_subcommand("score", "rank nodes by anomaly score");
  CLI::App* eval = app.add_subcommand("eval", "compute ROC-AUC / AP / Recall@k from score CSVs");
  CLI::App* solver_compare =
      app.add_subcommand("solver-compare", "reconstruction error per solver and noise level");
  CLI::App* energy_hist =
      app.add_subcommand("energy-hist", "original vs reconstructed energy records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const RunConfig cfg = resolve_config(opt);
    if (opt.print_config) {
      std::cout << dump_run_config(cfg);
      return 0;
    }
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (score->parsed()) return cmd_score(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (solver_compare->parsed()) return cmd_solver_compare(cfg);
    if (energy_hist->parsed()) return cmd_energy_hist(cfg);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NormalizationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
