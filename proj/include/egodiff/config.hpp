#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "egodiff/ego.hpp"
#include "egodiff/io.hpp"
#include "egodiff/scorer.hpp"
#include "egodiff/train.hpp"

namespace egodiff {

// Flat mirror of the JSON run configuration. Every key lives in the registry
// below, which drives strict parsing, --set overrides, --print-config, and
// the generated help text from a single table.
struct RunConfig {
  double sde_beta_min = 0.1;
  double sde_beta_max = 1.0;
  double sde_t_eps = 1e-5;

  int ego_hops = 1;
  int ego_max_nodes = 32;

  int model_hidden_dim = 0;  // 0 = draw from train.hidden_dim_grid per trial
  int model_heads = 4;
  int model_channels = 4;

  int train_epochs = 50;
  int train_batch_size = 64;
  double train_lr = 0.0;  // 0 = draw from train.lr_grid per trial
  double train_weight_decay = 0.01;
  int train_trials = 3;
  std::uint64_t train_seed = 0;
  std::vector<double> train_lr_grid = {0.1, 0.05, 0.01};
  std::vector<int> train_hidden_dim_grid = {8, 12, 16};
  std::vector<double> train_alpha_grid = {0.8, 0.5, 0.2};

  int scoring_levels = 4;
  int scoring_samples_per_level = 3;
  double scoring_alpha = -1.0;  // -1 = use the trial's drawn alpha
  std::string scoring_penalty = "snr";
  std::string scoring_dissimilarity = "matrix";
  std::string scoring_solver = "em";
  int scoring_steps_per_unit_time = 100;
  double scoring_corrector_target_snr = 0.16;
  int scoring_corrector_steps = 1;
  double scoring_binarize_threshold = 0.5;
  int scoring_profile_nodes = 32;

  std::string paths_bundle;
  std::string paths_checkpoint;
  std::string paths_out_dir = "out";

  int synth_num_nodes = 500;
  int synth_num_features = 8;
  int synth_blocks = 4;
  double synth_p_in = 0.08;
  double synth_p_out = 0.01;
  double synth_contextual_fraction = 0.025;
  double synth_structural_fraction = 0.025;
  int synth_clique_size = 8;
  double synth_feature_shift = 6.0;
  std::string synth_name = "synthetic";

  VpSde to_sde() const;
  EgoConfig to_ego() const;
  TrainConfig to_train() const;
  // alpha resolved from the trial draw unless scoring.alpha overrides it.
  ScoringConfig to_scoring(double drawn_alpha) const;
  SynthConfig to_synth() const;

  void validate() const;
};

struct ConfigField {
  std::string section;
  std::string key;
  std::string doc;
  std::variant<double*, int*, std::uint64_t*, bool*, std::string*, std::vector<double>*,
               std::vector<int>*>
      slot;
};

std::vector<ConfigField> config_fields(RunConfig& cfg);

// Strict parse: unknown sections or keys raise ContractError naming them.
RunConfig parse_run_config_json(const std::string& text, const std::string& source_name);
RunConfig load_run_config(const std::string& path);

// "section.key=value" override; values parse as JSON when possible and fall
// back to a raw string for string-typed keys.
void apply_set_override(RunConfig& cfg, const std::string& assignment);

// Fully resolved configuration (every key present), serialized as JSON.
std::string dump_run_config(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& dir);

// One line per key: section.key (type, default) doc.
std::string config_help();

}  // namespace egodiff
