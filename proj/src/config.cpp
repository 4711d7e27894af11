#include "egodiff/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace egodiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

VpSde RunConfig::to_sde() const {
  VpSde sde;
  sde.beta_min = sde_beta_min;
  sde.beta_max = sde_beta_max;
  sde.t_max = 1.0;
  sde.t_eps = sde_t_eps;
  sde.validate();
  return sde;
}

EgoConfig RunConfig::to_ego() const {
  EgoConfig ego;
  ego.hops = ego_hops;
  ego.max_nodes = ego_max_nodes;
  ego.validate();
  return ego;
}

TrainConfig RunConfig::to_train() const {
  TrainConfig tc;
  tc.epochs = train_epochs;
  tc.batch_size = train_batch_size;
  tc.lr = train_lr;
  tc.weight_decay = train_weight_decay;
  tc.trials = train_trials;
  tc.seed = train_seed;
  tc.lr_grid = train_lr_grid;
  tc.hidden_dim_grid = train_hidden_dim_grid;
  tc.alpha_grid = train_alpha_grid;
  tc.ego = to_ego();
  tc.sde = to_sde();
  tc.validate();
  return tc;
}

ScoringConfig RunConfig::to_scoring(double drawn_alpha) const {
  ScoringConfig sc;
  sc.levels = scoring_levels;
  sc.samples_per_level = scoring_samples_per_level;
  sc.alpha = scoring_alpha >= 0.0 ? scoring_alpha : drawn_alpha;
  sc.penalty = parse_penalty(scoring_penalty);
  sc.dissimilarity = parse_dissimilarity(scoring_dissimilarity);
  sc.solver.kind = parse_solver_kind(scoring_solver);
  sc.solver.steps_per_unit_time = scoring_steps_per_unit_time;
  sc.solver.corrector_target_snr = scoring_corrector_target_snr;
  sc.solver.corrector_steps = scoring_corrector_steps;
  sc.binarize_threshold = scoring_binarize_threshold;
  sc.validate();
  return sc;
}

SynthConfig RunConfig::to_synth() const {
  SynthConfig sc;
  sc.num_nodes = synth_num_nodes;
  sc.num_features = synth_num_features;
  sc.blocks = synth_blocks;
  sc.p_in = synth_p_in;
  sc.p_out = synth_p_out;
  sc.contextual_fraction = synth_contextual_fraction;
  sc.structural_fraction = synth_structural_fraction;
  sc.clique_size = synth_clique_size;
  sc.feature_shift = synth_feature_shift;
  sc.seed = train_seed;
  sc.name = synth_name;
  sc.validate();
  return sc;
}

void RunConfig::validate() const {
  to_sde();
  to_ego();
  to_train();
  to_scoring(0.5);
  to_synth();
  if (model_hidden_dim < 0) throw ContractError("config: model.hidden_dim must be >= 0");
  if (model_heads != 4) {
    // The attention layer is specified with exactly four heads; the key exists
    // so the value is explicit in every resolved config.
    throw ContractError("config: model.heads must be 4");
  }
  if (model_channels != 4) throw ContractError("config: model.channels must be 4");
  if (scoring_alpha > 1.0) throw ContractError("config: scoring.alpha must be <= 1");
  if (scoring_profile_nodes < 1) throw ContractError("config: scoring.profile_nodes must be >= 1");
  if (model_hidden_dim > 0 && model_hidden_dim % model_heads != 0) {
    throw ContractError("config: model.hidden_dim must be divisible by model.heads");
  }
}

std::vector<ConfigField> config_fields(RunConfig& c) {
  return {
      {"sde", "beta_min", "noise schedule floor beta(0)", &c.sde_beta_min},
      {"sde", "beta_max", "noise schedule ceiling beta(T)", &c.sde_beta_max},
      {"sde", "t_eps", "smallest usable diffusion time", &c.sde_t_eps},
      {"ego", "hops", "BFS radius of the ego-graph", &c.ego_hops},
      {"ego", "max_nodes", "hub truncation cap M", &c.ego_max_nodes},
      {"model", "hidden_dim", "network width; 0 draws from train.hidden_dim_grid", &c.model_hidden_dim},
      {"model", "heads", "attention heads (fixed at 4)", &c.model_heads},
      {"model", "channels", "attention output channels (fixed at 4)", &c.model_channels},
      {"train", "epochs", "training epochs per trial", &c.train_epochs},
      {"train", "batch_size", "ego-graphs per optimizer step", &c.train_batch_size},
      {"train", "lr", "learning rate; 0 draws from train.lr_grid", &c.train_lr},
      {"train", "weight_decay", "decoupled weight decay", &c.train_weight_decay},
      {"train", "trials", "independent hyperparameter-draw runs", &c.train_trials},
      {"train", "seed", "root seed for every stream", &c.train_seed},
      {"train", "lr_grid", "learning-rate candidates", &c.train_lr_grid},
      {"train", "hidden_dim_grid", "width candidates", &c.train_hidden_dim_grid},
      {"train", "alpha_grid", "dissimilarity feature-weight candidates", &c.train_alpha_grid},
      {"scoring", "levels", "reconstruction levels K", &c.scoring_levels},
      {"scoring", "samples_per_level", "samples per level S", &c.scoring_samples_per_level},
      {"scoring", "alpha", "feature weight; -1 uses the trial draw", &c.scoring_alpha},
      {"scoring", "penalty", "time penalty: snr, sqrt_snr, none", &c.scoring_penalty},
      {"scoring", "dissimilarity", "matrix or energy", &c.scoring_dissimilarity},
      {"scoring", "solver", "em, reverse, em_langevin, reverse_langevin", &c.scoring_solver},
      {"scoring", "steps_per_unit_time", "predictor steps per unit time", &c.scoring_steps_per_unit_time},
      {"scoring", "corrector_target_snr", "Langevin corrector target snr", &c.scoring_corrector_target_snr},
      {"scoring", "corrector_steps", "Langevin corrections per predictor step", &c.scoring_corrector_steps},
      {"scoring", "binarize_threshold", "adjacency cut for energy evaluation", &c.scoring_binarize_threshold},
      {"scoring", "profile_nodes", "nodes sampled by solver-compare and energy-hist", &c.scoring_profile_nodes},
      {"paths", "bundle", "graph bundle directory", &c.paths_bundle},
      {"paths", "checkpoint", "checkpoint directory (default: out_dir/trial_0/checkpoint)", &c.paths_checkpoint},
      {"paths", "out_dir", "output directory", &c.paths_out_dir},
      {"synth", "num_nodes", "nodes in the generated network", &c.synth_num_nodes},
      {"synth", "num_features", "features per node", &c.synth_num_features},
      {"synth", "blocks", "stochastic block model communities", &c.synth_blocks},
      {"synth", "p_in", "intra-block edge probability", &c.synth_p_in},
      {"synth", "p_out", "inter-block edge probability", &c.synth_p_out},
      {"synth", "contextual_fraction", "fraction of feature-shifted nodes", &c.synth_contextual_fraction},
      {"synth", "structural_fraction", "fraction of clique-wired nodes", &c.synth_structural_fraction},
      {"synth", "clique_size", "planted clique size", &c.synth_clique_size},
      {"synth", "feature_shift", "contextual shift in feature std devs", &c.synth_feature_shift},
      {"synth", "name", "bundle name recorded in meta.json", &c.synth_name},
  };
}

namespace {

std::string field_type_name(const ConfigField& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) return "number";
        if constexpr (std::is_same_v<T, int>) return "integer";
        if constexpr (std::is_same_v<T, std::uint64_t>) return "integer";
        if constexpr (std::is_same_v<T, bool>) return "boolean";
        if constexpr (std::is_same_v<T, std::string>) return "string";
        if constexpr (std::is_same_v<T, std::vector<double>>) return "number list";
        if constexpr (std::is_same_v<T, std::vector<int>>) return "integer list";
        return "unknown";
      },
      f.slot);
}

void assign_field(const ConfigField& f, const json& value, const std::string& where) {
  try {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            if (!value.is_number()) throw ContractError(where + ": expected a number");
            *p = value.get<double>();
          } else if constexpr (std::is_same_v<T, int>) {
            if (!value.is_number_integer()) throw ContractError(where + ": expected an integer");
            *p = value.get<int>();
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!value.is_number_integer() || (value.is_number_integer() && value.get<long long>() < 0)) {
              throw ContractError(where + ": expected a nonnegative integer");
            }
            *p = value.get<std::uint64_t>();
          } else if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) throw ContractError(where + ": expected a boolean");
            *p = value.get<bool>();
          } else if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) throw ContractError(where + ": expected a string");
            *p = value.get<std::string>();
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!value.is_array()) throw ContractError(where + ": expected an array of numbers");
            *p = value.get<std::vector<double>>();
          } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            if (!value.is_array()) throw ContractError(where + ": expected an array of integers");
            *p = value.get<std::vector<int>>();
          }
        },
        f.slot);
  } catch (const json::exception& e) {
    throw ContractError(where + ": " + e.what());
  }
}

json field_value(const ConfigField& f) {
  return std::visit([](auto* p) { return json(*p); }, f.slot);
}

}  // namespace

RunConfig parse_run_config_json(const std::string& text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(source_name + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ContractError(source_name + ": config root must be an object");

  RunConfig cfg;
  std::vector<ConfigField> fields = config_fields(cfg);
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) {
      throw ContractError(source_name + ": section '" + section + "' must be an object");
    }
    bool known_section = false;
    for (const ConfigField& f : fields) {
      if (f.section == section) {
        known_section = true;
        break;
      }
    }
    if (!known_section) throw ContractError(source_name + ": unknown section '" + section + "'");
    for (const auto& [key, value] : body.items()) {
      const ConfigField* match = nullptr;
      for (const ConfigField& f : fields) {
        if (f.section == section && f.key == key) {
          match = &f;
          break;
        }
      }
      if (!match) {
        throw ContractError(source_name + ": unknown key '" + section + "." + key + "'");
      }
      assign_field(*match, value, source_name + ": " + section + "." + key);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_json(ss.str(), path);
}

void apply_set_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  const std::size_t dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ContractError("--set expects section.key=value, got '" + assignment + "'");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string raw = assignment.substr(eq + 1);

  std::vector<ConfigField> fields = config_fields(cfg);
  for (const ConfigField& f : fields) {
    if (f.section != section || f.key != key) continue;
    json value = json::parse(raw, nullptr, false);
    const bool want_string = std::holds_alternative<std::string*>(f.slot);
    if (value.is_discarded() || (want_string && !value.is_string())) {
      value = json(raw);  // unquoted strings stay strings
    }
    assign_field(f, value, "--set " + section + "." + key);
    return;
  }
  throw ContractError("--set: unknown key '" + section + "." + key + "'");
}

std::string dump_run_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::vector<ConfigField> fields = config_fields(copy);
  json doc;
  for (const ConfigField& f : fields) doc[f.section][f.key] = field_value(f);
  return doc.dump(2) + "\n";
}

void write_resolved_config(const RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / "resolved_config.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_run_config(cfg);
}

std::string config_help() {
  RunConfig defaults;
  std::vector<ConfigField> fields = config_fields(defaults);
  std::string text = "Config keys (JSON sections; override with --set section.key=value):\n";
  for (const ConfigField& f : fields) {
    text += "  " + f.section + "." + f.key + " (" + field_type_name(f) +
            ", default " + field_value(f).dump() + "): " + f.doc + "\n";
  }
  return text;
}

}  // namespace egodiff
