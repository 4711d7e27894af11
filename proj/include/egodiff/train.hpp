#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "egodiff/ego.hpp"
#include "egodiff/graph.hpp"
#include "egodiff/model.hpp"
#include "egodiff/sde.hpp"

namespace egodiff {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double lr = 0.0;          // > 0 fixes the rate; 0 means draw from lr_grid
  double weight_decay = 0.01;
  int trials = 3;
  std::uint64_t seed = 0;
  std::vector<double> lr_grid = {0.1, 0.05, 0.01};
  std::vector<int> hidden_dim_grid = {8, 12, 16};
  std::vector<double> alpha_grid = {0.8, 0.5, 0.2};
  EgoConfig ego;
  VpSde sde;

  void validate() const;
};

// Per-feature population standard deviations. Columns with std below the
// threshold are left untouched and flagged instead of divided by ~0.
struct FeatureScaler {
  std::vector<double> std_dev;
  std::vector<int> unscaled;  // 1 = column left as-is

  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

std::pair<SparseNetwork, FeatureScaler> standardize_features(const SparseNetwork& net);

struct HyperDraw {
  int trial = 0;
  double lr = 0.0;
  int hidden_dim = 0;
  double alpha = 0.0;
};

// Uniform draw from each grid, seeded by (seed, trial); deterministic per pair.
HyperDraw draw_hyperparameters(const TrainConfig& cfg, int trial_index);

// Adam moments per parameter, lazily shaped on first update.
struct AdamState {
  ParamStore m;
  ParamStore v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_update(ParamStore& params, const ParamStore& grads, AdamState& state, double lr,
                 double weight_decay);

struct DsmStepResult {
  double loss_x = 0.0;
  double loss_a = 0.0;
  ParamStore grad_theta;
  ParamStore grad_phi;
};

DsmStepResult dsm_step(const ParamStore& theta, const ParamStore& phi, const EgoBatch& batch,
                       const VpSde& sde, const ModelConfig& cfg, Rng& rng);

struct TrainResult {
  Checkpoint checkpoint;
  // Per-epoch mean losses, one row per epoch: {loss_x, loss_a}.
  std::vector<std::array<double, 2>> loss_curve;
};

// Trains one trial on an already-standardized network. The scaler is recorded
// into the checkpoint so scoring can reproduce the training-time features.
TrainResult train_model(const SparseNetwork& net, const TrainConfig& cfg, const HyperDraw& draw,
                        const FeatureScaler& scaler);

}  // namespace egodiff
