#include "egodiff/train.hpp"

#include <cmath>
#include <string>

namespace egodiff {

namespace {
constexpr double kConstantColumnThreshold = 1e-12;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ContractError("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
  if (weight_decay < 0.0) throw ContractError("TrainConfig: weight_decay must be >= 0");
  if (trials < 1) throw ContractError("TrainConfig: trials must be >= 1");
  if (lr_grid.empty() || hidden_dim_grid.empty() || alpha_grid.empty()) {
    throw ContractError("TrainConfig: hyperparameter grids must be non-empty");
  }
  if (lr < 0.0) throw ContractError("TrainConfig: lr must be >= 0 (0 draws from the grid)");
  ego.validate();
  sde.validate();
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& features) const {
  if (static_cast<std::size_t>(features.cols()) != std_dev.size()) {
    throw DataError("FeatureScaler: feature count " + std::to_string(features.cols()) +
                    " does not match scaler width " + std::to_string(std_dev.size()));
  }
  Eigen::MatrixXd out = features;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (!unscaled[static_cast<std::size_t>(c)]) out.col(c) /= std_dev[static_cast<std::size_t>(c)];
  }
  return out;
}

std::pair<SparseNetwork, FeatureScaler> standardize_features(const SparseNetwork& net) {
  if (net.num_nodes() < 2) throw ContractError("standardize_features: need at least 2 nodes");
  const Eigen::MatrixXd& x = net.features();
  FeatureScaler scaler;
  scaler.std_dev.resize(static_cast<std::size_t>(x.cols()), 1.0);
  scaler.unscaled.resize(static_cast<std::size_t>(x.cols()), 0);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = (x.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < kConstantColumnThreshold) {
      scaler.std_dev[static_cast<std::size_t>(c)] = 1.0;
      scaler.unscaled[static_cast<std::size_t>(c)] = 1;
    } else {
      scaler.std_dev[static_cast<std::size_t>(c)] = sd;
    }
  }
  return {net.with_features(scaler.apply(x)), scaler};
}

HyperDraw draw_hyperparameters(const TrainConfig& cfg, int trial_index) {
  cfg.validate();
  if (trial_index < 0) throw ContractError("draw_hyperparameters: trial_index must be >= 0");
  Rng rng = make_rng(cfg.seed, {stream::trial, static_cast<std::uint64_t>(trial_index)});
  HyperDraw d;
  d.trial = trial_index;
  d.lr = cfg.lr_grid[rng.below(cfg.lr_grid.size())];
  d.hidden_dim = cfg.hidden_dim_grid[rng.below(cfg.hidden_dim_grid.size())];
  d.alpha = cfg.alpha_grid[rng.below(cfg.alpha_grid.size())];
  return d;
}

void adam_update(ParamStore& params, const ParamStore& grads, AdamState& state, double lr,
                 double weight_decay) {
  if (state.step == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& name : params.names()) {
    Eigen::MatrixXd& p = params.at(name);
    const Eigen::MatrixXd& g = grads.at(name);
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ContractError("adam_update: gradient shape mismatch for " + name);
    }
    Eigen::MatrixXd& m = state.m.at(name);
    Eigen::MatrixXd& v = state.v.at(name);
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    p = p * (1.0 - lr * weight_decay) -
        lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
    if (!p.allFinite()) throw NumericalError("adam_update: non-finite parameter " + name);
  }
}

DsmStepResult dsm_step(const ParamStore& theta, const ParamStore& phi, const EgoBatch& batch,
                       const VpSde& sde, const ModelConfig& cfg, Rng& rng) {
  DsmDraws draws = make_dsm_draws(batch, sde, rng);
  DsmLoss loss = loss_and_grads(theta, phi, batch, draws, cfg);
  return {loss.loss_x, loss.loss_a, std::move(loss.grad_theta), std::move(loss.grad_phi)};
}

TrainResult train_model(const SparseNetwork& net, const TrainConfig& cfg, const HyperDraw& draw,
                        const FeatureScaler& scaler) {
  cfg.validate();
  if (draw.hidden_dim < 1 || draw.lr <= 0.0) {
    throw ContractError("train_model: draw must carry a positive hidden_dim and lr");
  }

  ModelConfig model_cfg;
  model_cfg.hidden_dim = draw.hidden_dim;
  model_cfg.validate();

  const std::uint64_t trial = static_cast<std::uint64_t>(draw.trial);
  Rng init_rng = make_rng(cfg.seed, {stream::init, trial});
  ScoreNets nets = init_params(model_cfg, net.num_features(), init_rng);

  Rng train_rng = make_rng(cfg.seed, {stream::train, trial});
  AdamState adam_theta;
  AdamState adam_phi;

  const int n = net.num_nodes();
  const int batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_x = 0.0;
    double epoch_a = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      std::vector<DenseEgoGraph> egos;
      egos.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int i = 0; i < cfg.batch_size; ++i) {
        const int v = static_cast<int>(train_rng.below(static_cast<std::uint64_t>(n)));
        DenseEgoGraph ego = extract_ego(net, v, cfg.ego.hops);
        egos.push_back(truncate(ego, cfg.ego.max_nodes, train_rng));
      }
      EgoBatch batch = build_batch(egos);
      DsmStepResult step = dsm_step(nets.theta, nets.phi, batch, cfg.sde, model_cfg, train_rng);
      adam_update(nets.theta, step.grad_theta, adam_theta, draw.lr, cfg.weight_decay);
      adam_update(nets.phi, step.grad_phi, adam_phi, draw.lr, cfg.weight_decay);
      epoch_x += step.loss_x;
      epoch_a += step.loss_a;
    }
    result.loss_curve.push_back({epoch_x / batches_per_epoch, epoch_a / batches_per_epoch});
  }

  Checkpoint ck;
  ck.model = model_cfg;
  ck.sde = cfg.sde;
  ck.ego = cfg.ego;
  ck.num_features = net.num_features();
  ck.scaler_std = scaler.std_dev;
  ck.scaler_unscaled = scaler.unscaled;
  ck.alpha = draw.alpha;
  ck.lr = draw.lr;
  ck.theta = std::move(nets.theta);
  ck.phi = std::move(nets.phi);
  result.checkpoint = std::move(ck);
  return result;
}

}  // namespace egodiff
