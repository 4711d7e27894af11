#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "egodiff/ego.hpp"
#include "egodiff/rng.hpp"
#include "egodiff/sde.hpp"
#include "egodiff/tape.hpp"

namespace egodiff {

struct ModelConfig {
  int hidden_dim = 16;
  int gmh_heads = 4;
  int gmh_out_channels = 4;
  int adjacency_powers = 2;

  void validate() const;
  int head_dim() const { return hidden_dim / gmh_heads; }
  // Two logit maps (raw and adjacency-gated) per (head, adjacency power) pair.
  int gmh_in_channels() const { return 2 * gmh_heads * adjacency_powers; }
};

// Ordered named parameter matrices. Iteration order is insertion order and
// defines the serialization layout.
class ParamStore {
 public:
  void add(const std::string& name, Eigen::MatrixXd value);
  const Eigen::MatrixXd& at(const std::string& name) const;
  Eigen::MatrixXd& at(const std::string& name);
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t scalar_count() const;
  bool all_finite() const;
  ParamStore zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, Eigen::MatrixXd> values_;
};

struct ScoreNets {
  ModelConfig config;
  int num_features = 0;
  ParamStore theta;
  ParamStore phi;
};

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) filled row-major in
// manifest order, biases zero. Deterministic given the rng state.
ParamStore init_theta_params(const ModelConfig& cfg, int num_features, Rng& rng);
ParamStore init_phi_params(const ModelConfig& cfg, int num_features, Rng& rng);
ScoreNets init_params(const ModelConfig& cfg, int num_features, Rng& rng);

std::vector<Eigen::MatrixXd> adjacency_channels(const Eigen::MatrixXd& a, int powers);

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                          const Eigen::MatrixXd& b, const Eigen::VectorXd& mask);

struct GmhOutput {
  Eigen::MatrixXd x_out;
  std::vector<Eigen::MatrixXd> attn;  // gmh_out_channels maps, N x N each
};
GmhOutput gmh_layer(const Eigen::MatrixXd& x, const std::vector<Eigen::MatrixXd>& adj_channels,
                    const ParamStore& phi, const ModelConfig& cfg, const Eigen::VectorXd& mask);

// Noise prediction heads (no time input; t enters only through score scaling).
Eigen::MatrixXd predict_eps_x(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& mask, const ParamStore& theta,
                              const ModelConfig& cfg);
Eigen::MatrixXd predict_eps_a(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& mask, const ParamStore& phi,
                              const ModelConfig& cfg);

// score = -eps_hat / sigma_t.
Eigen::MatrixXd score_x_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                                const Eigen::VectorXd& mask, double t, const ParamStore& theta,
                                const ModelConfig& cfg, const VpSde& sde);
Eigen::MatrixXd score_a_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                                const Eigen::VectorXd& mask, double t, const ParamStore& phi,
                                const ModelConfig& cfg, const VpSde& sde);

// Tape mirrors of the plain forwards, used for training gradients and
// cross-validated against them in tests.
struct TapeParams {
  std::map<std::string, Var> vars;
};
TapeParams register_params(Tape& tape, const ParamStore& store);
Var tape_eps_x(Tape& tape, Var x, Var a, const Eigen::VectorXd& mask, const TapeParams& theta,
               const ModelConfig& cfg);
Var tape_eps_a(Tape& tape, Var x, Var a, const Eigen::VectorXd& mask, const TapeParams& phi,
               const ModelConfig& cfg);

// One diffusion draw per batch element: t ~ U(t_eps, t_max), then feature and
// adjacency perturbations at that t.
struct DsmDraws {
  std::vector<double> t;
  std::vector<Perturbation> x;
  std::vector<Perturbation> a;
};
DsmDraws make_dsm_draws(const EgoBatch& batch, const VpSde& sde, Rng& rng);

struct DsmLoss {
  double loss_x = 0.0;
  double loss_a = 0.0;
  ParamStore grad_theta;
  ParamStore grad_phi;
};

DsmLoss loss_and_grads(const ParamStore& theta, const ParamStore& phi, const EgoBatch& batch,
                       const DsmDraws& draws, const ModelConfig& cfg);

// Same objective evaluated with the plain forwards (finite-difference oracle
// path; no tape involved).
std::pair<double, double> dsm_loss_value(const ParamStore& theta, const ParamStore& phi,
                                         const EgoBatch& batch, const DsmDraws& draws,
                                         const ModelConfig& cfg);

// Reduction shared by both paths; eps lists may come from any source, which
// lets tests plug a perfect oracle (eps = drawn noise).
std::pair<double, double> dsm_loss_from_eps(const std::vector<Eigen::MatrixXd>& eps_x,
                                            const std::vector<Eigen::MatrixXd>& eps_a,
                                            const EgoBatch& batch, const DsmDraws& draws);

// Checkpoint directory: manifest.json (ordered parameter list plus model, sde,
// ego, scaler and hyperparameter-draw fields) and params.bin (concatenated
// row-major little-endian f64 in manifest order). Round-trips bit-exactly.
struct Checkpoint {
  ModelConfig model;
  VpSde sde;
  EgoConfig ego;
  int num_features = 0;
  std::vector<double> scaler_std;     // per-feature divisors applied before training
  std::vector<int> scaler_unscaled;   // 1 = constant column left untouched
  double alpha = 0.5;                 // dissimilarity weight drawn for this trial
  double lr = 0.0;                    // recorded draw, informational
  ParamStore theta;
  ParamStore phi;
};

void save_checkpoint(const Checkpoint& ck, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace egodiff
