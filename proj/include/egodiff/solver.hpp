#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>

#include "egodiff/model.hpp"
#include "egodiff/rng.hpp"
#include "egodiff/sde.hpp"

namespace egodiff {

// S4 is reserved but rejected at parse time: it belongs to the upstream
// sampler family and has no definition here.
enum class SolverKind { Em, Reverse, EmLangevin, ReverseLangevin };

SolverKind parse_solver_kind(const std::string& name);
std::string solver_kind_name(SolverKind kind);
bool solver_uses_corrector(SolverKind kind);

struct SolverConfig {
  SolverKind kind = SolverKind::Em;
  int steps_per_unit_time = 100;
  double corrector_target_snr = 0.16;
  int corrector_steps = 1;
  bool zero_diffusion = false;  // test hook: g = 0, leaving only drift inversion

  void validate() const;
};

// floor(steps_per_unit_time * tau / T), at least 1.
int predictor_step_count(double tau, const VpSde& sde, const SolverConfig& cfg);

// Reverse-time Euler-Maruyama update for one channel. Noise is supplied by
// the caller (zero for the final denoising step and for drift-only tests).
Eigen::MatrixXd em_step(const Eigen::MatrixXd& state, double t, double dt,
                        const Eigen::MatrixXd& score, const VpSde& sde,
                        const Eigen::MatrixXd& noise, bool zero_diffusion = false);

// Ancestral-style VP discretization with beta_i = beta(t_i) * dt.
Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& state, double beta_i,
                             const Eigen::MatrixXd& score, const Eigen::MatrixXd& noise,
                             bool zero_diffusion = false);

// One Langevin MCMC correction; identity when the score vanishes.
Eigen::MatrixXd langevin_correct(const Eigen::MatrixXd& state, const Eigen::MatrixXd& score,
                                 double target_snr, const Eigen::MatrixXd& noise);

// Scores for the coupled system at (x, a, t). Abstracted so tests can zero or
// replace the networks.
struct ScoreFn {
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, double t)> x;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, double t)> a;
};

ScoreFn make_score_fn(const ScoreNets& nets, const Eigen::VectorXd& mask, const VpSde& sde);

// Integrates the joint (X, A) system from time tau down to 0 with the
// configured predictor (and optional Langevin corrector after every
// non-final predictor step). The adjacency channel stays symmetric,
// zero-diagonal, and masked throughout; the final step adds no noise.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> integrate_reverse(
    const Eigen::MatrixXd& x_tau, const Eigen::MatrixXd& a_tau, const Eigen::VectorXd& mask,
    double tau, const ScoreFn& scores, const VpSde& sde, const SolverConfig& cfg, Rng& rng);

}  // namespace egodiff
