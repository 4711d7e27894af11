#include "egodiff/solver.hpp"

#include <cmath>

namespace egodiff {

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "em") return SolverKind::Em;
  if (name == "reverse") return SolverKind::Reverse;
  if (name == "em_langevin") return SolverKind::EmLangevin;
  if (name == "reverse_langevin") return SolverKind::ReverseLangevin;
  if (name == "s4") {
    throw ContractError(
        "solver 's4' is reserved but not implemented here; "
        "choose em, reverse, em_langevin, or reverse_langevin");
  }
  throw ContractError("unknown solver kind '" + name +
                      "' (expected em, reverse, em_langevin, reverse_langevin)");
}

std::string solver_kind_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::Em: return "em";
    case SolverKind::Reverse: return "reverse";
    case SolverKind::EmLangevin: return "em_langevin";
    case SolverKind::ReverseLangevin: return "reverse_langevin";
  }
  throw ContractError("solver_kind_name: invalid enum value");
}

bool solver_uses_corrector(SolverKind kind) {
  return kind == SolverKind::EmLangevin || kind == SolverKind::ReverseLangevin;
}

void SolverConfig::validate() const {
  if (steps_per_unit_time < 1) throw ContractError("SolverConfig: steps_per_unit_time must be >= 1");
  if (corrector_target_snr <= 0.0) throw ContractError("SolverConfig: corrector_target_snr must be > 0");
  if (corrector_steps < 0) throw ContractError("SolverConfig: corrector_steps must be >= 0");
}

int predictor_step_count(double tau, const VpSde& sde, const SolverConfig& cfg) {
  cfg.validate();
  if (tau < sde.t_eps || tau > sde.t_max) {
    throw ContractError("predictor_step_count: tau outside [t_eps, T]");
  }
  const int n = static_cast<int>(std::floor(cfg.steps_per_unit_time * tau / sde.t_max));
  return n < 1 ? 1 : n;
}

Eigen::MatrixXd em_step(const Eigen::MatrixXd& state, double t, double dt,
                        const Eigen::MatrixXd& score, const VpSde& sde,
                        const Eigen::MatrixXd& noise, bool zero_diffusion) {
  if (dt <= 0.0) throw ContractError("em_step: dt must be positive");
  const double beta = sde.beta(t);
  // state - [f - g^2 s] dt + g sqrt(dt) z with f = -beta/2 state, g = sqrt(beta)
  Eigen::MatrixXd out = state + 0.5 * beta * dt * state;
  if (!zero_diffusion) {
    out += beta * dt * score + std::sqrt(beta * dt) * noise;
  }
  return out;
}

Eigen::MatrixXd reverse_step(const Eigen::MatrixXd& state, double beta_i,
                             const Eigen::MatrixXd& score, const Eigen::MatrixXd& noise,
                             bool zero_diffusion) {
  if (beta_i <= 0.0) throw ContractError("reverse_step: beta_i must be positive");
  if (beta_i >= 1.0) {
    throw ContractError("reverse_step: beta_i >= 1 (step too coarse for the schedule)");
  }
  Eigen::MatrixXd out = (2.0 - std::sqrt(1.0 - beta_i)) * state;
  if (!zero_diffusion) {
    out += beta_i * score + std::sqrt(beta_i) * noise;
  }
  return out;
}

Eigen::MatrixXd langevin_correct(const Eigen::MatrixXd& state, const Eigen::MatrixXd& score,
                                 double target_snr, const Eigen::MatrixXd& noise) {
  if (target_snr <= 0.0) throw ContractError("langevin_correct: target_snr must be > 0");
  const double score_norm = score.norm();
  if (score_norm == 0.0) return state;
  const double noise_norm = noise.norm();
  const double ratio = target_snr * noise_norm / score_norm;
  const double delta = 2.0 * ratio * ratio;
  return state + delta * score + std::sqrt(2.0 * delta) * noise;
}

ScoreFn make_score_fn(const ScoreNets& nets, const Eigen::VectorXd& mask, const VpSde& sde) {
  ScoreFn fn;
  fn.x = [&nets, mask, &sde](const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, double t) {
    return score_x_forward(x, a, mask, t, nets.theta, nets.config, sde);
  };
  fn.a = [&nets, mask, &sde](const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, double t) {
    return score_a_forward(x, a, mask, t, nets.phi, nets.config, sde);
  };
  return fn;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> integrate_reverse(
    const Eigen::MatrixXd& x_tau, const Eigen::MatrixXd& a_tau, const Eigen::VectorXd& mask,
    double tau, const ScoreFn& scores, const VpSde& sde, const SolverConfig& cfg, Rng& rng) {
  cfg.validate();
  sde.validate();
  const int n_steps = predictor_step_count(tau, sde, cfg);
  const double dt = tau / n_steps;
  const bool corrector = solver_uses_corrector(cfg.kind);
  const bool ancestral = cfg.kind == SolverKind::Reverse || cfg.kind == SolverKind::ReverseLangevin;

  Eigen::MatrixXd x = x_tau;
  Eigen::MatrixXd a = a_tau;
  const Eigen::MatrixXd zero_x = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  const Eigen::MatrixXd zero_a = Eigen::MatrixXd::Zero(a.rows(), a.cols());

  for (int k = 0; k < n_steps; ++k) {
    const double t_k = tau - k * dt;
    const double t_eval = std::max(t_k, sde.t_eps);
    const bool last = (k == n_steps - 1);

    const Eigen::MatrixXd sx = scores.x(x, a, t_eval);
    const Eigen::MatrixXd sa = scores.a(x, a, t_eval);
    const Eigen::MatrixXd zx =
        (last || cfg.zero_diffusion) ? zero_x : masked_feature_noise(mask, x.cols(), rng);
    const Eigen::MatrixXd za = (last || cfg.zero_diffusion) ? zero_a : masked_pair_noise(mask, rng);

    if (ancestral) {
      const double beta_i = sde.beta(t_eval) * dt;
      x = reverse_step(x, beta_i, sx, zx, cfg.zero_diffusion);
      a = reverse_step(a, beta_i, sa, za, cfg.zero_diffusion);
    } else {
      x = em_step(x, t_eval, dt, sx, sde, zx, cfg.zero_diffusion);
      a = em_step(a, t_eval, dt, sa, sde, za, cfg.zero_diffusion);
    }
    if (!x.allFinite() || !a.allFinite()) {
      throw NumericalError("integrate_reverse: diverged at predictor step " + std::to_string(k) +
                           " of " + std::to_string(n_steps));
    }

    if (corrector && !last) {
      const double t_next = std::max(t_k - dt, sde.t_eps);
      for (int c = 0; c < cfg.corrector_steps; ++c) {
        const Eigen::MatrixXd csx = scores.x(x, a, t_next);
        const Eigen::MatrixXd csa = scores.a(x, a, t_next);
        x = langevin_correct(x, csx, cfg.corrector_target_snr,
                             masked_feature_noise(mask, x.cols(), rng));
        a = langevin_correct(a, csa, cfg.corrector_target_snr, masked_pair_noise(mask, rng));
        if (!x.allFinite() || !a.allFinite()) {
          throw NumericalError("integrate_reverse: corrector diverged after predictor step " +
                               std::to_string(k));
        }
      }
    }
  }
  return {std::move(x), std::move(a)};
}

}  // namespace egodiff
