#include "egodiff/sde.hpp"

#include <cmath>
#include <string>

namespace egodiff {

void VpSde::validate() const {
  if (!(beta_min > 0.0) || !(beta_min <= beta_max))
    throw ContractError("VpSde: need 0 < beta_min <= beta_max");
  if (!(t_max > 0.0)) throw ContractError("VpSde: t_max must be positive");
  if (!(t_eps > 0.0) || !(t_eps < t_max / 10.0))
    throw ContractError("VpSde: t_eps must satisfy 0 < t_eps << t_max");
}

double VpSde::beta(double t) const {
  if (t < 0.0 || t > t_max)
    throw ContractError("VpSde::beta: t=" + std::to_string(t) + " outside [0, T]");
  return beta_min + (beta_max - beta_min) * (t / t_max);
}

double VpSde::beta_integral(double t) const {
  return beta_min * t + 0.5 * (beta_max - beta_min) * t * t / t_max;
}

std::pair<double, double> VpSde::moments(double t) const {
  if (t < 0.0 || t > t_max)
    throw ContractError("VpSde::moments: t outside [0, T]");
  const double integral = beta_integral(t);
  const double m = std::exp(-0.5 * integral);
  const double sigma = std::sqrt(std::max(0.0, 1.0 - std::exp(-integral)));
  return {m, sigma};
}

double VpSde::snr(double t) const {
  if (t < t_eps)
    throw ContractError("VpSde::snr: t below t_eps (sigma -> 0 divergence)");
  const auto [m, sigma] = moments(t);
  return (m * m) / (sigma * sigma);
}

Eigen::MatrixXd masked_feature_noise(const Eigen::VectorXd& mask, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(mask.size(), cols);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (mask(i) != 1.0) continue;
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = rng.normal();
  }
  return z;
}

Eigen::MatrixXd masked_pair_noise(const Eigen::VectorXd& mask, Rng& rng) {
  const Eigen::Index n = mask.size();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask(i) != 1.0) continue;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (mask(j) != 1.0) continue;
      const double v = rng.normal();
      z(i, j) = v;
      z(j, i) = v;
    }
  }
  return z;
}

Perturbation VpSde::perturb_features(const Eigen::MatrixXd& x0, const Eigen::VectorXd& mask,
                                     double t, Rng& rng) const {
  if (mask.size() != x0.rows()) throw ContractError("perturb_features: mask length mismatch");
  const auto [m, sigma] = moments(t);
  Perturbation p;
  p.t = t;
  p.noise = masked_feature_noise(mask, x0.cols(), rng);
  p.noisy = m * x0 + sigma * p.noise;
  return p;
}

Perturbation VpSde::perturb_adjacency(const Eigen::MatrixXd& a0, const Eigen::VectorXd& mask,
                                      double t, Rng& rng) const {
  const Eigen::Index n = a0.rows();
  if (a0.cols() != n) throw ContractError("perturb_adjacency: adjacency not square");
  if (mask.size() != n) throw ContractError("perturb_adjacency: mask length mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a0(i, i) != 0.0) throw ContractError("perturb_adjacency: nonzero diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (a0(i, j) != a0(j, i)) throw ContractError("perturb_adjacency: input not symmetric");
  }

  const auto [m, sigma] = moments(t);
  Perturbation p;
  p.t = t;
  p.noise = masked_pair_noise(mask, rng);
  p.noisy = m * a0 + sigma * p.noise;
  return p;
}

Eigen::MatrixXd score_target(const Perturbation& p, const Eigen::MatrixXd& clean,
                             double t, const VpSde& sde) {
  if (t < sde.t_eps) throw ContractError("score_target: t below t_eps");
  if (clean.rows() != p.noisy.rows() || clean.cols() != p.noisy.cols())
    throw ContractError("score_target: shape mismatch");
  const auto [m, sigma] = sde.moments(t);
  return -(p.noisy - m * clean) / (sigma * sigma);
}

}  // namespace egodiff
