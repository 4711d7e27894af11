#pragma once

#include <Eigen/Dense>
#include <utility>

#include "egodiff/errors.hpp"
#include "egodiff/rng.hpp"

namespace egodiff {

// Realization of the Gaussian transition kernel at time t:
// noisy = m_t * clean + sigma_t * noise, with noise standard normal on real
// slots and exactly zero on padding.
struct Perturbation {
  Eigen::MatrixXd noisy;
  Eigen::MatrixXd noise;
  double t = 0.0;
};

// Variance-preserving schedule with linear beta(t) and closed-form transition
// moments. Drives both the feature and adjacency channels by default.
struct VpSde {
  double beta_min = 0.1;
  double beta_max = 1.0;
  double t_max = 1.0;
  double t_eps = 1e-5;

  void validate() const;

  double beta(double t) const;           // linear interpolation on [0, T]
  double beta_integral(double t) const;  // int_0^t beta(s) ds

  // (m_t, sigma_t): signal decay factor and perturbation std.
  std::pair<double, double> moments(double t) const;

  // m_t^2 / sigma_t^2; strictly decreasing on [t_eps, T].
  double snr(double t) const;

  Perturbation perturb_features(const Eigen::MatrixXd& x0, const Eigen::VectorXd& mask,
                                double t, Rng& rng) const;

  // Noise drawn on the strict upper triangle of the real block and mirrored;
  // diagonal stays zero and the output is exactly symmetric.
  Perturbation perturb_adjacency(const Eigen::MatrixXd& a0, const Eigen::VectorXd& mask,
                                 double t, Rng& rng) const;
};

// Standard-normal draws on real rows only (row-major order), zero on padding.
Eigen::MatrixXd masked_feature_noise(const Eigen::VectorXd& mask, Eigen::Index cols, Rng& rng);

// Symmetric draws on the strict upper triangle of the real block, mirrored,
// zero diagonal and padding.
Eigen::MatrixXd masked_pair_noise(const Eigen::VectorXd& mask, Rng& rng);

// Conditional score -(noisy - m_t * clean) / sigma_t^2 = -Z / sigma_t,
// zero on padding. This is the regression target of denoising score matching.
Eigen::MatrixXd score_target(const Perturbation& p, const Eigen::MatrixXd& clean,
                             double t, const VpSde& sde);

}  // namespace egodiff
