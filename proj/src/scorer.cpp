#include "egodiff/scorer.hpp"

#include <algorithm>
#include <cmath>

namespace egodiff {

Penalty parse_penalty(const std::string& name) {
  if (name == "snr") return Penalty::Snr;
  if (name == "sqrt_snr") return Penalty::SqrtSnr;
  if (name == "none") return Penalty::None;
  throw ContractError("unknown penalty '" + name + "' (expected snr, sqrt_snr, none)");
}

Dissimilarity parse_dissimilarity(const std::string& name) {
  if (name == "matrix") return Dissimilarity::Matrix;
  if (name == "energy") return Dissimilarity::Energy;
  throw ContractError("unknown dissimilarity '" + name + "' (expected matrix, energy)");
}

std::string penalty_name(Penalty p) {
  switch (p) {
    case Penalty::Snr: return "snr";
    case Penalty::SqrtSnr: return "sqrt_snr";
    case Penalty::None: return "none";
  }
  throw ContractError("penalty_name: invalid enum value");
}

std::string dissimilarity_name(Dissimilarity d) {
  switch (d) {
    case Dissimilarity::Matrix: return "matrix";
    case Dissimilarity::Energy: return "energy";
  }
  throw ContractError("dissimilarity_name: invalid enum value");
}

void ScoringConfig::validate() const {
  if (levels < 1) throw ContractError("ScoringConfig: levels must be >= 1");
  if (samples_per_level < 1) throw ContractError("ScoringConfig: samples_per_level must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("ScoringConfig: alpha must lie in [0, 1]");
  if (binarize_threshold < 0.0 || binarize_threshold > 1.0) {
    throw ContractError("ScoringConfig: binarize_threshold must lie in [0, 1]");
  }
  solver.validate();
}

std::vector<double> reconstruction_levels(int k, double t_max) {
  if (k < 1) throw ContractError("reconstruction_levels: K must be >= 1");
  if (t_max <= 0.0) throw ContractError("reconstruction_levels: T must be positive");
  std::vector<double> taus;
  taus.reserve(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) taus.push_back(t_max * static_cast<double>(i) / (k + 1));
  return taus;
}

double penalty_weight(Penalty p, double tau, const VpSde& sde) {
  switch (p) {
    case Penalty::Snr: return sde.snr(tau);
    case Penalty::SqrtSnr: return std::sqrt(sde.snr(tau));
    case Penalty::None: return 1.0;
  }
  throw ContractError("penalty_weight: invalid enum value");
}

Reconstruction reconstruct(const DenseEgoGraph& ego, double tau, const ScoreNets& nets,
                           const VpSde& sde, const SolverConfig& solver, Rng& rng) {
  if (tau < sde.t_eps || tau > sde.t_max) throw ContractError("reconstruct: tau outside [t_eps, T]");
  const Perturbation px = sde.perturb_features(ego.x, ego.mask, tau, rng);
  const Perturbation pa = sde.perturb_adjacency(ego.a, ego.mask, tau, rng);
  const ScoreFn scores = make_score_fn(nets, ego.mask, sde);
  auto [x_hat, a_hat] = integrate_reverse(px.noisy, pa.noisy, ego.mask, tau, scores, sde, solver, rng);
  return {std::move(x_hat), std::move(a_hat)};
}

double matrix_distance(const DenseEgoGraph& g, const Eigen::MatrixXd& x_hat,
                       const Eigen::MatrixXd& a_hat, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("matrix_distance: alpha must lie in [0, 1]");
  if (x_hat.rows() != g.x.rows() || x_hat.cols() != g.x.cols() || a_hat.rows() != g.a.rows() ||
      a_hat.cols() != g.a.cols()) {
    throw ContractError("matrix_distance: shape mismatch");
  }
  const double n = static_cast<double>(g.real_count());
  const double f = static_cast<double>(g.f());
  const Eigen::MatrixXd dx = g.mask.asDiagonal() * (g.x - x_hat);
  const Eigen::MatrixXd da = g.mask.asDiagonal() * (g.a - a_hat) * g.mask.asDiagonal();
  return (1.0 - alpha) * da.norm() / (n * n) + alpha * dx.norm() / (n * f);
}

EnergyPair reconstruction_energies(const DenseEgoGraph& g, const Eigen::MatrixXd& x_hat,
                                   const Eigen::MatrixXd& a_hat, double binarize_threshold) {
  EnergyPair e;
  try {
    e.orig = normalized_energy(g.x, g.a, g.mask);
  } catch (const NormalizationError&) {
    e.orig = 0.0;
    e.degenerate_orig = true;
  }
  Eigen::MatrixXd a_bin = Eigen::MatrixXd::Zero(a_hat.rows(), a_hat.cols());
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) {
    for (Eigen::Index j = 0; j < a_hat.cols(); ++j) {
      if (i != j && g.mask(i) == 1.0 && g.mask(j) == 1.0 && a_hat(i, j) > binarize_threshold) {
        a_bin(i, j) = 1.0;
      }
    }
  }
  // Binarization of a symmetric matrix is symmetric; enforce anyway so a
  // borderline asymmetric reconstruction cannot reach the Laplacian.
  a_bin = a_bin.cwiseMax(a_bin.transpose().eval());
  try {
    e.recon = normalized_energy(g.mask.asDiagonal() * x_hat, a_bin, g.mask);
  } catch (const NormalizationError&) {
    e.recon = 0.0;
    e.degenerate_recon = true;
  }
  return e;
}

double energy_shift(const EnergyPair& e) { return std::abs(e.orig - e.recon); }

namespace {

DenseEgoGraph scoring_ego(const SparseNetwork& net, int v, const EgoConfig& ego_cfg,
                          std::uint64_t seed) {
  DenseEgoGraph ego = extract_ego(net, v, ego_cfg.hops);
  Rng trunc_rng = make_rng(seed, {stream::truncate, static_cast<std::uint64_t>(v)});
  return truncate(ego, ego_cfg.max_nodes, trunc_rng);
}

}  // namespace

double node_score(const SparseNetwork& net, int v, const ScoringConfig& cfg, const ScoreNets& nets,
                  const VpSde& sde, const EgoConfig& ego_cfg, std::uint64_t seed,
                  std::vector<BreakdownRow>* breakdown) {
  cfg.validate();
  if (v < 0 || v >= net.num_nodes()) throw ContractError("node_score: node out of range");
  const DenseEgoGraph ego = scoring_ego(net, v, ego_cfg, seed);
  const std::vector<double> taus = reconstruction_levels(cfg.levels, sde.t_max);

  double score = 0.0;
  for (int i = 0; i < cfg.levels; ++i) {
    const double tau = taus[static_cast<std::size_t>(i)];
    const double gamma = penalty_weight(cfg.penalty, tau, sde);
    for (int j = 0; j < cfg.samples_per_level; ++j) {
      Rng rng = make_rng(seed, {stream::score, static_cast<std::uint64_t>(v),
                                static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      Reconstruction rec;
      try {
        rec = reconstruct(ego, tau, nets, sde, cfg.solver, rng);
      } catch (const NumericalError& e) {
        throw NumericalError("node " + std::to_string(v) + ", tau " + std::to_string(tau) + ": " +
                             e.what());
      }
      const EnergyPair energies =
          reconstruction_energies(ego, rec.x, rec.a, cfg.binarize_threshold);
      const double d = cfg.dissimilarity == Dissimilarity::Matrix
                           ? matrix_distance(ego, rec.x, rec.a, cfg.alpha)
                           : energy_shift(energies);
      score += gamma * d;
      if (breakdown) {
        breakdown->push_back({v, tau, j, d, energies.orig, energies.recon,
                              energies.degenerate_orig || energies.degenerate_recon});
      }
    }
  }
  if (!std::isfinite(score)) {
    throw NumericalError("node_score: non-finite score for node " + std::to_string(v));
  }
  return score;
}

ScoreReport score_all(const SparseNetwork& net, const ScoringConfig& cfg, const ScoreNets& nets,
                      const VpSde& sde, const EgoConfig& ego_cfg, std::uint64_t seed) {
  if (net.num_features() != nets.num_features) {
    throw DataError("score_all: network has " + std::to_string(net.num_features()) +
                    " features but the checkpoint expects " + std::to_string(nets.num_features));
  }
  ScoreReport report;
  const int n = net.num_nodes();
  report.node_ids.reserve(static_cast<std::size_t>(n));
  report.scores.reserve(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    report.node_ids.push_back(v);
    report.scores.push_back(node_score(net, v, cfg, nets, sde, ego_cfg, seed, &report.breakdown));
  }
  for (const BreakdownRow& row : report.breakdown) {
    if (row.degenerate) report.degenerate_count += 1;
  }
  report.ranking = report.node_ids;
  std::sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    const double sa = report.scores[static_cast<std::size_t>(a)];
    const double sb = report.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return report;
}

std::vector<ProfileRow> solver_error_profile(const SparseNetwork& net,
                                             const std::vector<int>& nodes,
                                             const std::vector<SolverKind>& kinds,
                                             const std::vector<double>& taus,
                                             const ScoringConfig& cfg, const ScoreNets& nets,
                                             const VpSde& sde, const EgoConfig& ego_cfg,
                                             std::uint64_t seed) {
  if (nodes.empty()) throw ContractError("solver_error_profile: need at least one node");
  std::vector<ProfileRow> rows;
  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    SolverConfig solver = cfg.solver;
    solver.kind = kinds[ki];
    for (std::size_t ti = 0; ti < taus.size(); ++ti) {
      const double tau = taus[ti];
      double ex = 0.0;
      double ea = 0.0;
      for (int v : nodes) {
        const DenseEgoGraph ego = scoring_ego(net, v, ego_cfg, seed);
        Rng rng = make_rng(seed, {stream::profile, ki, ti, static_cast<std::uint64_t>(v)});
        const Reconstruction rec = reconstruct(ego, tau, nets, sde, solver, rng);
        const double n_real = static_cast<double>(ego.real_count());
        const Eigen::MatrixXd dx = ego.mask.asDiagonal() * (rec.x - ego.x);
        const Eigen::MatrixXd da = ego.mask.asDiagonal() * (rec.a - ego.a) * ego.mask.asDiagonal();
        ex += dx.norm() / (n_real * ego.f());
        ea += da.norm() / (n_real * n_real);
      }
      rows.push_back({solver_kind_name(kinds[ki]), tau, ex / static_cast<double>(nodes.size()),
                      ea / static_cast<double>(nodes.size())});
    }
  }
  return rows;
}

std::vector<EnergyRow> energy_histogram_data(const SparseNetwork& net,
                                             const std::vector<int>& nodes,
                                             const ScoringConfig& cfg, const ScoreNets& nets,
                                             const VpSde& sde, const EgoConfig& ego_cfg,
                                             std::uint64_t seed) {
  cfg.validate();
  std::vector<EnergyRow> rows;
  const std::vector<double> taus = reconstruction_levels(cfg.levels, sde.t_max);
  for (int v : nodes) {
    const DenseEgoGraph ego = scoring_ego(net, v, ego_cfg, seed);
    for (int i = 0; i < cfg.levels; ++i) {
      for (int j = 0; j < cfg.samples_per_level; ++j) {
        Rng rng = make_rng(seed, {stream::score, static_cast<std::uint64_t>(v),
                                  static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
        const double tau = taus[static_cast<std::size_t>(i)];
        const Reconstruction rec = reconstruct(ego, tau, nets, sde, cfg.solver, rng);
        const EnergyPair e = reconstruction_energies(ego, rec.x, rec.a, cfg.binarize_threshold);
        rows.push_back({v, tau, j, e.orig, e.recon, e.orig - e.recon});
      }
    }
  }
  return rows;
}

}  // namespace egodiff
