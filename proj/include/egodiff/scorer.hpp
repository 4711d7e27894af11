#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egodiff/ego.hpp"
#include "egodiff/model.hpp"
#include "egodiff/solver.hpp"

namespace egodiff {

enum class Penalty { Snr, SqrtSnr, None };
enum class Dissimilarity { Matrix, Energy };

Penalty parse_penalty(const std::string& name);
Dissimilarity parse_dissimilarity(const std::string& name);
std::string penalty_name(Penalty p);
std::string dissimilarity_name(Dissimilarity d);

struct ScoringConfig {
  int levels = 4;             // K
  int samples_per_level = 3;  // S
  double alpha = 0.5;         // feature weight of the matrix dissimilarity
  Penalty penalty = Penalty::Snr;
  Dissimilarity dissimilarity = Dissimilarity::Matrix;
  SolverConfig solver;
  double binarize_threshold = 0.5;

  void validate() const;
};

// Interior grid tau_i = i * T / (K + 1), i = 1..K; excludes both endpoints.
std::vector<double> reconstruction_levels(int k, double t_max);

double penalty_weight(Penalty p, double tau, const VpSde& sde);

struct Reconstruction {
  Eigen::MatrixXd x;
  Eigen::MatrixXd a;  // continuous values; binarized only for energies
};

// Corrupt to time tau through the closed-form transition kernel, then
// integrate the reverse system back to 0.
Reconstruction reconstruct(const DenseEgoGraph& ego, double tau, const ScoreNets& nets,
                           const VpSde& sde, const SolverConfig& solver, Rng& rng);

// (1-alpha) |A - A_hat|_F / N^2 + alpha |X - X_hat|_F / (N F), real slots only.
double matrix_distance(const DenseEgoGraph& g, const Eigen::MatrixXd& x_hat,
                       const Eigen::MatrixXd& a_hat, double alpha);

struct EnergyPair {
  double orig = 0.0;
  double recon = 0.0;
  bool degenerate_orig = false;   // all-zero features, energy pinned to 0
  bool degenerate_recon = false;
};

EnergyPair reconstruction_energies(const DenseEgoGraph& g, const Eigen::MatrixXd& x_hat,
                                   const Eigen::MatrixXd& a_hat, double binarize_threshold);

double energy_shift(const EnergyPair& e);

struct BreakdownRow {
  int node_id = 0;
  double tau = 0.0;
  int sample = 0;
  double dissimilarity = 0.0;
  double energy_orig = 0.0;
  double energy_recon = 0.0;
  bool degenerate = false;
};

struct ScoreReport {
  std::vector<int> node_ids;
  std::vector<double> scores;
  std::vector<int> ranking;  // node ids by descending score, ties by ascending id
  std::vector<BreakdownRow> breakdown;
  int degenerate_count = 0;
};

// Score of one node: sum_i sum_j gamma(tau_i) * d(G(v), G_hat^(j)(v, tau_i)).
// Each (node, level, sample) triple consumes its own rng stream derived from
// (seed, node, i, j), so scores are order-independent and reproducible.
double node_score(const SparseNetwork& net, int v, const ScoringConfig& cfg, const ScoreNets& nets,
                  const VpSde& sde, const EgoConfig& ego_cfg, std::uint64_t seed,
                  std::vector<BreakdownRow>* breakdown = nullptr);

ScoreReport score_all(const SparseNetwork& net, const ScoringConfig& cfg, const ScoreNets& nets,
                      const VpSde& sde, const EgoConfig& ego_cfg, std::uint64_t seed);

struct ProfileRow {
  std::string solver;
  double tau = 0.0;
  double error_x = 0.0;
  double error_a = 0.0;
};

// Mean reconstruction errors |X_hat - X|_F / (N F) and |A_hat - A|_F / N^2
// over the sampled nodes, for every (solver kind, tau) pair.
std::vector<ProfileRow> solver_error_profile(const SparseNetwork& net,
                                             const std::vector<int>& nodes,
                                             const std::vector<SolverKind>& kinds,
                                             const std::vector<double>& taus,
                                             const ScoringConfig& cfg, const ScoreNets& nets,
                                             const VpSde& sde, const EgoConfig& ego_cfg,
                                             std::uint64_t seed);

struct EnergyRow {
  int node_id = 0;
  double tau = 0.0;
  int sample = 0;
  double energy_orig = 0.0;
  double energy_recon = 0.0;
  double energy_diff = 0.0;  // original minus reconstructed
};

std::vector<EnergyRow> energy_histogram_data(const SparseNetwork& net,
                                             const std::vector<int>& nodes,
                                             const ScoringConfig& cfg, const ScoreNets& nets,
                                             const VpSde& sde, const EgoConfig& ego_cfg,
                                             std::uint64_t seed);

}  // namespace egodiff
