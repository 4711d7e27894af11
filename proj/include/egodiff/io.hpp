#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egodiff/graph.hpp"
#include "egodiff/metrics.hpp"
#include "egodiff/scorer.hpp"

namespace egodiff {

// Graph bundle directory: meta.json, edges.tsv, features.tsv, labels.tsv
// (optional). Values print with 17 significant digits so round-trips are
// lossless.
SparseNetwork load_bundle(const std::string& dir);
void save_bundle(const SparseNetwork& net, const std::string& dir, const std::string& name);

struct SynthConfig {
  int num_nodes = 500;
  int num_features = 8;
  int blocks = 4;
  double p_in = 0.08;
  double p_out = 0.01;
  double contextual_fraction = 0.025;
  double structural_fraction = 0.025;
  int clique_size = 8;
  double feature_shift = 6.0;  // in feature standard deviations
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  void validate() const;
};

// SBM backbone with per-block Gaussian features; contextual anomalies get a
// feature shift of feature_shift (guaranteed > feature_shift/2 from the block
// mean), structural anomalies are wired into planted cliques. The two planted
// sets are disjoint and their union is the label set.
SparseNetwork generate_synthetic(const SynthConfig& cfg);

// Shortest representation that parses back to the same double.
std::string format_g17(double v);

void write_scores_csv(const std::string& path, const ScoreReport& report,
                      const std::optional<std::vector<int>>& labels);
void write_breakdown_csv(const std::string& path, const ScoreReport& report);
void write_loss_csv(const std::string& path, const std::vector<std::array<double, 2>>& curve);
void write_profile_csv(const std::string& path, const std::vector<ProfileRow>& rows);
void write_energy_csv(const std::string& path, const std::vector<EnergyRow>& rows);

struct MetricRow {
  std::string trial;  // trial index or one of mean/std/max
  std::string metric;
  double value = 0.0;
};
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

struct ScoresFile {
  std::vector<int> node_ids;
  std::vector<double> scores;
  std::optional<std::vector<int>> labels;
};
ScoresFile read_scores_csv(const std::string& path);

}  // namespace egodiff
