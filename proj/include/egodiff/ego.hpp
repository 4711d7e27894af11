#pragma once

#include <vector>

#include "egodiff/graph.hpp"
#include "egodiff/rng.hpp"

namespace egodiff {

struct EgoConfig {
  int hops = 1;       // k
  int max_nodes = 32; // M, hub truncation cap

  void validate() const {
    if (hops < 1) throw ContractError("EgoConfig: hops must be >= 1");
    if (max_nodes < 2) throw ContractError("EgoConfig: max_nodes must be >= 2");
  }
};

// Padded mini-batch of ego-graphs. Slice i is a DenseEgoGraph padded to the
// batch-wide n_max; per-slice invariants hold for every slice.
struct EgoBatch {
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::VectorXd> mask;
  std::vector<int> centers;
  std::vector<std::vector<int>> node_ids;
  int n_max = 0;

  int size() const { return static_cast<int>(x.size()); }
};

// Induced subgraph of the BFS ball of radius k around v, edges traversed
// ignoring direction. Canonical slot order: center first, then remaining
// nodes ascending by original index.
DenseEgoGraph extract_ego(const SparseNetwork& net, int v, int k);

// Identity when the ego-graph has at most m nodes; otherwise keeps the center
// plus m-1 uniformly subsampled non-center nodes and re-induces the edges.
DenseEgoGraph truncate(const DenseEgoGraph& ego, int m, Rng& rng);

EgoBatch build_batch(const std::vector<DenseEgoGraph>& egos);
std::vector<DenseEgoGraph> unbatch(const EgoBatch& batch);

}  // namespace egodiff
