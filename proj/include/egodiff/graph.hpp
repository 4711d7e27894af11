#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "egodiff/errors.hpp"

namespace egodiff {

// Full attributed input graph. Immutable after construction; construction
// validates endpoints, rejects self-loops and duplicate edges, and builds an
// undirected neighbor index for ego extraction.
class SparseNetwork {
 public:
  SparseNetwork(int num_nodes, Eigen::MatrixXd features,
                std::vector<std::pair<int, int>> edges, bool directed,
                std::optional<std::vector<int>> labels = std::nullopt);

  int num_nodes() const { return num_nodes_; }
  int num_features() const { return static_cast<int>(features_.cols()); }
  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  bool directed() const { return directed_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  // Neighbors under the undirected view (sorted, deduplicated).
  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }

  SparseNetwork with_features(Eigen::MatrixXd features) const;

 private:
  int num_nodes_;
  Eigen::MatrixXd features_;
  std::vector<std::pair<int, int>> edges_;
  bool directed_;
  std::optional<std::vector<int>> labels_;
  std::vector<std::vector<int>> adjacency_;
};

// Small dense ego-graph: feature matrix x (N x F), adjacency a (N x N),
// 0/1 mask marking real (non-padding) slots, ego node at `center`,
// and the original network index of every slot.
struct DenseEgoGraph {
  Eigen::MatrixXd x;
  Eigen::MatrixXd a;
  Eigen::VectorXd mask;  // 1.0 = real node, 0.0 = padding
  int center = 0;
  std::vector<int> node_ids;

  int n() const { return static_cast<int>(x.rows()); }
  int f() const { return static_cast<int>(x.cols()); }
  int real_count() const { return static_cast<int>(mask.sum() + 0.5); }

  // Throws ContractError if any structural invariant is broken.
  void validate() const;
};

struct Laplacian {
  Eigen::MatrixXd l;
  Eigen::VectorXd deg;
};

// Elementwise max(a, a^T) with the diagonal cleared.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a);

// L = D^{+/2} (D - A) D^{+/2} with the degree pseudoinverse convention:
// isolated nodes give zero rows/columns. Input must be symmetric, binary,
// and zero on the diagonal.
Laplacian normalized_laplacian(const Eigen::MatrixXd& a, const Eigen::VectorXd& mask);

// Tr X^T L X; equals the edge-sum of squared differences of degree-scaled
// feature rows.
double dirichlet_energy(const Eigen::MatrixXd& x, const Laplacian& lap);

// Dirichlet energy divided by the squared feature norm over real rows.
// Bounded by the Laplacian spectral radius, hence by 2. Throws
// NormalizationError when the masked feature matrix is all zero.
double normalized_energy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a_binary,
                         const Eigen::VectorXd& mask);
double normalized_energy(const DenseEgoGraph& g);

}  // namespace egodiff
