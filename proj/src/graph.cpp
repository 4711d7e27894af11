#include "egodiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace egodiff {

namespace {
constexpr double kDegreeZeroThreshold = 1e-12;
}

SparseNetwork::SparseNetwork(int num_nodes, Eigen::MatrixXd features,
                             std::vector<std::pair<int, int>> edges, bool directed,
                             std::optional<std::vector<int>> labels)
    : num_nodes_(num_nodes),
      features_(std::move(features)),
      edges_(std::move(edges)),
      directed_(directed),
      labels_(std::move(labels)) {
  if (num_nodes_ < 0) throw ContractError("SparseNetwork: negative node count");
  if (features_.rows() != num_nodes_)
    throw ContractError("SparseNetwork: feature rows (" + std::to_string(features_.rows()) +
                        ") != num_nodes (" + std::to_string(num_nodes_) + ")");
  if (labels_ && static_cast<int>(labels_->size()) != num_nodes_)
    throw ContractError("SparseNetwork: label count != num_nodes");

  std::set<std::pair<int, int>> seen;
  for (const auto& [s, d] : edges_) {
    if (s < 0 || s >= num_nodes_ || d < 0 || d >= num_nodes_)
      throw ContractError("SparseNetwork: edge endpoint out of range: (" + std::to_string(s) +
                          ", " + std::to_string(d) + ")");
    if (s == d) throw ContractError("SparseNetwork: self-loop at node " + std::to_string(s));
    const auto canon = directed_ ? std::make_pair(s, d) : std::make_pair(std::min(s, d), std::max(s, d));
    if (!seen.insert(canon).second)
      throw ContractError("SparseNetwork: duplicate edge (" + std::to_string(s) + ", " +
                          std::to_string(d) + ")");
  }

  adjacency_.assign(num_nodes_, {});
  for (const auto& [s, d] : edges_) {
    adjacency_[s].push_back(d);
    adjacency_[d].push_back(s);
  }
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
}

SparseNetwork SparseNetwork::with_features(Eigen::MatrixXd features) const {
  return SparseNetwork(num_nodes_, std::move(features), edges_, directed_, labels_);
}

void DenseEgoGraph::validate() const {
  const int nn = n();
  if (a.rows() != nn || a.cols() != nn) throw ContractError("DenseEgoGraph: a is not N x N");
  if (mask.size() != nn) throw ContractError("DenseEgoGraph: mask length != N");
  if (static_cast<int>(node_ids.size()) != nn)
    throw ContractError("DenseEgoGraph: node_ids length != N");
  if (center < 0 || center >= nn || mask(center) != 1.0)
    throw ContractError("DenseEgoGraph: center slot is not a real node");
  for (int i = 0; i < nn; ++i) {
    if (mask(i) != 0.0 && mask(i) != 1.0) throw ContractError("DenseEgoGraph: mask not 0/1");
    if (a(i, i) != 0.0) throw ContractError("DenseEgoGraph: nonzero diagonal");
    for (int j = 0; j < nn; ++j) {
      if (a(i, j) != a(j, i)) throw ContractError("DenseEgoGraph: adjacency not symmetric");
      if ((mask(i) == 0.0 || mask(j) == 0.0) && a(i, j) != 0.0)
        throw ContractError("DenseEgoGraph: nonzero adjacency at padded slot");
    }
    if (mask(i) == 0.0 && x.row(i).cwiseAbs().sum() != 0.0)
      throw ContractError("DenseEgoGraph: nonzero features at padded slot");
  }
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out = a.cwiseMax(a.transpose());
  out.diagonal().setZero();
  return out;
}

Laplacian normalized_laplacian(const Eigen::MatrixXd& a, const Eigen::VectorXd& mask) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw ContractError("normalized_laplacian: adjacency not square");
  if (mask.size() != n) throw ContractError("normalized_laplacian: mask length mismatch");
  for (int i = 0; i < n; ++i) {
    if (a(i, i) != 0.0) throw ContractError("normalized_laplacian: nonzero diagonal");
    for (int j = 0; j < n; ++j) {
      if (a(i, j) != a(j, i)) throw ContractError("normalized_laplacian: input not symmetric");
      if (a(i, j) != 0.0 && a(i, j) != 1.0)
        throw ContractError("normalized_laplacian: input not binary");
      if ((mask(i) == 0.0 || mask(j) == 0.0) && a(i, j) != 0.0)
        throw ContractError("normalized_laplacian: edge at padded slot");
    }
  }

  Laplacian lap;
  lap.deg = a.rowwise().sum();
  Eigen::VectorXd dinv_sqrt(n);
  for (int i = 0; i < n; ++i)
    dinv_sqrt(i) = lap.deg(i) < kDegreeZeroThreshold ? 0.0 : 1.0 / std::sqrt(lap.deg(i));

  lap.l = -(dinv_sqrt.asDiagonal() * a * dinv_sqrt.asDiagonal());
  for (int i = 0; i < n; ++i)
    lap.l(i, i) = lap.deg(i) < kDegreeZeroThreshold ? 0.0 : 1.0;
  return lap;
}

double dirichlet_energy(const Eigen::MatrixXd& x, const Laplacian& lap) {
  if (x.rows() != lap.l.rows()) throw ContractError("dirichlet_energy: shape mismatch");
  const double e = (lap.l * x).cwiseProduct(x).sum();
  return e < 0.0 ? 0.0 : e;  // trim eigensolver-free rounding below zero
}

double normalized_energy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a_binary,
                         const Eigen::VectorXd& mask) {
  if (x.rows() != a_binary.rows()) throw ContractError("normalized_energy: shape mismatch");
  const Eigen::MatrixXd xm = mask.asDiagonal() * x;
  const double norm_sq = xm.squaredNorm();
  if (norm_sq == 0.0)
    throw NormalizationError("normalized_energy: all-zero feature matrix");
  const Laplacian lap = normalized_laplacian(a_binary, mask);
  const double ratio = dirichlet_energy(xm, lap) / norm_sq;
  return std::clamp(ratio, 0.0, 2.0);
}

double normalized_energy(const DenseEgoGraph& g) {
  return normalized_energy(g.x, g.a, g.mask);
}

}  // namespace egodiff
