#pragma once

#include <Eigen/Dense>
#include <vector>

#include "egodiff/ego.hpp"
#include "egodiff/graph.hpp"
#include "egodiff/rng.hpp"

namespace testutil {

// Random symmetric zero-diagonal 0/1 adjacency with each edge present w.p. p.
inline Eigen::MatrixXd random_adjacency(int n, double p, egodiff::Rng& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.u01() < p) a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

inline egodiff::DenseEgoGraph random_ego(int n, int f, egodiff::Rng& rng, double edge_p = 0.5) {
  egodiff::DenseEgoGraph g;
  g.x = Eigen::MatrixXd::NullaryExpr(n, f, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  g.a = random_adjacency(n, edge_p, rng);
  g.mask = Eigen::VectorXd::Ones(n);
  g.center = 0;
  g.node_ids.resize(n);
  for (int i = 0; i < n; ++i) g.node_ids[i] = i;
  return g;
}

// Appends zeroed padding slots; real slots keep their contents.
inline egodiff::DenseEgoGraph pad_ego(const egodiff::DenseEgoGraph& g, int extra) {
  const int n = g.n();
  const int m = n + extra;
  egodiff::DenseEgoGraph out;
  out.x = Eigen::MatrixXd::Zero(m, g.f());
  out.x.topRows(n) = g.x;
  out.a = Eigen::MatrixXd::Zero(m, m);
  out.a.topLeftCorner(n, n) = g.a;
  out.mask = Eigen::VectorXd::Zero(m);
  out.mask.head(n) = g.mask;
  out.center = g.center;
  out.node_ids = g.node_ids;
  out.node_ids.resize(m, -1);
  return out;
}

// Permutes a DenseEgoGraph by perm (new slot i holds old node perm[i]).
inline egodiff::DenseEgoGraph permute_ego(const egodiff::DenseEgoGraph& g,
                                          const std::vector<int>& perm) {
  const int n = g.n();
  egodiff::DenseEgoGraph out;
  out.x = Eigen::MatrixXd::Zero(n, g.f());
  out.a = Eigen::MatrixXd::Zero(n, n);
  out.mask = Eigen::VectorXd::Zero(n);
  out.node_ids.resize(n);
  for (int i = 0; i < n; ++i) {
    out.x.row(i) = g.x.row(perm[i]);
    out.mask(i) = g.mask(perm[i]);
    out.node_ids[i] = g.node_ids[perm[i]];
    for (int j = 0; j < n; ++j) out.a(i, j) = g.a(perm[i], perm[j]);
    if (perm[i] == g.center) out.center = i;
  }
  return out;
}

inline std::vector<int> random_permutation(int n, egodiff::Rng& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm;
}

// P3 path 0-1-2 with unit features unless overridden.
inline egodiff::SparseNetwork path3() {
  Eigen::MatrixXd x(3, 1);
  x << 1.0, 0.0, 1.0;
  return egodiff::SparseNetwork(3, x, {{0, 1}, {1, 2}}, false);
}

inline egodiff::SparseNetwork star(int leaves) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= leaves; ++i) edges.emplace_back(0, i);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(leaves + 1, 1);
  return egodiff::SparseNetwork(leaves + 1, x, edges, false);
}

}  // namespace testutil
