#include "egodiff/ego.hpp"

#include <algorithm>
#include <deque>
#include <string>

namespace egodiff {

namespace {

// Assembles a DenseEgoGraph from a node set (center first, rest ascending by
// original index) by inducing edges from the undirected neighbor index.
DenseEgoGraph assemble(const SparseNetwork& net, int center_id, std::vector<int> others) {
  std::sort(others.begin(), others.end());
  DenseEgoGraph ego;
  ego.node_ids.reserve(others.size() + 1);
  ego.node_ids.push_back(center_id);
  for (int id : others) ego.node_ids.push_back(id);

  const int n = static_cast<int>(ego.node_ids.size());
  ego.center = 0;
  ego.mask = Eigen::VectorXd::Ones(n);
  ego.x.resize(n, net.num_features());
  for (int i = 0; i < n; ++i) ego.x.row(i) = net.features().row(ego.node_ids[i]);

  std::vector<int> slot_of(net.num_nodes(), -1);
  for (int i = 0; i < n; ++i) slot_of[ego.node_ids[i]] = i;

  ego.a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int nbr : net.neighbors(ego.node_ids[i])) {
      const int j = slot_of[nbr];
      if (j >= 0) {
        ego.a(i, j) = 1.0;
        ego.a(j, i) = 1.0;
      }
    }
  }
  ego.a.diagonal().setZero();
  return ego;
}

}  // namespace

DenseEgoGraph extract_ego(const SparseNetwork& net, int v, int k) {
  if (v < 0 || v >= net.num_nodes())
    throw ContractError("extract_ego: node " + std::to_string(v) + " out of range");
  if (k < 1) throw ContractError("extract_ego: hops must be >= 1");

  std::vector<int> dist(net.num_nodes(), -1);
  std::deque<int> frontier{v};
  dist[v] = 0;
  std::vector<int> others;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    if (dist[u] == k) continue;
    for (int nbr : net.neighbors(u)) {
      if (dist[nbr] < 0) {
        dist[nbr] = dist[u] + 1;
        others.push_back(nbr);
        frontier.push_back(nbr);
      }
    }
  }
  return assemble(net, v, std::move(others));
}

DenseEgoGraph truncate(const DenseEgoGraph& ego, int m, Rng& rng) {
  if (m < 1) throw ContractError("truncate: m must be >= 1");
  const int n = ego.n();
  if (n <= m) return ego;

  // Sample m-1 non-center slots uniformly without replacement.
  std::vector<int> pool;
  pool.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != ego.center) pool.push_back(i);
  const std::vector<int> picks = rng.sample_without_replacement(static_cast<int>(pool.size()),
                                                                m - 1);

  std::vector<int> keep{ego.center};
  for (int p : picks) keep.push_back(pool[p]);
  std::sort(keep.begin() + 1, keep.end(),
            [&](int a, int b) { return ego.node_ids[a] < ego.node_ids[b]; });

  DenseEgoGraph out;
  out.center = 0;
  out.mask = Eigen::VectorXd::Ones(m);
  out.node_ids.reserve(m);
  out.x.resize(m, ego.f());
  out.a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    out.node_ids.push_back(ego.node_ids[keep[i]]);
    out.x.row(i) = ego.x.row(keep[i]);
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out.a(i, j) = ego.a(keep[i], keep[j]);
  out.a.diagonal().setZero();
  return out;
}

EgoBatch build_batch(const std::vector<DenseEgoGraph>& egos) {
  if (egos.empty()) throw ContractError("build_batch: empty ego list");
  const int f = egos.front().f();
  int n_max = 0;
  for (const auto& e : egos) {
    if (e.f() != f) throw ContractError("build_batch: feature dimension mismatch");
    n_max = std::max(n_max, e.real_count());
  }

  EgoBatch batch;
  batch.n_max = n_max;
  for (const auto& e : egos) {
    const int n = e.n();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_max, f);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_max, n_max);
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(n_max);
    // compact real slots to a prefix; input egos may already carry padding
    std::vector<int> ids(n_max, -1);
    int slot = 0;
    int center_slot = 0;
    std::vector<int> src_slot;
    for (int i = 0; i < n; ++i) {
      if (e.mask(i) == 1.0) {
        x.row(slot) = e.x.row(i);
        ids[slot] = e.node_ids[i];
        mask(slot) = 1.0;
        if (i == e.center) center_slot = slot;
        src_slot.push_back(i);
        ++slot;
      }
    }
    for (int i = 0; i < slot; ++i)
      for (int j = 0; j < slot; ++j) a(i, j) = e.a(src_slot[i], src_slot[j]);

    batch.x.push_back(std::move(x));
    batch.a.push_back(std::move(a));
    batch.mask.push_back(std::move(mask));
    batch.centers.push_back(center_slot);
    batch.node_ids.push_back(std::move(ids));
  }
  return batch;
}

std::vector<DenseEgoGraph> unbatch(const EgoBatch& batch) {
  std::vector<DenseEgoGraph> egos;
  egos.reserve(batch.size());
  for (int b = 0; b < batch.size(); ++b) {
    const int real = static_cast<int>(batch.mask[b].sum() + 0.5);
    DenseEgoGraph e;
    e.x = batch.x[b].topRows(real);
    e.a = batch.a[b].topLeftCorner(real, real);
    e.mask = Eigen::VectorXd::Ones(real);
    e.center = batch.centers[b];
    e.node_ids.assign(batch.node_ids[b].begin(), batch.node_ids[b].begin() + real);
    egos.push_back(std::move(e));
  }
  return egos;
}

}  // namespace egodiff
