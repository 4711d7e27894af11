#include "egodiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace egodiff {

void LabeledScores::validate() const {
  if (scores.size() != labels.size()) throw DataError("LabeledScores: length mismatch");
  if (scores.empty()) throw DataError("LabeledScores: empty input");
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("LabeledScores: non-finite score");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("LabeledScores: labels must be 0 or 1");
  }
}

int LabeledScores::positives() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), 1));
}

double roc_auc(const LabeledScores& ls) {
  ls.validate();
  const std::size_t n = ls.scores.size();
  const int pos = ls.positives();
  const int neg = static_cast<int>(n) - pos;
  if (pos == 0 || neg == 0) throw DataError("roc_auc: need both classes present");

  // Rank-sum with average ranks on tied groups.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ls.scores[a] < ls.scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && ls.scores[order[j]] == ls.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (ls.labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * pos * (pos + 1.0);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const LabeledScores& ls) {
  ls.validate();
  const int total_pos = ls.positives();
  if (total_pos == 0) throw DataError("average_precision: no positive labels");

  const std::size_t n = ls.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ls.scores[a] > ls.scores[b]; });

  double ap = 0.0;
  double recall_prev = 0.0;
  int tp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && ls.scores[order[j]] == ls.scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) tp += ls.labels[order[k]];
    const double precision = static_cast<double>(tp) / static_cast<double>(j);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
    i = j;
  }
  return ap;
}

double recall_at_k(const LabeledScores& ls, int k) {
  ls.validate();
  const int total_pos = ls.positives();
  if (total_pos == 0) throw DataError("recall_at_k: no positive labels");
  if (k == -1) k = total_pos;
  const int n = static_cast<int>(ls.scores.size());
  if (k < 1 || k > n) {
    throw ContractError("recall_at_k: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = ls.scores[static_cast<std::size_t>(a)];
    const double sb = ls.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  int hits = 0;
  for (int i = 0; i < k; ++i) hits += ls.labels[static_cast<std::size_t>(order[i])];
  return static_cast<double>(hits) / static_cast<double>(total_pos);
}

}  // namespace egodiff
