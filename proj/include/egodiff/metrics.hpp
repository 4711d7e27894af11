#pragma once

#include <vector>

#include "egodiff/errors.hpp"

namespace egodiff {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = outlier

  void validate() const;
  int positives() const;
};

// Probability that a random positive outranks a random negative; ties get
// half credit (Mann-Whitney convention).
double roc_auc(const LabeledScores& ls);

// Step-sum AP over descending distinct score thresholds, no interpolation.
double average_precision(const LabeledScores& ls);

// Fraction of all positives found in the k highest scores; ties broken by
// ascending index. k = -1 uses the number of positives.
double recall_at_k(const LabeledScores& ls, int k = -1);

}  // namespace egodiff
