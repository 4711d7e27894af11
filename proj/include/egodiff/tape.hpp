#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "egodiff/errors.hpp"

namespace egodiff {

// Minimal reverse-mode autodiff over dense double matrices. Nodes are created
// in evaluation order on an explicit tape, so the backward pass is a single
// reverse sweep without topological sorting. One tape per loss evaluation;
// tapes are not shared across threads.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(Eigen::MatrixXd value);

  const Eigen::MatrixXd& val(Var v) const { return nodes_[v.id].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(loss)/d(loss) = 1 (loss must be 1x1) and accumulates gradients
  // into every node reachable backwards from it.
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- ops ---
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double c);
  Var add_row_bias(Var x, Var bias);  // bias: 1 x K, broadcast over rows
  Var elu(Var a);
  Var transpose(Var a);
  Var symmetrize_mean(Var a);  // (A + A^T) / 2
  Var zero_diagonal(Var a);
  Var mask_rows(Var a, const Eigen::VectorXd& mask);
  Var mask_rows_cols(Var a, const Eigen::VectorXd& mask);
  // k matrices of identical shape R x C -> (R*C) x k, column-major flatten.
  Var pack_channels(const std::vector<Var>& maps, int rows, int cols);
  Var unpack_channel(Var packed, int channel, int rows, int cols);
  Var sum_sq(Var a);                      // 1x1
  Var add_scalars(const std::vector<Var>& scalars);  // 1x1 sum

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&, const Eigen::MatrixXd&)> pull;  // empty for leaves
  };

  Var push(Eigen::MatrixXd value, std::function<void(Tape&, const Eigen::MatrixXd&)> pull);
  Eigen::MatrixXd& grad_ref(int id);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace egodiff
