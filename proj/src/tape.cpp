#include "egodiff/tape.hpp"

#include <cmath>
#include <utility>

namespace egodiff {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::push(Eigen::MatrixXd value, std::function<void(Tape&, const Eigen::MatrixXd&)> pull) {
  Node node;
  node.value = std::move(value);
  node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Eigen::MatrixXd& Tape::grad_ref(int id) { return nodes_[id].grad; }

Var Tape::leaf(Eigen::MatrixXd value) { return push(std::move(value), nullptr); }

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.id >= size()) throw ContractError("backward: invalid loss var");
  Node& top = nodes_[loss.id];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ContractError("backward: loss must be 1x1");
  }
  top.grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    if (nodes_[i].pull && nodes_[i].grad.cwiseAbs().sum() != 0.0) {
      nodes_[i].pull(*this, nodes_[i].grad);
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  const Eigen::MatrixXd& av = val(a);
  const Eigen::MatrixXd& bv = val(b);
  if (av.cols() != bv.rows()) throw ContractError("matmul: inner dimension mismatch");
  Eigen::MatrixXd out = av * bv;
  return push(std::move(out), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id).noalias() += g * t.val(b).transpose();
    t.grad_ref(b.id).noalias() += t.val(a).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(val(a), val(b), "add");
  Eigen::MatrixXd out = val(a) + val(b);
  return push(std::move(out), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(val(a), val(b), "sub");
  Eigen::MatrixXd out = val(a) - val(b);
  return push(std::move(out), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) -= g;
  });
}

Var Tape::hadamard(Var a, Var b) {
  check_same_shape(val(a), val(b), "hadamard");
  Eigen::MatrixXd out = val(a).cwiseProduct(val(b));
  return push(std::move(out), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += g.cwiseProduct(t.val(b));
    t.grad_ref(b.id) += g.cwiseProduct(t.val(a));
  });
}

Var Tape::scale(Var a, double c) {
  Eigen::MatrixXd out = val(a) * c;
  return push(std::move(out), [a, c](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += g * c;
  });
}

Var Tape::add_row_bias(Var x, Var bias) {
  const Eigen::MatrixXd& xv = val(x);
  const Eigen::MatrixXd& bv = val(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ContractError("add_row_bias: bias must be 1 x cols(x)");
  }
  Eigen::MatrixXd out = xv.rowwise() + bv.row(0);
  return push(std::move(out), [x, bias](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(x.id) += g;
    t.grad_ref(bias.id).row(0) += g.colwise().sum();
  });
}

Var Tape::elu(Var a) {
  const Eigen::MatrixXd& av = val(a);
  Eigen::MatrixXd out = av.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  return push(std::move(out), [a](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& in = t.val(a);
    t.grad_ref(a.id) +=
        g.cwiseProduct(in.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }));
  });
}

Var Tape::transpose(Var a) {
  Eigen::MatrixXd out = val(a).transpose();
  return push(std::move(out), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += g.transpose();
  });
}

Var Tape::symmetrize_mean(Var a) {
  const Eigen::MatrixXd& av = val(a);
  if (av.rows() != av.cols()) throw ContractError("symmetrize_mean: matrix must be square");
  Eigen::MatrixXd out = 0.5 * (av + av.transpose());
  return push(std::move(out), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += 0.5 * (g + g.transpose());
  });
}

Var Tape::zero_diagonal(Var a) {
  const Eigen::MatrixXd& av = val(a);
  if (av.rows() != av.cols()) throw ContractError("zero_diagonal: matrix must be square");
  Eigen::MatrixXd out = av;
  out.diagonal().setZero();
  return push(std::move(out), [a](Tape& t, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd gd = g;
    gd.diagonal().setZero();
    t.grad_ref(a.id) += gd;
  });
}

Var Tape::mask_rows(Var a, const Eigen::VectorXd& mask) {
  const Eigen::MatrixXd& av = val(a);
  if (mask.size() != av.rows()) throw ContractError("mask_rows: mask length must equal rows");
  Eigen::MatrixXd out = mask.asDiagonal() * av;
  return push(std::move(out), [a, mask](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += mask.asDiagonal() * g;
  });
}

Var Tape::mask_rows_cols(Var a, const Eigen::VectorXd& mask) {
  const Eigen::MatrixXd& av = val(a);
  if (av.rows() != av.cols() || mask.size() != av.rows()) {
    throw ContractError("mask_rows_cols: square matrix and matching mask required");
  }
  Eigen::MatrixXd out = mask.asDiagonal() * av * mask.asDiagonal();
  return push(std::move(out), [a, mask](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += mask.asDiagonal() * g * mask.asDiagonal();
  });
}

Var Tape::pack_channels(const std::vector<Var>& maps, int rows, int cols) {
  if (maps.empty()) throw ContractError("pack_channels: need at least one map");
  const int k = static_cast<int>(maps.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows) * cols, k);
  for (int j = 0; j < k; ++j) {
    const Eigen::MatrixXd& m = val(maps[j]);
    if (m.rows() != rows || m.cols() != cols) throw ContractError("pack_channels: shape mismatch");
    out.col(j) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  }
  std::vector<Var> captured = maps;
  return push(std::move(out), [captured, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
    for (int j = 0; j < static_cast<int>(captured.size()); ++j) {
      t.grad_ref(captured[j].id) +=
          Eigen::Map<const Eigen::MatrixXd>(g.col(j).data(), rows, cols);
    }
  });
}

Var Tape::unpack_channel(Var packed, int channel, int rows, int cols) {
  const Eigen::MatrixXd& pv = val(packed);
  if (channel < 0 || channel >= pv.cols()) throw ContractError("unpack_channel: channel out of range");
  if (pv.rows() != static_cast<Eigen::Index>(rows) * cols) {
    throw ContractError("unpack_channel: rows*cols must equal packed row count");
  }
  Eigen::VectorXd col = pv.col(channel);
  Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(col.data(), rows, cols);
  return push(std::move(out), [packed, channel](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(packed.id).col(channel) += Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  });
}

Var Tape::sum_sq(Var a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(a).squaredNorm();
  return push(std::move(out), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.grad_ref(a.id) += 2.0 * g(0, 0) * t.val(a);
  });
}

Var Tape::add_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ContractError("add_scalars: need at least one term");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(1, 1);
  for (Var v : scalars) {
    const Eigen::MatrixXd& sv = val(v);
    if (sv.rows() != 1 || sv.cols() != 1) throw ContractError("add_scalars: terms must be 1x1");
    out(0, 0) += sv(0, 0);
  }
  std::vector<Var> captured = scalars;
  return push(std::move(out), [captured](Tape& t, const Eigen::MatrixXd& g) {
    for (Var v : captured) t.grad_ref(v.id) += g;
  });
}

}  // namespace egodiff
