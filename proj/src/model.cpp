#include "egodiff/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace egodiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
  if (hidden_dim < 1) throw ContractError("ModelConfig: hidden_dim must be >= 1");
  if (gmh_heads < 1) throw ContractError("ModelConfig: gmh_heads must be >= 1");
  if (gmh_out_channels < 1) throw ContractError("ModelConfig: gmh_out_channels must be >= 1");
  if (adjacency_powers < 1) throw ContractError("ModelConfig: adjacency_powers must be >= 1");
  if (hidden_dim % gmh_heads != 0) {
    throw ContractError("ModelConfig: gmh_heads must divide hidden_dim");
  }
}

void ParamStore::add(const std::string& name, Eigen::MatrixXd value) {
  if (values_.count(name)) throw ContractError("ParamStore: duplicate parameter " + name);
  names_.push_back(name);
  values_.emplace(name, std::move(value));
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("ParamStore: unknown parameter " + name);
  return it->second;
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("ParamStore: unknown parameter " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) > 0; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += static_cast<std::size_t>(at(name).size());
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& name : names_) {
    if (!at(name).allFinite()) return false;
  }
  return true;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& name : names_) {
    const Eigen::MatrixXd& v = at(name);
    out.add(name, Eigen::MatrixXd::Zero(v.rows(), v.cols()));
  }
  return out;
}

namespace {

// Row-major fill keeps the draw order independent of Eigen's storage layout.
Eigen::MatrixXd uniform_weight(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  }
  return w;
}

Eigen::MatrixXd elu_mat(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

void require_finite(const Eigen::MatrixXd& m, const char* net, const char* layer) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(net) + ": non-finite activations after " + layer);
  }
}

// k maps of shape N x N flattened column-major into an (N*N) x k matrix, so
// per-pair channel mixing is a plain matmul on the channel axis.
Eigen::MatrixXd pack_maps(const std::vector<Eigen::MatrixXd>& maps) {
  const Eigen::Index cells = maps.front().size();
  Eigen::MatrixXd packed(cells, static_cast<Eigen::Index>(maps.size()));
  for (std::size_t j = 0; j < maps.size(); ++j) {
    packed.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(maps[j].data(), cells);
  }
  return packed;
}

Eigen::MatrixXd unpack_map(const Eigen::MatrixXd& packed, Eigen::Index channel, Eigen::Index n) {
  Eigen::VectorXd col = packed.col(channel);
  return Eigen::Map<const Eigen::MatrixXd>(col.data(), n, n);
}

}  // namespace

ParamStore init_theta_params(const ModelConfig& cfg, int num_features, Rng& rng) {
  cfg.validate();
  if (num_features < 1) throw ContractError("init_theta_params: num_features must be >= 1");
  const int f = num_features;
  const int h = cfg.hidden_dim;
  ParamStore p;
  p.add("gcn.w1", uniform_weight(f, h, rng));
  p.add("gcn.w2", uniform_weight(f, h, rng));
  p.add("gcn.b", Eigen::MatrixXd::Zero(1, h));
  p.add("mlp.w1", uniform_weight(h, h, rng));
  p.add("mlp.b1", Eigen::MatrixXd::Zero(1, h));
  p.add("mlp.w2", uniform_weight(h, h, rng));
  p.add("mlp.b2", Eigen::MatrixXd::Zero(1, h));
  p.add("mlp.w3", uniform_weight(h, f, rng));
  p.add("mlp.b3", Eigen::MatrixXd::Zero(1, f));
  return p;
}

ParamStore init_phi_params(const ModelConfig& cfg, int num_features, Rng& rng) {
  cfg.validate();
  if (num_features < 1) throw ContractError("init_phi_params: num_features must be >= 1");
  const int f = num_features;
  const int h = cfg.hidden_dim;
  const int cin = cfg.gmh_in_channels();
  const int cout = cfg.gmh_out_channels;
  ParamStore p;
  p.add("gmh.wq", uniform_weight(f, h, rng));
  p.add("gmh.wk", uniform_weight(f, h, rng));
  p.add("gmh.wv", uniform_weight(f, h, rng));
  p.add("gmh.bv", Eigen::MatrixXd::Zero(1, h));
  p.add("gmh.inner.w1", uniform_weight(cin, cin, rng));
  p.add("gmh.inner.b1", Eigen::MatrixXd::Zero(1, cin));
  p.add("gmh.inner.w2", uniform_weight(cin, cout, rng));
  p.add("gmh.inner.b2", Eigen::MatrixXd::Zero(1, cout));
  p.add("head.w1", uniform_weight(cout, h, rng));
  p.add("head.b1", Eigen::MatrixXd::Zero(1, h));
  p.add("head.w2", uniform_weight(h, h, rng));
  p.add("head.b2", Eigen::MatrixXd::Zero(1, h));
  p.add("head.w3", uniform_weight(h, 1, rng));
  p.add("head.b3", Eigen::MatrixXd::Zero(1, 1));
  return p;
}

ScoreNets init_params(const ModelConfig& cfg, int num_features, Rng& rng) {
  ScoreNets nets;
  nets.config = cfg;
  nets.num_features = num_features;
  nets.theta = init_theta_params(cfg, num_features, rng);
  nets.phi = init_phi_params(cfg, num_features, rng);
  return nets;
}

std::vector<Eigen::MatrixXd> adjacency_channels(const Eigen::MatrixXd& a, int powers) {
  if (powers < 1) throw ContractError("adjacency_channels: powers must be >= 1");
  std::vector<Eigen::MatrixXd> ch;
  ch.reserve(static_cast<std::size_t>(powers));
  ch.push_back(a);
  for (int p = 1; p < powers; ++p) ch.push_back(ch.back() * a);
  return ch;
}

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                          const Eigen::MatrixXd& b, const Eigen::VectorXd& mask) {
  if (a.rows() != a.cols() || a.rows() != x.rows()) throw ContractError("gcn_layer: shape mismatch");
  if (w1.rows() != x.cols() || w2.rows() != x.cols() || w1.cols() != w2.cols()) {
    throw ContractError("gcn_layer: weight shape mismatch");
  }
  if (b.rows() != 1 || b.cols() != w1.cols()) throw ContractError("gcn_layer: bias shape mismatch");
  if (mask.size() != x.rows()) throw ContractError("gcn_layer: mask length mismatch");
  Eigen::MatrixXd pre = (a * x + x) * w1 + x * w2;
  pre.rowwise() += b.row(0);
  return mask.asDiagonal() * elu_mat(pre);
}

GmhOutput gmh_layer(const Eigen::MatrixXd& x, const std::vector<Eigen::MatrixXd>& adj_channels,
                    const ParamStore& phi, const ModelConfig& cfg, const Eigen::VectorXd& mask) {
  cfg.validate();
  if (static_cast<int>(adj_channels.size()) != cfg.adjacency_powers) {
    throw ContractError("gmh_layer: expected " + std::to_string(cfg.adjacency_powers) +
                        " adjacency channels, got " + std::to_string(adj_channels.size()));
  }
  const Eigen::Index n = x.rows();
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::MatrixXd& wq = phi.at("gmh.wq");
  const Eigen::MatrixXd& wk = phi.at("gmh.wk");

  std::vector<Eigen::MatrixXd> maps;
  maps.reserve(static_cast<std::size_t>(cfg.gmh_in_channels()));
  for (int h = 0; h < cfg.gmh_heads; ++h) {
    Eigen::MatrixXd q = x * wq.middleCols(h * dh, dh);
    Eigen::MatrixXd k = x * wk.middleCols(h * dh, dh);
    Eigen::MatrixXd logits = q * k.transpose() * scale;
    Eigen::MatrixXd e = 0.5 * (logits + logits.transpose());
    for (const Eigen::MatrixXd& ac : adj_channels) {
      maps.push_back(e);
      maps.push_back(ac.cwiseProduct(e));
    }
  }
  require_finite(maps.back(), "gmh_layer", "pairwise logits");

  Eigen::MatrixXd packed = pack_maps(maps);
  Eigen::MatrixXd inner = elu_mat((packed * phi.at("gmh.inner.w1")).rowwise() +
                                  phi.at("gmh.inner.b1").row(0));
  Eigen::MatrixXd mixed = (inner * phi.at("gmh.inner.w2")).rowwise() +
                          phi.at("gmh.inner.b2").row(0);
  require_finite(mixed, "gmh_layer", "inner mlp");

  GmhOutput out;
  out.attn.reserve(static_cast<std::size_t>(cfg.gmh_out_channels));
  Eigen::MatrixXd attn_sum = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < cfg.gmh_out_channels; ++c) {
    Eigen::MatrixXd ch = mask.asDiagonal() * unpack_map(mixed, c, n) * mask.asDiagonal();
    attn_sum += ch;
    out.attn.push_back(std::move(ch));
  }
  Eigen::MatrixXd xv = (attn_sum * x) * phi.at("gmh.wv");
  xv.rowwise() += phi.at("gmh.bv").row(0);
  out.x_out = mask.asDiagonal() * elu_mat(xv);
  require_finite(out.x_out, "gmh_layer", "value path");
  return out;
}

Eigen::MatrixXd predict_eps_x(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& mask, const ParamStore& theta,
                              const ModelConfig& cfg) {
  cfg.validate();
  Eigen::MatrixXd h0 =
      gcn_layer(x, a, theta.at("gcn.w1"), theta.at("gcn.w2"), theta.at("gcn.b"), mask);
  require_finite(h0, "score_x", "gcn");
  Eigen::MatrixXd h1 = elu_mat((h0 * theta.at("mlp.w1")).rowwise() + theta.at("mlp.b1").row(0));
  require_finite(h1, "score_x", "mlp layer 1");
  Eigen::MatrixXd h2 = elu_mat((h1 * theta.at("mlp.w2")).rowwise() + theta.at("mlp.b2").row(0));
  require_finite(h2, "score_x", "mlp layer 2");
  Eigen::MatrixXd out = (h2 * theta.at("mlp.w3")).rowwise() + theta.at("mlp.b3").row(0);
  require_finite(out, "score_x", "mlp layer 3");
  return mask.asDiagonal() * out;
}

Eigen::MatrixXd predict_eps_a(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& mask, const ParamStore& phi,
                              const ModelConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x.rows();
  GmhOutput gmh = gmh_layer(x, adjacency_channels(a, cfg.adjacency_powers), phi, cfg, mask);
  Eigen::MatrixXd packed = pack_maps(gmh.attn);
  Eigen::MatrixXd h1 = elu_mat((packed * phi.at("head.w1")).rowwise() + phi.at("head.b1").row(0));
  require_finite(h1, "score_a", "head layer 1");
  Eigen::MatrixXd h2 = elu_mat((h1 * phi.at("head.w2")).rowwise() + phi.at("head.b2").row(0));
  require_finite(h2, "score_a", "head layer 2");
  Eigen::MatrixXd flat = (h2 * phi.at("head.w3")).rowwise() + phi.at("head.b3").row(0);
  require_finite(flat, "score_a", "head layer 3");
  Eigen::MatrixXd s = unpack_map(flat, 0, n);
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  sym.diagonal().setZero();
  return mask.asDiagonal() * sym * mask.asDiagonal();
}

namespace {

double checked_sigma(double t, const VpSde& sde, const char* who) {
  if (t < sde.t_eps || t > sde.t_max) {
    throw ContractError(std::string(who) + ": t outside [t_eps, t_max]");
  }
  return sde.moments(t).second;
}

}  // namespace

Eigen::MatrixXd score_x_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                                const Eigen::VectorXd& mask, double t, const ParamStore& theta,
                                const ModelConfig& cfg, const VpSde& sde) {
  const double sigma = checked_sigma(t, sde, "score_x_forward");
  return predict_eps_x(x, a, mask, theta, cfg) * (-1.0 / sigma);
}

Eigen::MatrixXd score_a_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a,
                                const Eigen::VectorXd& mask, double t, const ParamStore& phi,
                                const ModelConfig& cfg, const VpSde& sde) {
  const double sigma = checked_sigma(t, sde, "score_a_forward");
  return predict_eps_a(x, a, mask, phi, cfg) * (-1.0 / sigma);
}

TapeParams register_params(Tape& tape, const ParamStore& store) {
  TapeParams tp;
  for (const auto& name : store.names()) tp.vars.emplace(name, tape.leaf(store.at(name)));
  return tp;
}

Var tape_eps_x(Tape& tape, Var x, Var a, const Eigen::VectorXd& mask, const TapeParams& theta,
               const ModelConfig& cfg) {
  auto p = [&](const char* name) { return theta.vars.at(name); };
  Var agg = tape.add(tape.matmul(a, x), x);  // (A + I) X
  Var pre = tape.add(tape.matmul(agg, p("gcn.w1")), tape.matmul(x, p("gcn.w2")));
  Var h0 = tape.mask_rows(tape.elu(tape.add_row_bias(pre, p("gcn.b"))), mask);
  Var h1 = tape.elu(tape.add_row_bias(tape.matmul(h0, p("mlp.w1")), p("mlp.b1")));
  Var h2 = tape.elu(tape.add_row_bias(tape.matmul(h1, p("mlp.w2")), p("mlp.b2")));
  Var out = tape.add_row_bias(tape.matmul(h2, p("mlp.w3")), p("mlp.b3"));
  return tape.mask_rows(out, mask);
}

Var tape_eps_a(Tape& tape, Var x, Var a, const Eigen::VectorXd& mask, const TapeParams& phi,
               const ModelConfig& cfg) {
  auto p = [&](const char* name) { return phi.vars.at(name); };
  const int n = static_cast<int>(tape.val(x).rows());
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Var> adj_channels;
  adj_channels.push_back(a);
  for (int c = 1; c < cfg.adjacency_powers; ++c) {
    adj_channels.push_back(tape.matmul(adj_channels.back(), a));
  }

  // Head projections slice columns of wq/wk; the slices are realized as
  // constant selector matrices so the tape stays a pure matrix program.
  std::vector<Var> maps;
  for (int h = 0; h < cfg.gmh_heads; ++h) {
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(cfg.hidden_dim, dh);
    for (int j = 0; j < dh; ++j) sel(h * dh + j, j) = 1.0;
    Var sel_v = tape.leaf(sel);
    Var q = tape.matmul(x, tape.matmul(p("gmh.wq"), sel_v));
    Var k = tape.matmul(x, tape.matmul(p("gmh.wk"), sel_v));
    Var e = tape.symmetrize_mean(tape.scale(tape.matmul(q, tape.transpose(k)), scale));
    for (Var ac : adj_channels) {
      maps.push_back(e);
      maps.push_back(tape.hadamard(ac, e));
    }
  }

  Var packed = tape.pack_channels(maps, n, n);
  Var inner = tape.elu(tape.add_row_bias(tape.matmul(packed, p("gmh.inner.w1")), p("gmh.inner.b1")));
  Var mixed = tape.add_row_bias(tape.matmul(inner, p("gmh.inner.w2")), p("gmh.inner.b2"));

  std::vector<Var> attn;
  for (int c = 0; c < cfg.gmh_out_channels; ++c) {
    attn.push_back(tape.mask_rows_cols(tape.unpack_channel(mixed, c, n, n), mask));
  }

  Var attn_packed = tape.pack_channels(attn, n, n);
  Var h1 = tape.elu(tape.add_row_bias(tape.matmul(attn_packed, p("head.w1")), p("head.b1")));
  Var h2 = tape.elu(tape.add_row_bias(tape.matmul(h1, p("head.w2")), p("head.b2")));
  Var flat = tape.add_row_bias(tape.matmul(h2, p("head.w3")), p("head.b3"));
  Var s = tape.unpack_channel(flat, 0, n, n);
  return tape.mask_rows_cols(tape.zero_diagonal(tape.symmetrize_mean(s)), mask);
}

DsmDraws make_dsm_draws(const EgoBatch& batch, const VpSde& sde, Rng& rng) {
  DsmDraws d;
  const std::size_t b = batch.size();
  d.t.reserve(b);
  d.x.reserve(b);
  d.a.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double t = rng.uniform(sde.t_eps, sde.t_max);
    d.t.push_back(t);
    d.x.push_back(sde.perturb_features(batch.x[i], batch.mask[i], t, rng));
    d.a.push_back(sde.perturb_adjacency(batch.a[i], batch.mask[i], t, rng));
  }
  return d;
}

namespace {

double real_count(const Eigen::VectorXd& mask) { return mask.sum(); }

std::pair<double, double> element_denoms(const EgoBatch& batch, std::size_t i) {
  const double n = real_count(batch.mask[i]);
  const double f = static_cast<double>(batch.x[i].cols());
  const double dx = std::max(1.0, n * f);
  const double da = std::max(1.0, n * n - n);
  return {dx, da};
}

}  // namespace

std::pair<double, double> dsm_loss_from_eps(const std::vector<Eigen::MatrixXd>& eps_x,
                                            const std::vector<Eigen::MatrixXd>& eps_a,
                                            const EgoBatch& batch, const DsmDraws& draws) {
  const std::size_t b = batch.size();
  if (eps_x.size() != b || eps_a.size() != b || draws.t.size() != b) {
    throw ContractError("dsm_loss_from_eps: batch/draws/eps size mismatch");
  }
  double lx = 0.0;
  double la = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    auto [dx, da] = element_denoms(batch, i);
    lx += (eps_x[i] - draws.x[i].noise).squaredNorm() / dx;
    la += (eps_a[i] - draws.a[i].noise).squaredNorm() / da;
  }
  return {lx / static_cast<double>(b), la / static_cast<double>(b)};
}

std::pair<double, double> dsm_loss_value(const ParamStore& theta, const ParamStore& phi,
                                         const EgoBatch& batch, const DsmDraws& draws,
                                         const ModelConfig& cfg) {
  std::vector<Eigen::MatrixXd> ex;
  std::vector<Eigen::MatrixXd> ea;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ex.push_back(predict_eps_x(draws.x[i].noisy, draws.a[i].noisy, batch.mask[i], theta, cfg));
    ea.push_back(predict_eps_a(draws.x[i].noisy, draws.a[i].noisy, batch.mask[i], phi, cfg));
  }
  return dsm_loss_from_eps(ex, ea, batch, draws);
}

DsmLoss loss_and_grads(const ParamStore& theta, const ParamStore& phi, const EgoBatch& batch,
                       const DsmDraws& draws, const ModelConfig& cfg) {
  const std::size_t b = batch.size();
  if (b == 0 || draws.t.size() != b) throw ContractError("loss_and_grads: empty or mismatched batch");
  Tape tape;
  TapeParams tp_theta = register_params(tape, theta);
  TapeParams tp_phi = register_params(tape, phi);

  std::vector<Var> terms_x;
  std::vector<Var> terms_a;
  for (std::size_t i = 0; i < b; ++i) {
    auto [dx, da] = element_denoms(batch, i);
    Var xn = tape.leaf(draws.x[i].noisy);
    Var an = tape.leaf(draws.a[i].noisy);
    Var zx = tape.leaf(draws.x[i].noise);
    Var za = tape.leaf(draws.a[i].noise);
    Var ex = tape_eps_x(tape, xn, an, batch.mask[i], tp_theta, cfg);
    Var ea = tape_eps_a(tape, xn, an, batch.mask[i], tp_phi, cfg);
    terms_x.push_back(tape.scale(tape.sum_sq(tape.sub(ex, zx)), 1.0 / (dx * static_cast<double>(b))));
    terms_a.push_back(tape.scale(tape.sum_sq(tape.sub(ea, za)), 1.0 / (da * static_cast<double>(b))));
  }
  Var loss_x = tape.add_scalars(terms_x);
  Var loss_a = tape.add_scalars(terms_a);
  Var total = tape.add(loss_x, loss_a);
  tape.backward(total);

  DsmLoss out;
  out.loss_x = tape.val(loss_x)(0, 0);
  out.loss_a = tape.val(loss_a)(0, 0);
  if (!std::isfinite(out.loss_x) || !std::isfinite(out.loss_a)) {
    throw NumericalError("loss_and_grads: non-finite DSM loss (x=" + std::to_string(out.loss_x) +
                         ", a=" + std::to_string(out.loss_a) + ")");
  }
  for (const auto& name : theta.names()) out.grad_theta.add(name, tape.grad(tp_theta.vars.at(name)));
  for (const auto& name : phi.names()) out.grad_phi.add(name, tape.grad(tp_phi.vars.at(name)));
  return out;
}

namespace {

void write_params(std::ofstream& bin, const ParamStore& store) {
  for (const auto& name : store.names()) {
    const Eigen::MatrixXd& m = store.at(name);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    }
  }
}

json params_manifest(const std::string& prefix, const ParamStore& store) {
  json arr = json::array();
  for (const auto& name : store.names()) {
    const Eigen::MatrixXd& m = store.at(name);
    arr.push_back({{"name", prefix + name},
                   {"shape", {m.rows(), m.cols()}},
                   {"dtype", "f64"}});
  }
  return arr;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& dir) {
  if (!ck.theta.all_finite() || !ck.phi.all_finite()) {
    throw NumericalError("save_checkpoint: non-finite parameters");
  }
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = "ego-diffusion-checkpoint-v1";
  json params = params_manifest("theta.", ck.theta);
  for (auto& e : params_manifest("phi.", ck.phi)) params.push_back(e);
  manifest["params"] = params;
  manifest["model"] = {{"hidden_dim", ck.model.hidden_dim},
                       {"gmh_heads", ck.model.gmh_heads},
                       {"gmh_out_channels", ck.model.gmh_out_channels},
                       {"adjacency_powers", ck.model.adjacency_powers}};
  manifest["sde"] = {{"beta_min", ck.sde.beta_min},
                     {"beta_max", ck.sde.beta_max},
                     {"t_max", ck.sde.t_max},
                     {"t_eps", ck.sde.t_eps}};
  manifest["ego"] = {{"hops", ck.ego.hops}, {"max_nodes", ck.ego.max_nodes}};
  manifest["num_features"] = ck.num_features;
  manifest["scaler"] = {{"std", ck.scaler_std}, {"unscaled", ck.scaler_unscaled}};
  manifest["draw"] = {{"alpha", ck.alpha}, {"lr", ck.lr}};

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw DataError("save_checkpoint: cannot write manifest.json under " + dir);
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw DataError("save_checkpoint: cannot write params.bin under " + dir);
  write_params(bin, ck.theta);
  write_params(bin, ck.phi);
  bin.close();
  if (!bin) throw DataError("save_checkpoint: short write to params.bin under " + dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream mf(mpath, std::ios::binary);
  if (!mf) throw DataError("load_checkpoint: missing " + mpath.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw DataError("load_checkpoint: invalid JSON in " + mpath.string() + ": " + e.what());
  }

  Checkpoint ck;
  try {
    ck.model.hidden_dim = manifest.at("model").at("hidden_dim").get<int>();
    ck.model.gmh_heads = manifest.at("model").at("gmh_heads").get<int>();
    ck.model.gmh_out_channels = manifest.at("model").at("gmh_out_channels").get<int>();
    ck.model.adjacency_powers = manifest.at("model").at("adjacency_powers").get<int>();
    ck.sde.beta_min = manifest.at("sde").at("beta_min").get<double>();
    ck.sde.beta_max = manifest.at("sde").at("beta_max").get<double>();
    ck.sde.t_max = manifest.at("sde").at("t_max").get<double>();
    ck.sde.t_eps = manifest.at("sde").at("t_eps").get<double>();
    ck.ego.hops = manifest.at("ego").at("hops").get<int>();
    ck.ego.max_nodes = manifest.at("ego").at("max_nodes").get<int>();
    ck.num_features = manifest.at("num_features").get<int>();
    ck.scaler_std = manifest.at("scaler").at("std").get<std::vector<double>>();
    ck.scaler_unscaled = manifest.at("scaler").at("unscaled").get<std::vector<int>>();
    ck.alpha = manifest.at("draw").at("alpha").get<double>();
    ck.lr = manifest.at("draw").at("lr").get<double>();
  } catch (const json::exception& e) {
    throw DataError("load_checkpoint: manifest field error in " + mpath.string() + ": " + e.what());
  }
  ck.model.validate();
  ck.sde.validate();
  ck.ego.validate();

  const fs::path bpath = fs::path(dir) / "params.bin";
  std::ifstream bin(bpath, std::ios::binary);
  if (!bin) throw DataError("load_checkpoint: missing " + bpath.string());

  std::size_t expected = 0;
  for (const auto& entry : manifest.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (entry.at("dtype").get<std::string>() != "f64" || shape.size() != 2) {
      throw DataError("load_checkpoint: unsupported parameter entry " + name);
    }
    Eigen::MatrixXd m(shape[0], shape[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v = 0.0;
        bin.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(r, c) = v;
      }
    }
    if (!bin) throw DataError("load_checkpoint: params.bin truncated at " + name);
    expected += static_cast<std::size_t>(m.size());
    if (name.rfind("theta.", 0) == 0) {
      ck.theta.add(name.substr(6), std::move(m));
    } else if (name.rfind("phi.", 0) == 0) {
      ck.phi.add(name.substr(4), std::move(m));
    } else {
      throw DataError("load_checkpoint: parameter outside theta/phi namespaces: " + name);
    }
  }
  char extra = 0;
  if (bin.read(&extra, 1)) {
    throw DataError("load_checkpoint: params.bin longer than manifest declares (" +
                    std::to_string(expected) + " values expected)");
  }
  return ck;
}

}  // namespace egodiff
