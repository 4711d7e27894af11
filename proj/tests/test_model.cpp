#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "egodiff/model.hpp"
#include "helpers.hpp"

using namespace egodiff;

namespace {

ModelConfig small_config(int hidden = 8) {
  ModelConfig cfg;
  cfg.hidden_dim = hidden;
  return cfg;
}

EgoBatch one_graph_batch(const DenseEgoGraph& g) { return build_batch({g}); }

// Max relative gradient error of both DSM losses against central differences,
// over every parameter entry of both stores.
double max_fd_error(const ScoreNets& nets, const EgoBatch& batch, const DsmDraws& draws) {
  const DsmLoss out = loss_and_grads(nets.theta, nets.phi, batch, draws, nets.config);
  const double h = 1e-4;
  double worst = 0.0;
  const auto probe = [&](const ParamStore& store, const ParamStore& grads, bool is_theta) {
    for (const std::string& name : store.names()) {
      const Eigen::MatrixXd& g = grads.at(name);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
          ParamStore bumped = store;
          bumped.at(name)(i, j) += h;
          const auto up = is_theta ? dsm_loss_value(bumped, nets.phi, batch, draws, nets.config)
                                   : dsm_loss_value(nets.theta, bumped, batch, draws, nets.config);
          bumped.at(name)(i, j) -= 2.0 * h;
          const auto dn = is_theta ? dsm_loss_value(bumped, nets.phi, batch, draws, nets.config)
                                   : dsm_loss_value(nets.theta, bumped, batch, draws, nets.config);
          const double fd = is_theta ? (up.first - dn.first) / (2.0 * h)
                                     : (up.second - dn.second) / (2.0 * h);
          const double denom = std::max({1e-8, std::abs(fd), std::abs(g(i, j))});
          worst = std::max(worst, std::abs(g(i, j) - fd) / denom);
        }
      }
    }
  };
  probe(nets.theta, out.grad_theta, true);
  probe(nets.phi, out.grad_phi, false);
  return worst;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init is deterministic with documented shapes") {
  for (int hidden : {8, 16, 64}) {
    ModelConfig cfg = small_config(hidden);
    Rng a = make_rng(5, {stream::init, 0});
    Rng b = make_rng(5, {stream::init, 0});
    const ScoreNets na = init_params(cfg, 3, a);
    const ScoreNets nb = init_params(cfg, 3, b);
    for (const std::string& name : na.theta.names())
      CHECK(na.theta.at(name) == nb.theta.at(name));
    for (const std::string& name : na.phi.names()) CHECK(na.phi.at(name) == nb.phi.at(name));

    CHECK(na.theta.at("gcn.w1").rows() == 3);
    CHECK(na.theta.at("gcn.w1").cols() == hidden);
    CHECK(na.theta.at("mlp.w3").cols() == 3);
    CHECK(na.phi.at("gmh.inner.w1").rows() == cfg.gmh_in_channels());
    CHECK(na.phi.at("gmh.inner.w2").cols() == cfg.gmh_out_channels);
    CHECK(na.phi.at("head.w3").cols() == 1);
    CHECK(na.theta.all_finite());
    CHECK(na.phi.all_finite());
    for (const std::string& name : na.theta.names())
      CHECK(na.theta.at(name).cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("config validation") {
  ModelConfig cfg;
  cfg.hidden_dim = 10;  // not divisible by 4 heads
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg.hidden_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("gcn layer reduces to elu on the self term") {
  const int n = 3, f = 2;
  Rng rng = make_rng(7);
  const DenseEgoGraph g = testutil::random_ego(n, f, rng);
  const Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(f, f);
  const Eigen::MatrixXd w2 = Eigen::MatrixXd::Identity(f, f);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, f);
  const Eigen::MatrixXd out =
      gcn_layer(g.x, Eigen::MatrixXd::Zero(n, n), w1, w2, b, g.mask);
  const Eigen::MatrixXd want =
      g.x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  CHECK((out - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gcn layer zeroes masked rows") {
  Rng rng = make_rng(8);
  DenseEgoGraph g = testutil::random_ego(4, 3, rng);
  g.mask(2) = 0.0;
  g.x.row(2).setZero();
  g.a.row(2).setZero();
  g.a.col(2).setZero();
  const ScoreNets nets = init_params(small_config(), 3, rng);
  const Eigen::MatrixXd out = gcn_layer(g.x, g.a, nets.theta.at("gcn.w1"),
                                        nets.theta.at("gcn.w2"), nets.theta.at("gcn.b"), g.mask);
  CHECK(out.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gmh attention channels are constant for identical nodes") {
  const int n = 4, f = 3;
  Rng rng = make_rng(9);
  const ScoreNets nets = init_params(small_config(), f, rng);
  Eigen::MatrixXd x(1, f);
  x << 0.3, -1.2, 0.8;
  const Eigen::MatrixXd xr = x.replicate(n, 1);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const GmhOutput out = gmh_layer(xr, adjacency_channels(a, 2), nets.phi, nets.config,
                                  Eigen::VectorXd::Ones(n));
  CHECK(out.attn.size() == 4);
  for (const Eigen::MatrixXd& ch : out.attn) {
    const double ref = ch(0, 0);
    CHECK((ch.array() - ref).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gmh emits four channels for any hidden width") {
  Rng rng = make_rng(10);
  for (int hidden : {8, 12, 16}) {
    const ScoreNets nets = init_params(small_config(hidden), 2, rng);
    const DenseEgoGraph g = testutil::random_ego(5, 2, rng);
    const GmhOutput out = gmh_layer(g.x, adjacency_channels(g.a, 2), nets.phi, nets.config, g.mask);
    CHECK(out.attn.size() == 4);
    CHECK(out.x_out.rows() == 5);
    CHECK(out.x_out.cols() == hidden);
  }
}

TEST_CASE("zero parameters give exactly zero scores") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(11);
  ScoreNets nets = init_params(cfg, 2, rng);
  ParamStore zt = nets.theta.zeros_like();
  ParamStore zp = nets.phi.zeros_like();
  const DenseEgoGraph g = testutil::random_ego(4, 2, rng);
  VpSde sde;
  CHECK(score_x_forward(g.x, g.a, g.mask, 0.5, zt, cfg, sde).cwiseAbs().maxCoeff() == 0.0);
  CHECK(score_a_forward(g.x, g.a, g.mask, 0.5, zp, cfg, sde).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("score scales as 1/sigma between two times") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(12);
  const ScoreNets nets = init_params(cfg, 2, rng);
  const DenseEgoGraph g = testutil::random_ego(4, 2, rng);
  VpSde sde;
  const double t1 = 0.3, t2 = 0.8;
  const Eigen::MatrixXd s1 = score_x_forward(g.x, g.a, g.mask, t1, nets.theta, cfg, sde);
  const Eigen::MatrixXd s2 = score_x_forward(g.x, g.a, g.mask, t2, nets.theta, cfg, sde);
  const double sig1 = sde.moments(t1).second;
  const double sig2 = sde.moments(t2).second;
  CHECK((s1 * sig1 - s2 * sig2).cwiseAbs().maxCoeff() < 1e-12);

  // score * (-sigma) reproduces the noise prediction exactly.
  const Eigen::MatrixXd eps = predict_eps_x(g.x, g.a, g.mask, nets.theta, cfg);
  CHECK((s1 * (-sig1) - eps).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("score shapes follow the input") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(13);
  const ScoreNets nets = init_params(cfg, 3, rng);
  VpSde sde;
  for (int n : {2, 8, 32}) {
    const DenseEgoGraph g = testutil::random_ego(n, 3, rng);
    const Eigen::MatrixXd sx = score_x_forward(g.x, g.a, g.mask, 0.5, nets.theta, cfg, sde);
    CHECK(sx.rows() == n);
    CHECK(sx.cols() == 3);
    const Eigen::MatrixXd sa = score_a_forward(g.x, g.a, g.mask, 0.5, nets.phi, cfg, sde);
    CHECK(sa.rows() == n);
    CHECK(sa.cols() == n);
  }
}

TEST_CASE("adjacency score is symmetric with zero diagonal") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(14);
  const ScoreNets nets = init_params(cfg, 2, rng);
  VpSde sde;
  for (int rep = 0; rep < 10; ++rep) {
    const DenseEgoGraph g = testutil::random_ego(5, 2, rng);
    const Eigen::MatrixXd s = score_a_forward(g.x, g.a, g.mask, 0.6, nets.phi, cfg, sde);
    CHECK((s - s.transpose().eval()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(s.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("both networks are permutation equivariant") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(15);
  const ScoreNets nets = init_params(cfg, 3, rng);
  VpSde sde;
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + rng.below(5);
    DenseEgoGraph g = testutil::random_ego(n, 3, rng);
    g.x = Eigen::MatrixXd::NullaryExpr(n, 3, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    const std::vector<int> perm = testutil::random_permutation(n, rng);
    const DenseEgoGraph gp = testutil::permute_ego(g, perm);

    const Eigen::MatrixXd sx = score_x_forward(g.x, g.a, g.mask, 0.5, nets.theta, cfg, sde);
    const Eigen::MatrixXd sxp = score_x_forward(gp.x, gp.a, gp.mask, 0.5, nets.theta, cfg, sde);
    const Eigen::MatrixXd sa = score_a_forward(g.x, g.a, g.mask, 0.5, nets.phi, cfg, sde);
    const Eigen::MatrixXd sap = score_a_forward(gp.x, gp.a, gp.mask, 0.5, nets.phi, cfg, sde);
    for (int i = 0; i < n; ++i) {
      CHECK((sxp.row(i) - sx.row(perm[i])).cwiseAbs().maxCoeff() < 1e-9);
      for (int j = 0; j < n; ++j) CHECK(std::abs(sap(i, j) - sa(perm[i], perm[j])) < 1e-9);
    }
  }
}

TEST_CASE("padding never changes real-slot outputs") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(16);
  const ScoreNets nets = init_params(cfg, 2, rng);
  VpSde sde;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rng.below(4);
    const DenseEgoGraph g = testutil::random_ego(n, 2, rng);
    const DenseEgoGraph padded = testutil::pad_ego(g, 2 + rng.below(3));
    const Eigen::MatrixXd sx = score_x_forward(g.x, g.a, g.mask, 0.4, nets.theta, cfg, sde);
    const Eigen::MatrixXd sxp =
        score_x_forward(padded.x, padded.a, padded.mask, 0.4, nets.theta, cfg, sde);
    CHECK((sxp.topRows(n) - sx).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(sxp.bottomRows(padded.n() - n).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd sa = score_a_forward(g.x, g.a, g.mask, 0.4, nets.phi, cfg, sde);
    const Eigen::MatrixXd sap =
        score_a_forward(padded.x, padded.a, padded.mask, 0.4, nets.phi, cfg, sde);
    CHECK((sap.topLeftCorner(n, n) - sa).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gradients match finite differences on a tiny ego-graph") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(17);
  const ScoreNets nets = init_params(cfg, 2, rng);
  const DenseEgoGraph g = testutil::random_ego(2, 2, rng, 1.0);
  const EgoBatch batch = one_graph_batch(g);
  VpSde sde;
  Rng draw_rng = make_rng(17, {stream::train, 1});
  const DsmDraws draws = make_dsm_draws(batch, sde, draw_rng);
  CHECK(max_fd_error(nets, batch, draws) < 1e-4);
}

TEST_CASE("tape loss equals the plain-forward loss") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(18);
  const ScoreNets nets = init_params(cfg, 3, rng);
  std::vector<DenseEgoGraph> egos = {testutil::random_ego(3, 3, rng),
                                     testutil::random_ego(5, 3, rng)};
  const EgoBatch batch = build_batch(egos);
  VpSde sde;
  Rng draw_rng = make_rng(18, {stream::train, 2});
  const DsmDraws draws = make_dsm_draws(batch, sde, draw_rng);
  const DsmLoss tape_out = loss_and_grads(nets.theta, nets.phi, batch, draws, cfg);
  const auto [lx, la] = dsm_loss_value(nets.theta, nets.phi, batch, draws, cfg);
  CHECK(tape_out.loss_x == doctest::Approx(lx).epsilon(1e-12));
  CHECK(tape_out.loss_a == doctest::Approx(la).epsilon(1e-12));
}

TEST_CASE("perfect noise prediction gives zero loss") {
  Rng rng = make_rng(19);
  const DenseEgoGraph g = testutil::random_ego(4, 2, rng);
  const EgoBatch batch = one_graph_batch(g);
  VpSde sde;
  Rng draw_rng = make_rng(19, {stream::train, 3});
  const DsmDraws draws = make_dsm_draws(batch, sde, draw_rng);
  const auto [lx, la] =
      dsm_loss_from_eps({draws.x[0].noise}, {draws.a[0].noise}, batch, draws);
  CHECK(lx == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(la == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("duplicating the batch leaves the mean loss unchanged") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(20);
  const ScoreNets nets = init_params(cfg, 2, rng);
  const DenseEgoGraph g = testutil::random_ego(3, 2, rng);
  const EgoBatch once = build_batch({g});
  const EgoBatch twice = build_batch({g, g});
  VpSde sde;
  Rng draw_rng = make_rng(20, {stream::train, 4});
  DsmDraws draws_once = make_dsm_draws(once, sde, draw_rng);
  DsmDraws draws_twice;
  draws_twice.t = {draws_once.t[0], draws_once.t[0]};
  draws_twice.x = {draws_once.x[0], draws_once.x[0]};
  draws_twice.a = {draws_once.a[0], draws_once.a[0]};
  const auto [lx1, la1] = dsm_loss_value(nets.theta, nets.phi, once, draws_once, cfg);
  const auto [lx2, la2] = dsm_loss_value(nets.theta, nets.phi, twice, draws_twice, cfg);
  CHECK(lx1 == doctest::Approx(lx2).epsilon(1e-12));
  CHECK(la1 == doctest::Approx(la2).epsilon(1e-12));
}

TEST_CASE("loss is invariant to batch padding width") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(21);
  const ScoreNets nets = init_params(cfg, 2, rng);
  const DenseEgoGraph g = testutil::random_ego(3, 2, rng);
  const EgoBatch tight = build_batch({g});

  // Widened copy of the batch entry, as batching alongside a 6-node ego
  // would produce: zeroed padding slots after the real prefix.
  EgoBatch wide = tight;
  wide.n_max = 6;
  wide.x[0] = Eigen::MatrixXd::Zero(6, 2);
  wide.x[0].topRows(3) = tight.x[0];
  wide.a[0] = Eigen::MatrixXd::Zero(6, 6);
  wide.a[0].topLeftCorner(3, 3) = tight.a[0];
  wide.mask[0] = Eigen::VectorXd::Zero(6);
  wide.mask[0].head(3) = tight.mask[0];
  wide.node_ids[0].resize(6, -1);
  VpSde sde;

  // Identical draws on the real block; padding rows carry zero noise.
  Rng r1 = make_rng(21, {stream::train, 5});
  const DsmDraws draws_tight = make_dsm_draws(tight, sde, r1);
  DsmDraws draws_wide;
  draws_wide.t = draws_tight.t;
  Perturbation px;
  px.t = draws_tight.x[0].t;
  px.noise = Eigen::MatrixXd::Zero(6, 2);
  px.noise.topRows(3) = draws_tight.x[0].noise;
  px.noisy = Eigen::MatrixXd::Zero(6, 2);
  px.noisy.topRows(3) = draws_tight.x[0].noisy;
  Perturbation pa;
  pa.t = draws_tight.a[0].t;
  pa.noise = Eigen::MatrixXd::Zero(6, 6);
  pa.noise.topLeftCorner(3, 3) = draws_tight.a[0].noise;
  pa.noisy = Eigen::MatrixXd::Zero(6, 6);
  pa.noisy.topLeftCorner(3, 3) = draws_tight.a[0].noisy;
  draws_wide.x = {px};
  draws_wide.a = {pa};

  const auto [lx1, la1] = dsm_loss_value(nets.theta, nets.phi, tight, draws_tight, cfg);
  const auto [lx2, la2] = dsm_loss_value(nets.theta, nets.phi, wide, draws_wide, cfg);
  CHECK(lx1 == doctest::Approx(lx2).epsilon(1e-12));
  CHECK(la1 == doctest::Approx(la2).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  ModelConfig cfg = small_config(12);
  Rng rng = make_rng(22);
  const ScoreNets nets = init_params(cfg, 5, rng);
  Checkpoint ck;
  ck.model = cfg;
  ck.sde = VpSde{0.2, 0.9, 1.0, 1e-5};
  ck.ego = EgoConfig{2, 24};
  ck.num_features = 5;
  ck.scaler_std = {1.0, 0.5, 2.25, 1.0, 3.0};
  ck.scaler_unscaled = {0, 0, 0, 1, 0};
  ck.alpha = 0.8;
  ck.lr = 0.05;
  ck.theta = nets.theta;
  ck.phi = nets.phi;

  const std::string dir = (std::filesystem::temp_directory_path() / "egodiff_ck_test").string();
  std::filesystem::remove_all(dir);
  save_checkpoint(ck, dir);
  const Checkpoint back = load_checkpoint(dir);

  CHECK(back.model.hidden_dim == 12);
  CHECK(back.sde.beta_min == 0.2);
  CHECK(back.sde.beta_max == 0.9);
  CHECK(back.ego.hops == 2);
  CHECK(back.ego.max_nodes == 24);
  CHECK(back.num_features == 5);
  CHECK(back.scaler_std == ck.scaler_std);
  CHECK(back.scaler_unscaled == ck.scaler_unscaled);
  CHECK(back.alpha == 0.8);
  CHECK(back.lr == 0.05);
  REQUIRE(back.theta.names() == ck.theta.names());
  for (const std::string& name : ck.theta.names()) CHECK(back.theta.at(name) == ck.theta.at(name));
  for (const std::string& name : ck.phi.names()) CHECK(back.phi.at(name) == ck.phi.at(name));

  // Identical forwards from the reloaded parameters.
  const DenseEgoGraph g = testutil::random_ego(4, 5, rng);
  VpSde sde;
  CHECK(score_x_forward(g.x, g.a, g.mask, 0.5, back.theta, cfg, sde) ==
        score_x_forward(g.x, g.a, g.mask, 0.5, ck.theta, cfg, sde));
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated checkpoint payload is rejected") {
  ModelConfig cfg = small_config();
  Rng rng = make_rng(23);
  const ScoreNets nets = init_params(cfg, 2, rng);
  Checkpoint ck;
  ck.model = cfg;
  ck.num_features = 2;
  ck.scaler_std = {1.0, 1.0};
  ck.scaler_unscaled = {0, 0};
  ck.theta = nets.theta;
  ck.phi = nets.phi;
  const std::string dir =
      (std::filesystem::temp_directory_path() / "egodiff_ck_trunc").string();
  std::filesystem::remove_all(dir);
  save_checkpoint(ck, dir);
  std::filesystem::resize_file(std::filesystem::path(dir) / "params.bin", 16);
  CHECK_THROWS_AS(load_checkpoint(dir), DataError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
