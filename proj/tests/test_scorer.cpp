#include <cmath>
#include <vector>

#include "doctest.h"
#include "egodiff/io.hpp"
#include "egodiff/scorer.hpp"
#include "egodiff/train.hpp"
#include "helpers.hpp"

using namespace egodiff;

namespace {

ScoreNets small_nets(int features, std::uint64_t seed = 61) {
  ModelConfig cfg;
  cfg.hidden_dim = 8;
  Rng rng = make_rng(seed, {stream::init, 0});
  return init_params(cfg, features, rng);
}

SparseNetwork blocky_net(int nodes, int features, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_nodes = nodes;
  cfg.num_features = features;
  cfg.blocks = 2;
  cfg.p_in = 0.2;
  cfg.p_out = 0.03;
  cfg.contextual_fraction = 0.0;
  cfg.structural_fraction = 0.0;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

}  // namespace

TEST_SUITE("scorer") {

TEST_CASE("reconstruction level grid") {
  const std::vector<double> four = reconstruction_levels(4, 1.0);
  REQUIRE(four.size() == 4);
  CHECK(four[0] == doctest::Approx(0.2));
  CHECK(four[1] == doctest::Approx(0.4));
  CHECK(four[2] == doctest::Approx(0.6));
  CHECK(four[3] == doctest::Approx(0.8));

  const std::vector<double> one = reconstruction_levels(1, 1.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == doctest::Approx(0.5));

  for (double tau : reconstruction_levels(7, 1.0)) {
    CHECK(tau > 0.0);
    CHECK(tau < 1.0);
  }
}

TEST_CASE("penalty weights mirror the schedule snr") {
  VpSde sde;
  CHECK(penalty_weight(Penalty::Snr, 0.5, sde) == doctest::Approx(sde.snr(0.5)).epsilon(1e-12));
  CHECK(penalty_weight(Penalty::SqrtSnr, 0.5, sde) ==
        doctest::Approx(std::sqrt(sde.snr(0.5))).epsilon(1e-12));
  CHECK(penalty_weight(Penalty::None, 0.5, sde) == 1.0);
}

TEST_CASE("parsers reject unknown names") {
  CHECK(parse_penalty("snr") == Penalty::Snr);
  CHECK(parse_penalty("sqrt_snr") == Penalty::SqrtSnr);
  CHECK(parse_penalty("none") == Penalty::None);
  CHECK_THROWS_AS(parse_penalty("log_snr"), ContractError);
  CHECK(parse_dissimilarity("matrix") == Dissimilarity::Matrix);
  CHECK(parse_dissimilarity("energy") == Dissimilarity::Energy);
  CHECK_THROWS_AS(parse_dissimilarity("cosine"), ContractError);
}

TEST_CASE("matrix distance oracle") {
  DenseEgoGraph g;
  g.x = Eigen::MatrixXd(2, 1);
  g.x << 1, 0;
  g.a = Eigen::MatrixXd(2, 2);
  g.a << 0, 1, 1, 0;
  g.mask = Eigen::VectorXd::Ones(2);
  g.center = 0;
  g.node_ids = {0, 1};

  // Identical reconstruction.
  CHECK(matrix_distance(g, g.x, g.a, 0.5) == doctest::Approx(0.0).epsilon(1e-15));

  // Edge removed and first feature zeroed.
  Eigen::MatrixXd x_hat(2, 1);
  x_hat << 0, 0;
  const Eigen::MatrixXd a_hat = Eigen::MatrixXd::Zero(2, 2);
  const double d = matrix_distance(g, x_hat, a_hat, 0.5);
  CHECK(d == doctest::Approx(0.5 * std::sqrt(2.0) / 4.0 + 0.5 * 0.5).epsilon(1e-12));
  CHECK(d == doctest::Approx(0.42678).epsilon(1e-4));

  // alpha = 1 leaves only the feature term.
  CHECK(matrix_distance(g, x_hat, g.a, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(matrix_distance(g, x_hat, a_hat, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("matrix distance is symmetric in its arguments") {
  Rng rng = make_rng(62);
  const DenseEgoGraph g = testutil::random_ego(4, 2, rng);
  DenseEgoGraph h = g;
  h.x = Eigen::MatrixXd::NullaryExpr(4, 2, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  h.a = testutil::random_adjacency(4, 0.5, rng);
  CHECK(matrix_distance(g, h.x, h.a, 0.3) ==
        doctest::Approx(matrix_distance(h, g.x, g.a, 0.3)).epsilon(1e-12));
}

TEST_CASE("energy shift oracle") {
  DenseEgoGraph g;
  g.x = Eigen::MatrixXd(2, 1);
  g.x << 1, -1;
  g.a = Eigen::MatrixXd(2, 2);
  g.a << 0, 1, 1, 0;
  g.mask = Eigen::VectorXd::Ones(2);
  g.center = 0;
  g.node_ids = {0, 1};

  // Perfect reconstruction.
  EnergyPair same = reconstruction_energies(g, g.x, g.a, 0.5);
  CHECK(energy_shift(same) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(same.orig == doctest::Approx(2.0));

  // Edge dropped: reconstructed energy 0 under the empty Laplacian.
  const EnergyPair dropped =
      reconstruction_energies(g, g.x, Eigen::MatrixXd::Zero(2, 2), 0.5);
  CHECK(dropped.recon == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(energy_shift(dropped) == doctest::Approx(2.0));
  CHECK(!dropped.degenerate_recon);

  // All-zero reconstructed features are flagged, not thrown.
  const EnergyPair degen =
      reconstruction_energies(g, Eigen::MatrixXd::Zero(2, 1), g.a, 0.5);
  CHECK(degen.degenerate_recon);
  CHECK(degen.recon == 0.0);
  CHECK(energy_shift(degen) == doctest::Approx(2.0));
}

TEST_CASE("binarization threshold and symmetrization") {
  DenseEgoGraph g;
  g.x = Eigen::MatrixXd(2, 1);
  g.x << 1, -1;
  g.a = Eigen::MatrixXd(2, 2);
  g.a << 0, 1, 1, 0;
  g.mask = Eigen::VectorXd::Ones(2);
  g.center = 0;
  g.node_ids = {0, 1};
  Eigen::MatrixXd a_hat(2, 2);
  a_hat << 0.2, 0.8, 0.3, 0.0;  // asymmetric continuous reconstruction
  const EnergyPair e = reconstruction_energies(g, g.x, a_hat, 0.5);
  // (0,1) survives the threshold and is mirrored; the energy matches K2.
  CHECK(e.recon == doctest::Approx(2.0));
}

TEST_CASE("shift never exceeds two") {
  Rng rng = make_rng(63);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rng.below(5);
    const DenseEgoGraph g = testutil::random_ego(n, 2, rng);
    const Eigen::MatrixXd x_hat =
        Eigen::MatrixXd::NullaryExpr(n, 2, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    Eigen::MatrixXd a_hat = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return rng.u01(); });
    a_hat = 0.5 * (a_hat + a_hat.transpose().eval());
    a_hat.diagonal().setZero();
    const EnergyPair e = reconstruction_energies(g, x_hat, a_hat, 0.5);
    CHECK(e.orig >= 0.0);
    CHECK(e.orig <= 2.0);
    CHECK(e.recon >= 0.0);
    CHECK(e.recon <= 2.0);
    CHECK(energy_shift(e) <= 2.0);
  }
}

TEST_CASE("reconstruction at a tiny tau stays closer than at a large tau") {
  VpSde sde;
  const ScoreNets nets = small_nets(2);
  SolverConfig solver;
  solver.steps_per_unit_time = 30;
  Rng rng = make_rng(64);
  double d_small = 0.0, d_large = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const DenseEgoGraph g = testutil::random_ego(4 + rng.below(3), 2, rng);
    Rng r1 = make_rng(64, {stream::score, static_cast<std::uint64_t>(rep), 0});
    Rng r2 = make_rng(64, {stream::score, static_cast<std::uint64_t>(rep), 1});
    const Reconstruction near = reconstruct(g, 0.02, nets, sde, solver, r1);
    const Reconstruction far = reconstruct(g, 0.8, nets, sde, solver, r2);
    d_small += matrix_distance(g, near.x, near.a, 0.5);
    d_large += matrix_distance(g, far.x, far.a, 0.5);
  }
  CHECK(d_small < d_large);
}

TEST_CASE("reconstruction keeps masked slots at zero and is seeded") {
  VpSde sde;
  const ScoreNets nets = small_nets(2);
  SolverConfig solver;
  solver.steps_per_unit_time = 20;
  Rng rng = make_rng(65);
  DenseEgoGraph g = testutil::pad_ego(testutil::random_ego(3, 2, rng), 2);
  Rng r1 = make_rng(65, {stream::score, 0});
  Rng r2 = make_rng(65, {stream::score, 0});
  const Reconstruction a = reconstruct(g, 0.5, nets, sde, solver, r1);
  const Reconstruction b = reconstruct(g, 0.5, nets, sde, solver, r2);
  CHECK(a.x == b.x);
  CHECK(a.a == b.a);
  CHECK(a.x.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.a.rightCols(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-term score equals one dissimilarity") {
  const SparseNetwork net = blocky_net(20, 2, 66);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  EgoConfig ego_cfg;
  ScoringConfig cfg;
  cfg.levels = 1;
  cfg.samples_per_level = 1;
  cfg.penalty = Penalty::None;
  cfg.solver.steps_per_unit_time = 20;
  const std::uint64_t seed = 9;
  const int v = 3;
  const double score = node_score(net, v, cfg, nets, sde, ego_cfg, seed);

  // Replicate the single (i=0, j=0) term with the same derived streams.
  DenseEgoGraph ego = extract_ego(net, v, ego_cfg.hops);
  Rng trunc_rng = make_rng(seed, {stream::truncate, static_cast<std::uint64_t>(v)});
  ego = truncate(ego, ego_cfg.max_nodes, trunc_rng);
  Rng rec_rng = make_rng(seed, {stream::score, static_cast<std::uint64_t>(v), 0, 0});
  const Reconstruction rec = reconstruct(ego, 0.5, nets, sde, cfg.solver, rec_rng);
  CHECK(score == doctest::Approx(matrix_distance(ego, rec.x, rec.a, cfg.alpha)).epsilon(1e-12));
}

TEST_CASE("node score equals the weighted breakdown sum") {
  const SparseNetwork net = blocky_net(16, 2, 67);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  EgoConfig ego_cfg;
  ScoringConfig cfg;
  cfg.levels = 3;
  cfg.samples_per_level = 2;
  cfg.solver.steps_per_unit_time = 15;
  std::vector<BreakdownRow> rows;
  const double score = node_score(net, 1, cfg, nets, sde, ego_cfg, 4, &rows);
  REQUIRE(rows.size() == 6);
  double total = 0.0;
  for (const BreakdownRow& r : rows) total += penalty_weight(cfg.penalty, r.tau, sde) * r.dissimilarity;
  CHECK(score == doctest::Approx(total).epsilon(1e-12));
  // Eq. 8 linearity: scaling every dissimilarity scales the total.
  double scaled = 0.0;
  for (const BreakdownRow& r : rows)
    scaled += penalty_weight(cfg.penalty, r.tau, sde) * (2.5 * r.dissimilarity);
  CHECK(scaled == doctest::Approx(2.5 * score).epsilon(1e-12));
}

TEST_CASE("snr weighting upweights small-tau terms against flat weighting") {
  VpSde sde;
  const std::vector<double> taus = reconstruction_levels(4, sde.t_max);
  const int s = 3;
  // Per-(i, j) errors all one: the weighted score is S * sum snr(tau_i).
  double snr_score = 0.0, flat_score = 0.0;
  for (double tau : taus) {
    snr_score += s * penalty_weight(Penalty::Snr, tau, sde);
    flat_score += s * penalty_weight(Penalty::None, tau, sde);
  }
  double want = 0.0;
  for (double tau : taus) want += sde.snr(tau);
  CHECK(snr_score == doctest::Approx(s * want).epsilon(1e-12));
  CHECK(flat_score == doctest::Approx(4.0 * 3.0).epsilon(1e-12));
  CHECK(snr_score > flat_score);  // snr(tau) > 1 across the interior grid
}

TEST_CASE("score_all ranks every node deterministically") {
  const SparseNetwork net = blocky_net(14, 2, 68);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  EgoConfig ego_cfg;
  ScoringConfig cfg;
  cfg.levels = 2;
  cfg.samples_per_level = 1;
  cfg.solver.steps_per_unit_time = 10;
  const ScoreReport a = score_all(net, cfg, nets, sde, ego_cfg, 5);
  const ScoreReport b = score_all(net, cfg, nets, sde, ego_cfg, 5);
  CHECK(a.scores == b.scores);
  CHECK(a.ranking == b.ranking);
  std::vector<int> sorted = a.ranking;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < net.num_nodes(); ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  for (std::size_t i = 1; i < a.ranking.size(); ++i) {
    const double prev = a.scores[static_cast<std::size_t>(a.ranking[i - 1])];
    const double cur = a.scores[static_cast<std::size_t>(a.ranking[i])];
    CHECK(prev >= cur);
  }
  for (double s : a.scores) {
    CHECK(std::isfinite(s));
    CHECK(s >= 0.0);
  }
  CHECK(a.breakdown.size() == static_cast<std::size_t>(net.num_nodes() * 2));
}

TEST_CASE("score_all rejects a feature-width mismatch") {
  const SparseNetwork net = blocky_net(10, 3, 69);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  ScoringConfig cfg;
  CHECK_THROWS_AS(score_all(net, cfg, nets, sde, EgoConfig{}, 1), DataError);
}

TEST_CASE("solver error profile covers the kind-tau cross product") {
  const SparseNetwork net = blocky_net(12, 2, 70);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  ScoringConfig cfg;
  cfg.solver.steps_per_unit_time = 10;
  const std::vector<SolverKind> kinds = {SolverKind::Em, SolverKind::Reverse,
                                         SolverKind::EmLangevin, SolverKind::ReverseLangevin};
  const std::vector<double> taus = reconstruction_levels(4, sde.t_max);
  const std::vector<ProfileRow> rows =
      solver_error_profile(net, {0, 3, 7}, kinds, taus, cfg, nets, sde, EgoConfig{}, 2);
  REQUIRE(rows.size() == 16);
  for (const ProfileRow& r : rows) {
    CHECK(r.error_x >= 0.0);
    CHECK(r.error_a >= 0.0);
  }
  CHECK(rows[0].solver == "em");
  CHECK(rows[4].solver == "reverse");
}

TEST_CASE("energy histogram rows stay within the bound") {
  const SparseNetwork net = blocky_net(12, 2, 71);
  const ScoreNets nets = small_nets(2);
  VpSde sde;
  ScoringConfig cfg;
  cfg.levels = 2;
  cfg.samples_per_level = 2;
  cfg.solver.steps_per_unit_time = 10;
  const std::vector<int> nodes = {1, 4, 6};
  const std::vector<EnergyRow> rows =
      energy_histogram_data(net, nodes, cfg, nets, sde, EgoConfig{}, 3);
  REQUIRE(rows.size() == nodes.size() * 2 * 2);
  for (const EnergyRow& r : rows) {
    CHECK(r.energy_orig >= 0.0);
    CHECK(r.energy_orig <= 2.0);
    CHECK(r.energy_recon >= 0.0);
    CHECK(r.energy_recon <= 2.0);
    CHECK(r.energy_diff >= -2.0);
    CHECK(r.energy_diff <= 2.0);
    CHECK(r.energy_diff == doctest::Approx(r.energy_orig - r.energy_recon).epsilon(1e-15));
  }
}

TEST_CASE("config validation") {
  ScoringConfig cfg;
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = ScoringConfig{};
  cfg.levels = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = ScoringConfig{};
  cfg.samples_per_level = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

}  // TEST_SUITE
