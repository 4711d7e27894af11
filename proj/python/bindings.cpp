#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "egodiff/config.hpp"
#include "egodiff/ego.hpp"
#include "egodiff/graph.hpp"
#include "egodiff/io.hpp"
#include "egodiff/metrics.hpp"
#include "egodiff/model.hpp"
#include "egodiff/scorer.hpp"
#include "egodiff/sde.hpp"
#include "egodiff/train.hpp"

namespace py = pybind11;
using namespace egodiff;

namespace {

ScoreNets nets_of(const Checkpoint& ck) {
  ScoreNets nets;
  nets.config = ck.model;
  nets.num_features = ck.num_features;
  nets.theta = ck.theta;
  nets.phi = ck.phi;
  return nets;
}

// Trained model handle: checkpoint plus the loss curve of its training run.
struct Model {
  Checkpoint ck;
  std::vector<std::array<double, 2>> curve;

  Eigen::MatrixXd loss_curve() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(curve.size()), 2);
    for (std::size_t e = 0; e < curve.size(); ++e) {
      out(static_cast<Eigen::Index>(e), 0) = curve[e][0];
      out(static_cast<Eigen::Index>(e), 1) = curve[e][1];
    }
    return out;
  }

  std::vector<double> score(const SparseNetwork& net, int levels, int samples_per_level,
                            std::optional<double> alpha, const std::string& penalty,
                            const std::string& dissimilarity, const std::string& solver,
                            int steps_per_unit_time, std::uint64_t seed) const {
    ScoringConfig cfg;
    cfg.levels = levels;
    cfg.samples_per_level = samples_per_level;
    cfg.alpha = alpha.value_or(ck.alpha);
    cfg.penalty = parse_penalty(penalty);
    cfg.dissimilarity = parse_dissimilarity(dissimilarity);
    cfg.solver.kind = parse_solver_kind(solver);
    cfg.solver.steps_per_unit_time = steps_per_unit_time;

    FeatureScaler scaler;
    scaler.std_dev = ck.scaler_std;
    scaler.unscaled = ck.scaler_unscaled;
    const SparseNetwork scaled = net.with_features(scaler.apply(net.features()));
    const ScoreReport report = score_all(scaled, cfg, nets_of(ck), ck.sde, ck.ego, seed);
    return report.scores;
  }
};

Model train_network(const SparseNetwork& net, int epochs, int batch_size, double lr,
                    int hidden_dim, double alpha, double weight_decay, std::uint64_t seed,
                    int hops, int max_nodes) {
  if (lr <= 0.0) throw ContractError("train: lr must be > 0");
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr = lr;
  cfg.weight_decay = weight_decay;
  cfg.trials = 1;
  cfg.seed = seed;
  cfg.ego.hops = hops;
  cfg.ego.max_nodes = max_nodes;

  HyperDraw draw;
  draw.trial = 0;
  draw.lr = lr;
  draw.hidden_dim = hidden_dim;
  draw.alpha = alpha;

  const auto [scaled, scaler] = standardize_features(net);
  TrainResult result = train_model(scaled, cfg, draw, scaler);
  return Model{std::move(result.checkpoint), std::move(result.loss_curve)};
}

SparseNetwork make_synthetic(int num_nodes, int num_features, int blocks, double p_in,
                             double p_out, double contextual_fraction, double structural_fraction,
                             int clique_size, double feature_shift, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_nodes = num_nodes;
  cfg.num_features = num_features;
  cfg.blocks = blocks;
  cfg.p_in = p_in;
  cfg.p_out = p_out;
  cfg.contextual_fraction = contextual_fraction;
  cfg.structural_fraction = structural_fraction;
  cfg.clique_size = clique_size;
  cfg.feature_shift = feature_shift;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

LabeledScores make_labeled(const std::vector<double>& scores, const std::vector<int>& labels) {
  LabeledScores ls;
  ls.scores = scores;
  ls.labels = labels;
  return ls;
}

}  // namespace

PYBIND11_MODULE(_egodiff, m) {
  m.doc() = "Ego-graph reconstruction anomaly scoring on a score-based graph diffusion model";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NormalizationError>(m, "NormalizationError", PyExc_ArithmeticError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SparseNetwork>(m, "Network")
      .def(py::init([](Eigen::MatrixXd features, std::vector<std::pair<int, int>> edges,
                       bool directed, std::optional<std::vector<int>> labels) {
             const int n = static_cast<int>(features.rows());
             return SparseNetwork(n, std::move(features), std::move(edges), directed,
                                  std::move(labels));
           }),
           py::arg("features"), py::arg("edges"), py::arg("directed") = false,
           py::arg("labels") = py::none())
      .def_property_readonly("num_nodes", &SparseNetwork::num_nodes)
      .def_property_readonly("num_features", &SparseNetwork::num_features)
      .def_property_readonly("directed", &SparseNetwork::directed)
      .def_property_readonly("features",
                             [](const SparseNetwork& n) -> const Eigen::MatrixXd& {
                               return n.features();
                             })
      .def_property_readonly("edges", [](const SparseNetwork& n) { return n.edges(); })
      .def_property_readonly("labels", [](const SparseNetwork& n) { return n.labels(); })
      .def("__repr__", [](const SparseNetwork& n) {
        return "Network(num_nodes=" + std::to_string(n.num_nodes()) +
               ", num_features=" + std::to_string(n.num_features()) +
               ", edges=" + std::to_string(n.edges().size()) + ")";
      });

  m.def("synthetic", &make_synthetic, py::arg("num_nodes") = 500, py::arg("num_features") = 8,
        py::arg("blocks") = 4, py::arg("p_in") = 0.08, py::arg("p_out") = 0.01,
        py::arg("contextual_fraction") = 0.025, py::arg("structural_fraction") = 0.025,
        py::arg("clique_size") = 8, py::arg("feature_shift") = 6.0, py::arg("seed") = 0,
        "Stochastic block model network with planted contextual/structural anomalies.");

  m.def("load_bundle", &load_bundle, py::arg("path"));
  m.def(
      "save_bundle",
      [](const SparseNetwork& net, const std::string& path, const std::string& name) {
        save_bundle(net, path, name);
      },
      py::arg("net"), py::arg("path"), py::arg("name") = "bundle");

  py::class_<Model>(m, "Model")
      .def_property_readonly("loss_curve", &Model::loss_curve)
      .def_property_readonly("alpha", [](const Model& md) { return md.ck.alpha; })
      .def_property_readonly("hidden_dim", [](const Model& md) { return md.ck.model.hidden_dim; })
      .def("save", [](const Model& md, const std::string& dir) { save_checkpoint(md.ck, dir); },
           py::arg("path"))
      .def("score", &Model::score, py::arg("net"), py::arg("levels") = 4,
           py::arg("samples_per_level") = 3, py::arg("alpha") = py::none(),
           py::arg("penalty") = "snr", py::arg("dissimilarity") = "matrix",
           py::arg("solver") = "em", py::arg("steps_per_unit_time") = 100, py::arg("seed") = 0,
           "Anomaly score per node, higher = more anomalous.");

  m.def("train", &train_network, py::arg("net"), py::arg("epochs") = 30,
        py::arg("batch_size") = 64, py::arg("lr") = 0.01, py::arg("hidden_dim") = 8,
        py::arg("alpha") = 0.5, py::arg("weight_decay") = 0.01, py::arg("seed") = 0,
        py::arg("hops") = 1, py::arg("max_nodes") = 32,
        "Train the two denoising score networks on every ego-graph of the network.");

  m.def(
      "load_model",
      [](const std::string& dir) {
        Model md;
        md.ck = load_checkpoint(dir);
        return md;
      },
      py::arg("path"));

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return roc_auc(make_labeled(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "average_precision",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return average_precision(make_labeled(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "recall_at_k",
      [](const std::vector<double>& scores, const std::vector<int>& labels, int k) {
        return recall_at_k(make_labeled(scores, labels), k);
      },
      py::arg("scores"), py::arg("labels"), py::arg("k") = -1);

  m.def(
      "extract_ego",
      [](const SparseNetwork& net, int v, int hops) {
        const DenseEgoGraph g = extract_ego(net, v, hops);
        return py::make_tuple(g.x, g.a, g.mask, g.node_ids);
      },
      py::arg("net"), py::arg("node"), py::arg("hops") = 1,
      "Dense ego-graph around a node: (features, adjacency, mask, node_ids).");

  m.def(
      "normalized_energy",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& a) {
        return normalized_energy(x, a, Eigen::VectorXd::Ones(x.rows()));
      },
      py::arg("features"), py::arg("adjacency"),
      "Dirichlet energy of features on the normalized Laplacian, scaled to [0, 2].");
}
