#include "egodiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace egodiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string line_error(const std::string& file, std::size_t line, const std::string& what) {
  return file + " line " + std::to_string(line) + ": " + what;
}

double parse_double(const std::string& token, const std::string& file, std::size_t line) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(line_error(file, line, "invalid number '" + token + "'"));
  }
  return v;
}

long parse_long(const std::string& token, const std::string& file, std::size_t line) {
  long v = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(line_error(file, line, "invalid integer '" + token + "'"));
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

}  // namespace

SparseNetwork load_bundle(const std::string& dir) {
  const fs::path base(dir);
  const std::string meta_path = (base / "meta.json").string();
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw DataError("missing " + meta_path);
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw DataError(meta_path + ": invalid JSON: " + e.what());
  }
  int num_nodes = 0;
  int num_features = 0;
  bool directed = false;
  try {
    num_nodes = meta.at("num_nodes").get<int>();
    num_features = meta.at("num_features").get<int>();
    directed = meta.at("directed").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(meta_path + ": " + e.what());
  }

  const std::string edges_path = (base / "edges.tsv").string();
  std::vector<std::pair<int, int>> edges;
  {
    const std::vector<std::string> lines = read_lines(edges_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const std::vector<std::string> parts = split(lines[i], '\t');
      if (parts.size() != 2) {
        throw DataError(line_error(edges_path, i + 1, "expected 'src<TAB>dst'"));
      }
      edges.emplace_back(static_cast<int>(parse_long(parts[0], edges_path, i + 1)),
                         static_cast<int>(parse_long(parts[1], edges_path, i + 1)));
    }
  }

  const std::string feat_path = (base / "features.tsv").string();
  Eigen::MatrixXd features(num_nodes, num_features);
  {
    const std::vector<std::string> lines = read_lines(feat_path);
    if (static_cast<int>(lines.size()) != num_nodes) {
      throw DataError(feat_path + ": expected " + std::to_string(num_nodes) + " rows, found " +
                      std::to_string(lines.size()));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::vector<std::string> parts = split(lines[i], '\t');
      if (static_cast<int>(parts.size()) != num_features) {
        throw DataError(line_error(feat_path, i + 1,
                                   "expected " + std::to_string(num_features) + " columns, found " +
                                       std::to_string(parts.size())));
      }
      for (int c = 0; c < num_features; ++c) {
        features(static_cast<Eigen::Index>(i), c) = parse_double(parts[static_cast<std::size_t>(c)], feat_path, i + 1);
      }
    }
  }

  std::optional<std::vector<int>> labels;
  const fs::path labels_path = base / "labels.tsv";
  if (fs::exists(labels_path)) {
    const std::vector<std::string> lines = read_lines(labels_path.string());
    if (static_cast<int>(lines.size()) != num_nodes) {
      throw DataError(labels_path.string() + ": expected " + std::to_string(num_nodes) +
                      " rows, found " + std::to_string(lines.size()));
    }
    std::vector<int> lab(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const long v = parse_long(lines[i], labels_path.string(), i + 1);
      if (v != 0 && v != 1) {
        throw DataError(line_error(labels_path.string(), i + 1, "labels must be 0 or 1"));
      }
      lab[i] = static_cast<int>(v);
    }
    labels = std::move(lab);
  }

  try {
    return SparseNetwork(num_nodes, std::move(features), std::move(edges), directed,
                         std::move(labels));
  } catch (const ContractError& e) {
    throw DataError(dir + ": inconsistent bundle: " + e.what());
  }
}

void save_bundle(const SparseNetwork& net, const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const fs::path base(dir);

  json meta;
  meta["name"] = name;
  meta["num_nodes"] = net.num_nodes();
  meta["num_features"] = net.num_features();
  meta["directed"] = net.directed();
  std::ofstream meta_out = open_out((base / "meta.json").string());
  meta_out << meta.dump(2) << "\n";

  std::ofstream edges_out = open_out((base / "edges.tsv").string());
  for (const auto& [s, d] : net.edges()) edges_out << s << "\t" << d << "\n";

  std::ofstream feat_out = open_out((base / "features.tsv").string());
  const Eigen::MatrixXd& x = net.features();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c) feat_out << "\t";
      feat_out << format_g17(x(r, c));
    }
    feat_out << "\n";
  }

  if (net.labels()) {
    std::ofstream lab_out = open_out((base / "labels.tsv").string());
    for (int l : *net.labels()) lab_out << l << "\n";
  }
}

void SynthConfig::validate() const {
  if (num_nodes < 2) throw ContractError("SynthConfig: num_nodes must be >= 2");
  if (num_features < 1) throw ContractError("SynthConfig: num_features must be >= 1");
  if (blocks < 1 || blocks > num_nodes) throw ContractError("SynthConfig: blocks must lie in [1, num_nodes]");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0) {
    throw ContractError("SynthConfig: edge probabilities must lie in [0, 1]");
  }
  if (!(p_in > p_out)) throw ContractError("SynthConfig: p_in must exceed p_out");
  if (contextual_fraction < 0.0 || contextual_fraction > 0.5 || structural_fraction < 0.0 ||
      structural_fraction > 0.5) {
    throw ContractError("SynthConfig: anomaly fractions must lie in [0, 0.5]");
  }
  if (clique_size < 2) throw ContractError("SynthConfig: clique_size must be >= 2");
  if (feature_shift <= 0.0) throw ContractError("SynthConfig: feature_shift must be > 0");
}

SparseNetwork generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.num_nodes;
  const int f = cfg.num_features;
  Rng rng = make_rng(cfg.seed, {stream::synth});

  auto block_of = [&](int v) {
    return static_cast<int>(static_cast<long long>(v) * cfg.blocks / n);
  };

  Eigen::MatrixXd mu(cfg.blocks, f);
  for (int b = 0; b < cfg.blocks; ++b) {
    for (int c = 0; c < f; ++c) mu(b, c) = rng.normal();
  }

  std::set<std::pair<int, int>> edge_set;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = block_of(i) == block_of(j) ? cfg.p_in : cfg.p_out;
      if (rng.u01() < p) edge_set.emplace(i, j);
    }
  }

  Eigen::MatrixXd x(n, f);
  for (int v = 0; v < n; ++v) {
    for (int c = 0; c < f; ++c) x(v, c) = mu(block_of(v), c) + rng.normal();
  }

  const int k_ctx = static_cast<int>(std::lround(cfg.contextual_fraction * n));
  const int k_str = static_cast<int>(std::lround(cfg.structural_fraction * n));
  const std::vector<int> planted = rng.sample_without_replacement(n, k_ctx + k_str);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int v : planted) labels[static_cast<std::size_t>(v)] = 1;

  // Contextual: place the node at distance feature_shift from its block mean
  // plus small jitter; rejection keeps the l2 shift above feature_shift / 2.
  for (int i = 0; i < k_ctx; ++i) {
    const int v = planted[static_cast<std::size_t>(i)];
    const int b = block_of(v);
    Eigen::VectorXd dir(f);
    for (int c = 0; c < f; ++c) dir(c) = rng.normal();
    if (dir.norm() < 1e-12) dir.setOnes();
    dir.normalize();
    const Eigen::VectorXd base = mu.row(b).transpose() + cfg.feature_shift * dir;
    Eigen::VectorXd candidate = base;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Eigen::VectorXd jitter(f);
      for (int c = 0; c < f; ++c) jitter(c) = 0.5 * rng.normal();
      candidate = base + jitter;
      if ((candidate - mu.row(b).transpose()).norm() > cfg.feature_shift / 2.0) break;
      candidate = base;
    }
    x.row(v) = candidate.transpose();
  }

  // Structural: chunk the remaining planted nodes into cliques.
  if (k_str > 0) {
    if (cfg.clique_size > k_str) {
      throw DataError("generate_synthetic: clique_size " + std::to_string(cfg.clique_size) +
                      " exceeds the " + std::to_string(k_str) + " structural anomaly nodes");
    }
    std::vector<std::vector<int>> cliques;
    std::vector<int> current;
    for (int i = k_ctx; i < k_ctx + k_str; ++i) {
      current.push_back(planted[static_cast<std::size_t>(i)]);
      if (static_cast<int>(current.size()) == cfg.clique_size) {
        cliques.push_back(current);
        current.clear();
      }
    }
    if (current.size() == 1) {
      cliques.back().push_back(current.front());  // avoid a degenerate 1-clique
    } else if (current.size() >= 2) {
      cliques.push_back(current);
    }
    for (const std::vector<int>& clique : cliques) {
      for (std::size_t a = 0; a < clique.size(); ++a) {
        for (std::size_t b = a + 1; b < clique.size(); ++b) {
          edge_set.emplace(std::min(clique[a], clique[b]), std::max(clique[a], clique[b]));
        }
      }
    }
  }

  std::vector<std::pair<int, int>> edges(edge_set.begin(), edge_set.end());
  return SparseNetwork(n, std::move(x), std::move(edges), false, std::move(labels));
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_scores_csv(const std::string& path, const ScoreReport& report,
                      const std::optional<std::vector<int>>& labels) {
  std::ofstream out = open_out(path);
  out << (labels ? "node_id,score,label\n" : "node_id,score\n");
  for (int v : report.ranking) {
    out << v << "," << format_g17(report.scores[static_cast<std::size_t>(v)]);
    if (labels) out << "," << (*labels)[static_cast<std::size_t>(v)];
    out << "\n";
  }
}

void write_breakdown_csv(const std::string& path, const ScoreReport& report) {
  std::ofstream out = open_out(path);
  out << "node_id,tau,sample,dissimilarity,energy_orig,energy_recon\n";
  for (const BreakdownRow& row : report.breakdown) {
    out << row.node_id << "," << format_g17(row.tau) << "," << row.sample << ","
        << format_g17(row.dissimilarity) << "," << format_g17(row.energy_orig) << ","
        << format_g17(row.energy_recon) << "\n";
  }
}

void write_loss_csv(const std::string& path, const std::vector<std::array<double, 2>>& curve) {
  std::ofstream out = open_out(path);
  out << "epoch,loss_x,loss_a\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    out << e << "," << format_g17(curve[e][0]) << "," << format_g17(curve[e][1]) << "\n";
  }
}

void write_profile_csv(const std::string& path, const std::vector<ProfileRow>& rows) {
  std::ofstream out = open_out(path);
  out << "solver,tau,error_x,error_a\n";
  for (const ProfileRow& row : rows) {
    out << row.solver << "," << format_g17(row.tau) << "," << format_g17(row.error_x) << ","
        << format_g17(row.error_a) << "\n";
  }
}

void write_energy_csv(const std::string& path, const std::vector<EnergyRow>& rows) {
  std::ofstream out = open_out(path);
  out << "node_id,tau,sample,energy_orig,energy_recon,energy_diff\n";
  for (const EnergyRow& row : rows) {
    out << row.node_id << "," << format_g17(row.tau) << "," << row.sample << ","
        << format_g17(row.energy_orig) << "," << format_g17(row.energy_recon) << ","
        << format_g17(row.energy_diff) << "\n";
  }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out = open_out(path);
  out << "trial,metric,value\n";
  for (const MetricRow& row : rows) {
    out << row.trial << "," << row.metric << "," << format_g17(row.value) << "\n";
  }
}

ScoresFile read_scores_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty file");
  const std::vector<std::string> header = split(lines[0], ',');
  const bool with_labels = header.size() == 3 && header[2] == "label";
  if (!(header.size() == 2 || with_labels) || header[0] != "node_id" || header[1] != "score") {
    throw DataError(path + ": expected header 'node_id,score[,label]', found '" + lines[0] + "'");
  }
  ScoresFile sf;
  if (with_labels) sf.labels.emplace();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::vector<std::string> parts = split(lines[i], ',');
    if (parts.size() != header.size()) {
      throw DataError(line_error(path, i + 1, "expected " + std::to_string(header.size()) +
                                                  " columns, found " +
                                                  std::to_string(parts.size())));
    }
    sf.node_ids.push_back(static_cast<int>(parse_long(parts[0], path, i + 1)));
    sf.scores.push_back(parse_double(parts[1], path, i + 1));
    if (with_labels) {
      const long v = parse_long(parts[2], path, i + 1);
      if (v != 0 && v != 1) throw DataError(line_error(path, i + 1, "labels must be 0 or 1"));
      sf.labels->push_back(static_cast<int>(v));
    }
  }
  if (sf.node_ids.empty()) throw DataError(path + ": no score rows");
  return sf;
}

}  // namespace egodiff
