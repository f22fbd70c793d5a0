#ifndef GSD_DATASET_HPP
#define GSD_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsd/errors.hpp"
#include "gsd/graph.hpp"
#include "gsd/rng.hpp"
#include "gsd/signal.hpp"

namespace gsd {

// Node-classification dataset: graph, input features, class ids, and
// disjoint train/val/test index sets. Label -1 marks an unlabeled node,
// which may not appear in any split.
struct Dataset {
  Graph graph;
  Signal features;
  std::vector<int> labels;
  std::vector<int> train_idx, val_idx, test_idx;
  int num_classes = 0;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;  // blank
}

inline std::vector<double> parse_reals(const std::string& line, const std::string& path,
                                       std::size_t row) {
  std::vector<double> out;
  const char* p = line.c_str();
  const char* last = p + line.size();
  while (p < last) {
    while (p < last && (*p == '\t' || *p == ' ')) ++p;
    if (p == last) break;
    double v = 0.0;
    const auto [next, ec] = std::from_chars(p, last, v);
    if (ec != std::errc{}) {
      std::ostringstream msg;
      msg << path << ": row " << row << ": cannot parse '" << p << "'";
      throw IoError(msg.str());
    }
    out.push_back(v);
    p = next;
  }
  return out;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Edge lists: one "u<TAB>v" pair per line, 0-indexed, '#' comments allowed.
// --------------------------------------------------------------------------

inline std::vector<std::pair<int, int>> load_edge_list(const std::string& path) {
  std::vector<std::pair<int, int>> edges;
  const auto lines = detail::read_lines(path);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (detail::skippable(lines[r])) continue;
    long u = 0, v = 0;
    if (std::sscanf(lines[r].c_str(), "%ld %ld", &u, &v) != 2) {
      std::ostringstream msg;
      msg << path << ": row " << (r + 1) << ": expected 'u<TAB>v'";
      throw IoError(msg.str());
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  return edges;
}

inline void save_edge_list(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (auto [u, v] : g.edges) out << u << '\t' << v << '\n';
  if (!out) throw IoError("write failed for " + path);
}

// --------------------------------------------------------------------------
// Signal files: header "N<TAB>d", then N rows of d reals, printed with 17
// significant digits so the round-trip is lossless.
// --------------------------------------------------------------------------

inline void save_signal(const std::string& path, const Signal& s) {
  if (s.cols <= 0 || s.rows <= 0)
    throw std::invalid_argument("save_signal: signal must be non-empty");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << s.rows << '\t' << s.cols << '\n';
  char buf[40];
  for (int i = 0; i < s.rows; ++i) {
    for (int c = 0; c < s.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", s(i, c));
      out << buf << (c + 1 == s.cols ? '\n' : '\t');
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

inline Signal load_signal(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw IoError(path + ": empty signal file");
  long rows = 0, cols = 0;
  if (std::sscanf(lines[0].c_str(), "%ld %ld", &rows, &cols) != 2 || rows <= 0 || cols <= 0)
    throw IoError(path + ": bad header, expected 'N<TAB>d'");
  Signal s(static_cast<int>(rows), static_cast<int>(cols));
  int filled = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (detail::skippable(lines[r])) continue;
    const auto vals = detail::parse_reals(lines[r], path, r + 1);
    if (static_cast<long>(vals.size()) != cols) {
      std::ostringstream msg;
      msg << path << ": row " << (r + 1) << ": expected " << cols << " values, got "
          << vals.size();
      throw IoError(msg.str());
    }
    if (filled >= rows) throw IoError(path + ": more rows than the header declares");
    std::copy(vals.begin(), vals.end(), s.row(filled));
    ++filled;
  }
  if (filled != rows) {
    std::ostringstream msg;
    msg << path << ": header declares " << rows << " rows but " << filled << " were found";
    throw IoError(msg.str());
  }
  return s;
}

// --------------------------------------------------------------------------
// Dataset directories: edges.tsv, features.tsv, labels.tsv, split.json.
// --------------------------------------------------------------------------

namespace detail {

inline std::vector<int> parse_split(const nlohmann::json& j, const char* key,
                                    const std::string& path) {
  if (!j.contains(key)) throw IoError(path + ": split.json is missing \"" + key + "\"");
  std::vector<int> out;
  for (const auto& v : j.at(key)) out.push_back(v.get<int>());
  return out;
}

inline void validate_split(const Dataset& ds, const std::vector<int>& idx, const char* name,
                           std::vector<char>& used) {
  for (int i : idx) {
    if (i < 0 || i >= ds.graph.num_nodes) {
      std::ostringstream msg;
      msg << "split \"" << name << "\" references node " << i << " outside [0, "
          << ds.graph.num_nodes << ")";
      throw IoError(msg.str());
    }
    if (used[i]) {
      std::ostringstream msg;
      msg << "node " << i << " appears in more than one split";
      throw IoError(msg.str());
    }
    used[i] = 1;
    if (ds.labels[i] < 0) {
      std::ostringstream msg;
      msg << "split \"" << name << "\" contains unlabeled node " << i;
      throw IoError(msg.str());
    }
  }
}

}  // namespace detail

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string edges_path = (fs::path(dir) / "edges.tsv").string();
  const std::string features_path = (fs::path(dir) / "features.tsv").string();
  const std::string labels_path = (fs::path(dir) / "labels.tsv").string();
  const std::string split_path = (fs::path(dir) / "split.json").string();

  Dataset ds;

  {  // features define N and d
    const auto lines = detail::read_lines(features_path);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < lines.size(); ++r) {
      if (detail::skippable(lines[r])) continue;
      rows.push_back(detail::parse_reals(lines[r], features_path, r + 1));
      if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
        std::ostringstream msg;
        msg << features_path << ": row " << (r + 1) << ": expected " << rows.front().size()
            << " values, got " << rows.back().size();
        throw IoError(msg.str());
      }
      for (double v : rows.back())
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << features_path << ": row " << (r + 1) << ": non-finite feature value";
          throw IoError(msg.str());
        }
    }
    if (rows.empty()) throw IoError(features_path + ": no feature rows");
    ds.features = Signal(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(rows[i].begin(), rows[i].end(), ds.features.row(static_cast<int>(i)));
  }
  const int n = ds.features.rows;

  {  // labels, -1 = unlabeled
    const auto lines = detail::read_lines(labels_path);
    for (std::size_t r = 0; r < lines.size(); ++r) {
      if (detail::skippable(lines[r])) continue;
      long y = 0;
      if (std::sscanf(lines[r].c_str(), "%ld", &y) != 1) {
        std::ostringstream msg;
        msg << labels_path << ": row " << (r + 1) << ": expected one integer";
        throw IoError(msg.str());
      }
      ds.labels.push_back(static_cast<int>(y));
    }
    if (static_cast<int>(ds.labels.size()) != n) {
      std::ostringstream msg;
      msg << labels_path << ": " << ds.labels.size() << " labels for " << n << " feature rows";
      throw IoError(msg.str());
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (ds.labels[i] < -1) {
        std::ostringstream msg;
        msg << labels_path << ": row " << (i + 1) << ": label " << ds.labels[i]
            << " out of range";
        throw IoError(msg.str());
      }
      ds.num_classes = std::max(ds.num_classes, ds.labels[i] + 1);
    }
  }

  try {
    ds.graph = build_graph(load_edge_list(edges_path), n);
  } catch (const std::invalid_argument& e) {
    throw IoError(edges_path + ": " + e.what());
  }

  {
    std::ifstream in(split_path);
    if (!in) throw IoError("cannot open " + split_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(split_path + ": " + e.what());
    }
    ds.train_idx = detail::parse_split(j, "train", split_path);
    ds.val_idx = detail::parse_split(j, "val", split_path);
    ds.test_idx = detail::parse_split(j, "test", split_path);
  }
  std::vector<char> used(n, 0);
  detail::validate_split(ds, ds.train_idx, "train", used);
  detail::validate_split(ds, ds.val_idx, "val", used);
  detail::validate_split(ds, ds.test_idx, "test", used);
  return ds;
}

inline void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_edge_list((fs::path(dir) / "edges.tsv").string(), ds.graph);
  {  // features.tsv has no header row, just N lines of d reals
    std::ofstream out((fs::path(dir) / "features.tsv").string());
    if (!out) throw IoError("cannot write features.tsv under " + dir);
    char buf[40];
    for (int i = 0; i < ds.features.rows; ++i)
      for (int c = 0; c < ds.features.cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, c));
        out << buf << (c + 1 == ds.features.cols ? '\n' : '\t');
      }
  }
  {
    std::ofstream out((fs::path(dir) / "labels.tsv").string());
    if (!out) throw IoError("cannot write labels.tsv under " + dir);
    for (int y : ds.labels) out << y << '\n';
  }
  {
    nlohmann::json j;
    j["train"] = ds.train_idx;
    j["val"] = ds.val_idx;
    j["test"] = ds.test_idx;
    std::ofstream out((fs::path(dir) / "split.json").string());
    if (!out) throw IoError("cannot write split.json under " + dir);
    out << j.dump(2) << '\n';
  }
}

// --------------------------------------------------------------------------
// Graph perturbation
// --------------------------------------------------------------------------

enum class PerturbMode { RandomFlip, LoadPrecomputed };

struct PerturbationSpec {
  double rate = 0.0;  // in [0, 1]
  PerturbMode mode = PerturbMode::RandomFlip;
  std::string path;  // edge file for LoadPrecomputed
  std::uint64_t seed = 0;
};

// RandomFlip removes ceil(rate*|E|/2) same-label edges and adds the same
// number of cross-label non-edges, mimicking how structural noise lowers
// label homophily. Edge count and node count are preserved.
inline Graph perturb_graph(const Graph& g, const PerturbationSpec& spec,
                           const std::vector<int>* labels = nullptr) {
  if (spec.rate < 0.0 || spec.rate > 1.0)
    throw std::invalid_argument("perturb_graph: rate must lie in [0, 1]");
  if (spec.mode == PerturbMode::LoadPrecomputed)
    return build_graph(load_edge_list(spec.path), g.num_nodes);
  if (spec.rate == 0.0) return g;
  if (labels == nullptr || static_cast<int>(labels->size()) != g.num_nodes)
    throw std::invalid_argument("perturb_graph: RandomFlip needs one label per node");

  const int flips = static_cast<int>(
      std::ceil(spec.rate * static_cast<double>(g.num_edges()) / 2.0));

  Rng rng(spec.seed, 0x7065727475726221ULL);
  std::vector<int> same_label_edges;
  for (int e = 0; e < g.num_edges(); ++e)
    if ((*labels)[g.edges[e].first] == (*labels)[g.edges[e].second]) same_label_edges.push_back(e);
  if (static_cast<int>(same_label_edges.size()) < flips)
    throw std::invalid_argument("perturb_graph: not enough same-label edges to remove");
  // Fisher-Yates prefix of size `flips`
  std::vector<char> removed(g.num_edges(), 0);
  for (int k = 0; k < flips; ++k) {
    const int pick = k + rng.uniform_int(static_cast<int>(same_label_edges.size()) - k);
    std::swap(same_label_edges[k], same_label_edges[pick]);
    removed[same_label_edges[k]] = 1;
  }

  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e)
    if (!removed[e]) edges.push_back(g.edges[e]);

  std::set<std::pair<int, int>> present(g.edges.begin(), g.edges.end());
  int added = 0;
  long attempts = 0;
  const long attempt_cap = 1000L * (flips + 1) + 1000L * g.num_nodes;
  while (added < flips) {
    if (++attempts > attempt_cap)
      throw std::invalid_argument("perturb_graph: not enough cross-label non-edges to add");
    int u = rng.uniform_int(g.num_nodes);
    int v = rng.uniform_int(g.num_nodes);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if ((*labels)[u] == (*labels)[v]) continue;
    if (present.count({u, v})) continue;
    present.insert({u, v});
    edges.emplace_back(u, v);
    ++added;
  }
  return build_graph(edges, g.num_nodes);
}

}  // namespace gsd

#endif  // GSD_DATASET_HPP
