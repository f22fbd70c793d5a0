#ifndef GSD_GRAPH_HPP
#define GSD_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gsd {

// Undirected, unweighted, self-loop-free graph. Edges are stored once in
// canonical (min, max) order; the neighbor CSR is symmetric and sorted.
// Self-loops exist only implicitly through the self-inclusive degree.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> adj_offsets;  // size num_nodes + 1
  std::vector<int> adj_cols;     // neighbors, ascending within each row
  std::vector<int> degrees;            // |N(i)|
  std::vector<int> degrees_self_loop;  // |N(i)| + 1

  int num_edges() const { return static_cast<int>(edges.size()); }

  std::span<const int> neighbors(int i) const {
    return {adj_cols.data() + adj_offsets[i],
            static_cast<std::size_t>(adj_offsets[i + 1] - adj_offsets[i])};
  }

  bool has_edge(int u, int v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }
};

// Symmetrizes, deduplicates, and drops self-loops. Endpoints are validated
// against num_nodes.
inline Graph build_graph(const std::vector<std::pair<int, int>>& edge_list, int num_nodes) {
  if (num_nodes <= 0) throw std::invalid_argument("build_graph: num_nodes must be positive");
  std::vector<std::pair<int, int>> canon;
  canon.reserve(edge_list.size());
  for (auto [u, v] : edge_list) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("build_graph: edge endpoint out of range");
    if (u == v) continue;
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  Graph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(canon);
  g.degrees.assign(num_nodes, 0);
  for (auto [u, v] : g.edges) {
    ++g.degrees[u];
    ++g.degrees[v];
  }
  g.adj_offsets.assign(num_nodes + 1, 0);
  for (int i = 0; i < num_nodes; ++i) g.adj_offsets[i + 1] = g.adj_offsets[i] + g.degrees[i];
  g.adj_cols.resize(g.adj_offsets.back());
  std::vector<int> fill(g.adj_offsets.begin(), g.adj_offsets.end() - 1);
  for (auto [u, v] : g.edges) {
    g.adj_cols[fill[u]++] = v;
    g.adj_cols[fill[v]++] = u;
  }
  for (int i = 0; i < num_nodes; ++i)
    std::sort(g.adj_cols.begin() + g.adj_offsets[i], g.adj_cols.begin() + g.adj_offsets[i + 1]);
  g.degrees_self_loop.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) g.degrees_self_loop[i] = g.degrees[i] + 1;
  return g;
}

struct LocalSmoothness {
  std::vector<double> values;          // in [0, 1]
  std::vector<std::uint8_t> isolated;  // 1 where the value is the vacuous 1.0
};

// Fraction of each node's neighbors (self excluded) that share its label.
// Isolated nodes have no neighbors to disagree with; they get 1.0 and are
// flagged so callers can exclude them.
inline LocalSmoothness local_label_smoothness(const Graph& g, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != g.num_nodes)
    throw std::invalid_argument("local_label_smoothness: labels must cover all nodes");
  LocalSmoothness out;
  out.values.resize(g.num_nodes);
  out.isolated.assign(g.num_nodes, 0);
  for (int i = 0; i < g.num_nodes; ++i) {
    auto nb = g.neighbors(i);
    if (nb.empty()) {
      out.values[i] = 1.0;
      out.isolated[i] = 1;
      continue;
    }
    int same = 0;
    for (int j : nb)
      if (labels[j] == labels[i]) ++same;
    out.values[i] = static_cast<double>(same) / static_cast<double>(nb.size());
  }
  return out;
}

}  // namespace gsd

#endif  // GSD_GRAPH_HPP
