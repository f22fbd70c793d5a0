// Shared graph and dataset fixtures.
#ifndef GSD_TESTS_FIXTURES_HPP
#define GSD_TESTS_FIXTURES_HPP

#include <utility>
#include <vector>

#include "gsd/dataset.hpp"
#include "gsd/graph.hpp"
#include "gsd/rng.hpp"
#include "gsd/signal.hpp"

namespace gsd::testsupport {

inline Graph path3() { return build_graph({{0, 1}, {1, 2}}, 3); }
inline Graph triangle() { return build_graph({{0, 1}, {1, 2}, {0, 2}}, 3); }
inline Graph pair_edge() { return build_graph({{0, 1}}, 2); }

// Two fully connected 5-cliques joined by a single bridge; features are a
// noisy cluster indicator, so the task is linearly separable.
inline Dataset two_cluster_toy(std::uint64_t seed = 7) {
  std::vector<std::pair<int, int>> edges;
  for (int base : {0, 5})
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) edges.emplace_back(base + i, base + j);
  edges.emplace_back(4, 5);
  Dataset ds;
  ds.graph = build_graph(edges, 10);
  ds.features = Signal(10, 4);
  Rng rng(seed);
  for (int i = 0; i < 10; ++i) {
    const int cluster = i / 5;
    for (int c = 0; c < 4; ++c)
      ds.features(i, c) = (c % 2 == cluster ? 1.0 : 0.0) + 0.05 * rng.uniform(-1.0, 1.0);
    ds.labels.push_back(cluster);
  }
  ds.num_classes = 2;
  ds.train_idx = {0, 1, 5, 6};
  ds.val_idx = {2, 7};
  ds.test_idx = {3, 4, 8, 9};
  return ds;
}

// Planted-partition graph: `classes` groups of `per_class` nodes, edge
// probability p_in inside a group and p_out across groups, plus a noisy
// one-hot feature per class. Strongly homophilic for p_in >> p_out.
inline Dataset planted_partition(int classes, int per_class, double p_in, double p_out,
                                 double feature_noise, std::uint64_t seed) {
  const int n = classes * per_class;
  Rng rng(seed, 0xf17u);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i / per_class;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < (labels[i] == labels[j] ? p_in : p_out)) edges.emplace_back(i, j);
  // keep every node attached so splits always have neighbors
  Graph g = build_graph(edges, n);
  for (int i = 0; i < n; ++i)
    if (g.degrees[i] == 0) {
      int j = (i + 1 + rng.uniform_int(per_class - 1)) % per_class + (i / per_class) * per_class;
      if (j == i) j = (i / per_class) * per_class + (i + 1) % per_class;
      edges.emplace_back(i, j);
    }
  Dataset ds;
  ds.graph = build_graph(edges, n);
  ds.labels = labels;
  ds.num_classes = classes;
  ds.features = Signal(n, classes + 1);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c <= classes; ++c)
      ds.features(i, c) = (c == labels[i] ? 1.0 : 0.0) + feature_noise * rng.uniform(-1.0, 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const int slot = i % per_class;
    if (slot < per_class / 5)
      ds.train_idx.push_back(i);
    else if (slot < per_class * 2 / 5)
      ds.val_idx.push_back(i);
    else
      ds.test_idx.push_back(i);
  }
  return ds;
}

// Planted partition with sparse bag-of-words features: each class owns a
// block of `words_per_class` indicator features its members activate with
// probability p_word, on top of uniform background words. Single rows are
// weak evidence, so aggregation over the graph carries real weight.
inline Dataset planted_bow(int classes, int per_class, double p_in, double p_out, double p_word,
                           double p_background, std::uint64_t seed) {
  Dataset ds = planted_partition(classes, per_class, p_in, p_out, 0.0, seed);
  const int n = classes * per_class;
  const int words_per_class = 10;
  const int dim = classes * words_per_class + 20;
  Rng rng(seed, 0xb0du);
  ds.features = Signal(n, dim);
  for (int i = 0; i < n; ++i) {
    const int base = ds.labels[i] * words_per_class;
    for (int w = 0; w < words_per_class; ++w)
      if (rng.uniform() < p_word) ds.features(i, base + w) = 1.0;
    for (int w = 0; w < dim; ++w)
      if (rng.uniform() < p_background) ds.features(i, w) = 1.0;
  }
  return ds;
}

}  // namespace gsd::testsupport

#endif
