#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "gsd/dataset.hpp"
#include "gsd/certify.hpp"
#include "support/fixtures.hpp"

using namespace gsd;
using namespace gsd::testsupport;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gsd_test_" + std::to_string(Rng(std::random_device{}()).next_u64() % 1000000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

void write_minimal_pair(const TempDir& dir) {
  write_file(dir.file("edges.tsv"), "# tiny fixture\n0\t1\n");
  write_file(dir.file("features.tsv"), "1.0\t0.0\n0.0\t1.0\n");
  write_file(dir.file("labels.tsv"), "0\n1\n");
  write_file(dir.file("split.json"), R"({"train":[0],"val":[1],"test":[]})");
}

}  // namespace

TEST_CASE("load_dataset: minimal two-node fixture") {
  TempDir dir;
  write_minimal_pair(dir);
  const Dataset ds = load_dataset(dir.str());
  CHECK(ds.graph.num_nodes == 2);
  CHECK(ds.graph.degrees[0] == 1);
  CHECK(ds.graph.degrees[1] == 1);
  CHECK(ds.features.cols == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.train_idx == std::vector<int>{0});
}

TEST_CASE("load_dataset composed with save_dataset is the identity") {
  const Dataset ds = two_cluster_toy();
  TempDir dir;
  save_dataset(dir.str(), ds);
  const Dataset back = load_dataset(dir.str());
  CHECK(back.graph.num_nodes == ds.graph.num_nodes);
  CHECK(back.graph.edges == ds.graph.edges);
  CHECK(back.labels == ds.labels);
  CHECK(back.train_idx == ds.train_idx);
  CHECK(back.val_idx == ds.val_idx);
  CHECK(back.test_idx == ds.test_idx);
  REQUIRE(back.features.same_shape(ds.features));
  CHECK(max_abs_diff(back.features, ds.features) == 0.0);  // 17 digits round-trip
}

TEST_CASE("load_dataset: error contracts carry the offending row") {
  TempDir dir;
  write_minimal_pair(dir);
  SUBCASE("missing file") {
    fs::remove(dir.file("labels.tsv"));
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("feature row with wrong arity") {
    write_file(dir.file("features.tsv"), "1.0\t0.0\n0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("row 2"), IoError);
  }
  SUBCASE("label count mismatch") {
    write_file(dir.file("labels.tsv"), "0\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("label below -1") {
    write_file(dir.file("labels.tsv"), "0\n-2\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("edge endpoint outside the feature rows") {
    write_file(dir.file("edges.tsv"), "0\t7\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("overlapping masks") {
    write_file(dir.file("split.json"), R"({"train":[0],"val":[0],"test":[]})");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("unlabeled node inside a mask") {
    write_file(dir.file("labels.tsv"), "0\n-1\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("non-finite feature value") {
    write_file(dir.file("features.tsv"), "1.0\t0.0\nnan\t1.0\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()), doctest::Contains("row 2"), IoError);
  }
  SUBCASE("text garbage in features") {
    write_file(dir.file("features.tsv"), "1.0\t0.0\n0.5\tpotato\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
  SUBCASE("text garbage in edges") {
    write_file(dir.file("edges.tsv"), "zero\tone\n");
    CHECK_THROWS_AS(load_dataset(dir.str()), IoError);
  }
}

TEST_CASE("load_dataset: unlabeled nodes outside masks are fine") {
  TempDir dir;
  write_file(dir.file("edges.tsv"), "0\t1\n1\t2\n");
  write_file(dir.file("features.tsv"), "1\n2\n3\n");
  write_file(dir.file("labels.tsv"), "0\n1\n-1\n");
  write_file(dir.file("split.json"), R"({"train":[0],"val":[1],"test":[]})");
  const Dataset ds = load_dataset(dir.str());
  CHECK(ds.labels[2] == -1);
  CHECK(ds.num_classes == 2);
}

TEST_CASE("signal files: lossless round trip") {
  Rng rng(1);
  Signal s = random_signal(rng, 10, 3, -100.0, 100.0);
  s(9, 2) = std::numeric_limits<double>::infinity();  // round trip is unconditional
  TempDir dir;
  save_signal(dir.file("sig.tsv"), s);
  const Signal back = load_signal(dir.file("sig.tsv"));
  REQUIRE(back.same_shape(s));
  for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(back.data[i] == s.data[i]);
}

TEST_CASE("signal files: empty signals and bad headers are rejected") {
  TempDir dir;
  CHECK_THROWS_AS(save_signal(dir.file("sig.tsv"), Signal::zeros(3, 0)), std::invalid_argument);
  write_file(dir.file("bad1.tsv"), "3\t2\n1\t2\n3\t4\n");  // header says 3 rows, gives 2
  CHECK_THROWS_AS(load_signal(dir.file("bad1.tsv")), IoError);
  write_file(dir.file("bad2.tsv"), "2\t2\n1\t2\t9\n3\t4\n");  // row arity
  CHECK_THROWS_AS(load_signal(dir.file("bad2.tsv")), IoError);
  write_file(dir.file("bad3.tsv"), "0\t2\n");
  CHECK_THROWS_AS(load_signal(dir.file("bad3.tsv")), IoError);
}

TEST_CASE("perturb_graph: rate zero is the identity") {
  const Dataset ds = two_cluster_toy();
  PerturbationSpec spec;
  spec.rate = 0.0;
  const Graph out = perturb_graph(ds.graph, spec, &ds.labels);
  CHECK(out.edges == ds.graph.edges);
}

TEST_CASE("perturb_graph: flip counts and edge budget") {
  const Dataset ds = planted_partition(2, 20, 0.5, 0.02, 0.05, 3);
  const int e = ds.graph.num_edges();
  PerturbationSpec spec;
  spec.rate = 0.1;
  spec.seed = 5;
  const Graph out = perturb_graph(ds.graph, spec, &ds.labels);
  CHECK(out.num_edges() == e);  // removals balanced by additions
  CHECK(out.num_nodes == ds.graph.num_nodes);

  const int flips = static_cast<int>(std::ceil(0.1 * e / 2.0));
  int removed = 0, added = 0;
  for (auto edge : ds.graph.edges)
    if (!out.has_edge(edge.first, edge.second)) ++removed;
  for (auto edge : out.edges)
    if (!ds.graph.has_edge(edge.first, edge.second)) ++added;
  CHECK(removed == flips);
  CHECK(added == flips);
  // every added edge crosses labels, every removed edge was within a label
  for (auto edge : out.edges)
    if (!ds.graph.has_edge(edge.first, edge.second))
      CHECK(ds.labels[edge.first] != ds.labels[edge.second]);
}

TEST_CASE("perturb_graph: deterministic per seed") {
  const Dataset ds = planted_partition(2, 15, 0.5, 0.05, 0.05, 4);
  PerturbationSpec spec;
  spec.rate = 0.2;
  spec.seed = 11;
  const Graph a = perturb_graph(ds.graph, spec, &ds.labels);
  const Graph b = perturb_graph(ds.graph, spec, &ds.labels);
  CHECK(a.edges == b.edges);
  spec.seed = 12;
  const Graph c = perturb_graph(ds.graph, spec, &ds.labels);
  CHECK(a.edges != c.edges);
}

TEST_CASE("perturb_graph: mean label smoothness strictly drops on homophilic graphs") {
  const Dataset ds = planted_partition(3, 15, 0.6, 0.02, 0.05, 9);
  PerturbationSpec spec;
  spec.rate = 0.25;
  spec.seed = 2;
  const Graph out = perturb_graph(ds.graph, spec, &ds.labels);
  auto mean_ls = [&](const Graph& g) {
    const LocalSmoothness ls = local_label_smoothness(g, ds.labels);
    double m = 0.0;
    for (double v : ls.values) m += v;
    return m / ls.values.size();
  };
  CHECK(mean_ls(out) < mean_ls(ds.graph));
}

TEST_CASE("perturb_graph: failure modes") {
  const Dataset ds = two_cluster_toy();
  PerturbationSpec spec;
  spec.rate = 0.5;
  CHECK_THROWS_AS(perturb_graph(ds.graph, spec, nullptr), std::invalid_argument);

  // all labels distinct: no same-label edge can be removed
  std::vector<int> labels(ds.graph.num_nodes);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
  CHECK_THROWS_AS(perturb_graph(ds.graph, spec, &labels), std::invalid_argument);

  // single label: no cross-label pair can be added
  std::vector<int> uniform(ds.graph.num_nodes, 0);
  CHECK_THROWS_AS(perturb_graph(ds.graph, spec, &uniform), std::invalid_argument);
}

TEST_CASE("perturb_graph: precomputed edge files replace the edge set") {
  const Dataset ds = two_cluster_toy();
  TempDir dir;
  write_file(dir.file("edges_0.10.tsv"), "0\t9\n1\t8\n");
  PerturbationSpec spec;
  spec.mode = PerturbMode::LoadPrecomputed;
  spec.path = dir.file("edges_0.10.tsv");
  const Graph out = perturb_graph(ds.graph, spec, nullptr);
  CHECK(out.num_nodes == ds.graph.num_nodes);
  CHECK(out.num_edges() == 2);
  CHECK(out.has_edge(0, 9));
}
