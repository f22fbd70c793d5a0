// Acceptance suite: one line per criterion, nonzero exit if any criterion
// that was asked to run fails.
//
//   acceptance                 run everything
//   acceptance --core          skip the criteria that need the Cora dataset
//   acceptance --quantitative  run only those criteria
//
// The Cora directory is taken from GSD_CORA_DIR, falling back to
// <source>/data/cora. The quantitative criteria fail with an explanation
// when the dataset is not present; they are the published desk-scale
// numbers and cannot run without it.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsd/aggregate.hpp"
#include "gsd/certify.hpp"
#include "gsd/dataset.hpp"
#include "gsd/denoise.hpp"
#include "gsd/train.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck_suite.hpp"

using namespace gsd;
using namespace gsd::testsupport;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& id, bool passed, const std::string& detail) {
  std::printf("%-4s %s  %s\n", id.c_str(), passed ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!passed) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string cora_dir() {
  if (const char* env = std::getenv("GSD_CORA_DIR")) return env;
  return std::string(GSD_SOURCE_DIR) + "/data/cora";
}

std::optional<Dataset> load_cora(std::string& why) {
  const std::string dir = cora_dir();
  if (!fs::exists(fs::path(dir) / "edges.tsv")) {
    why = "dataset not found at " + dir + " (set GSD_CORA_DIR)";
    return std::nullopt;
  }
  try {
    return load_dataset(dir);
  } catch (const std::exception& e) {
    why = e.what();
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

// Ten seeds of the full certification run through the real CLI binary.
void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  bool all_ok = true;
  std::string detail;
  for (int seed = 0; seed <= 9 && all_ok; ++seed) {
    std::ostringstream cmd;
    cmd << GSD_CLI_PATH << " verify --seed " << seed
        << " --trials 100 --max-nodes 8 --out " << (fs::temp_directory_path() / "accept_verify.json").string()
        << " >/dev/null 2>&1";
    const int status = std::system(cmd.str().c_str());
    if (WEXITSTATUS(status) != 0) {
      all_ok = false;
      detail = "seed " + std::to_string(seed) + " exited " + std::to_string(WEXITSTATUS(status));
    }
  }
  const double elapsed = seconds_since(start);
  if (all_ok && elapsed >= 60.0) {
    all_ok = false;
    detail = "runtime " + fmt(elapsed) + " s exceeds 60 s";
  }
  if (all_ok)
    detail = "verify exits 0 for seeds 0..9 (100 trials, N<=8) in " + fmt(elapsed) + " s";
  report("C1", all_ok, detail);
}

// Constant smoothness factors turn the adaptive propagation into the
// fixed-alpha one with alpha = 1/(1+c).
void criterion_2() {
  Rng rng(2025);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Graph g = random_connected_graph(rng, 3, 8);
    const Signal x = random_signal(rng, g.num_nodes, 1 + rng.uniform_int(3));
    const double c = rng.uniform(0.0, 10.0);
    const int steps = 1 + rng.uniform_int(10);
    const DenoiseResult ada =
        degree_normalized_adaptive_denoise(x, std::vector<double>(g.num_nodes, c), steps, g);
    const Signal appnp = appnp_aggregate(x, 1.0 / (1.0 + c), steps, g);
    worst = std::max(worst, max_abs_diff(ada.denoised, appnp));
  }
  report("C2", worst <= 1e-12,
         "adaptive propagation with constant factors vs fixed-alpha propagation: max dev " +
             fmt(worst) + " (tol 1e-12, 100 instances)");
}

void criterion_3() {
  const auto start = std::chrono::steady_clock::now();
  double worst_primitive = 0.0;
  std::string worst_name = "-";
  for (const auto& [name, err] : primitive_gradcheck_errors())
    if (err > worst_primitive) {
      worst_primitive = err;
      worst_name = name;
    }
  const double ada_err = model_gradcheck_error(ModelVariant::AdaUgnn);
  const double elapsed = seconds_since(start);
  const bool ok = worst_primitive < 1e-4 && ada_err < 1e-3 && elapsed < 30.0;
  report("C3", ok,
         "gradient checks: worst primitive " + fmt(worst_primitive) + " (" + worst_name +
             ", tol 1e-4), end-to-end adaptive model " + fmt(ada_err) + " (tol 1e-3), " +
             fmt(elapsed) + " s");
}

void criterion_4() {
  Rng rng(404);
  bool ok = true;
  std::string detail = "objective traces nonincreasing for all solvers on 100 instances";
  for (int t = 0; t < 100 && ok; ++t) {
    const Graph g = random_connected_graph(rng, 3, 10);
    const Signal s = random_signal(rng, g.num_nodes, 1 + rng.uniform_int(3));
    const double c = rng.uniform(0.0, 8.0);
    const int steps = 1 + rng.uniform_int(8);
    std::vector<double> cv(g.num_nodes);
    for (double& v : cv) v = rng.uniform(0.0, 8.0);

    const std::vector<std::vector<double>> traces = {
        gd_denoise(s, c, {steps, TheoremStep{}}, g).objective_trace,
        degree_normalized_adaptive_denoise(s, cv, steps, g).objective_trace,
        generic_gd_denoise(s, GlobalLaplacian{c, LaplacianKind::SymNormalizedSelfLoop}, steps,
                           1.0 / (2.0 + 2.0 * c), g)
            .objective_trace};
    for (const auto& trace : traces)
      for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k] > trace[k - 1] + 1e-12 * std::max(1.0, std::fabs(trace[k - 1]))) {
          ok = false;
          detail = "objective increased at instance " + std::to_string(t) + " step " +
                   std::to_string(k) + " (" + fmt(trace[k - 1]) + " -> " + fmt(trace[k]) + ")";
        }
  }
  report("C4", ok, detail);
}

struct CoraRun {
  double accuracy = 0.0;
  std::optional<double> low_acc;
  std::optional<double> high_acc;
  std::optional<double> correlation;
  double seconds = 0.0;
};

CoraRun run_cora(const Dataset& ds, ModelVariant model) {
  TrainConfig cfg;
  cfg.model = model;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 5e-4;
  cfg.dropout = 0.5;
  cfg.momentum = 0.9;
  cfg.epochs = 1000;
  cfg.patience = 100;
  cfg.hidden = 64;
  cfg.alpha = 0.1;
  cfg.prop_steps = 10;
  cfg.smooth_bound = 9.0;
  cfg.seed = 0;
  const TrainOutcome out = train(cfg, ds);
  CoraRun run;
  run.accuracy = 100.0 * out.metrics.accuracy;
  if (out.metrics.grouped.low) run.low_acc = 100.0 * *out.metrics.grouped.low;
  if (out.metrics.grouped.high) run.high_acc = 100.0 * *out.metrics.grouped.high;
  run.correlation = out.metrics.smoothness_correlation;
  run.seconds = out.metrics.train_seconds;
  return run;
}

void criteria_5_and_6() {
  std::string why;
  const std::optional<Dataset> cora = load_cora(why);
  if (!cora) {
    report("C5", false, "blocked: " + why);
    report("C6", false, "blocked: " + why);
    return;
  }
  const CoraRun gcn = run_cora(*cora, ModelVariant::Gcn);
  const CoraRun appnp = run_cora(*cora, ModelVariant::Appnp);
  const CoraRun ada = run_cora(*cora, ModelVariant::AdaUgnn);

  const bool time_ok = gcn.seconds < 300.0 && appnp.seconds < 300.0 && ada.seconds < 300.0;
  const bool band_ok = std::fabs(gcn.accuracy - 81.75) <= 3.0 &&
                       std::fabs(appnp.accuracy - 84.49) <= 3.0 &&
                       std::fabs(ada.accuracy - 84.79) <= 3.0;
  const bool order_ok =
      ada.accuracy >= appnp.accuracy - 0.5 && appnp.accuracy >= gcn.accuracy - 0.5;
  std::ostringstream d5;
  d5 << "gcn " << fmt(gcn.accuracy) << " (ref 81.75), appnp " << fmt(appnp.accuracy)
     << " (ref 84.49), ada-ugnn " << fmt(ada.accuracy) << " (ref 84.79), band+/-3 "
     << (band_ok ? "hit" : "missed") << ", ordering " << (order_ok ? "holds" : "violated")
     << ", slowest run " << fmt(std::max({gcn.seconds, appnp.seconds, ada.seconds})) << " s";
  report("C5", (band_ok || order_ok) && time_ok, d5.str());

  const bool c6_ok = ada.low_acc && appnp.low_acc && *ada.low_acc >= *appnp.low_acc - 1.0;
  std::ostringstream d6;
  d6 << "low-smoothness accuracy: ada-ugnn "
     << (ada.low_acc ? fmt(*ada.low_acc) : std::string("n/a")) << " vs appnp "
     << (appnp.low_acc ? fmt(*appnp.low_acc) : std::string("n/a"))
     << " (refs 40.17 / 38.40, need gap >= -1.0)";
  report("C6", c6_ok, d6.str());
}

void criterion_7() {
  // homophilic bag-of-words fixture: individually weak features force the
  // model to lean on the graph, which is what gives the smoothness head a
  // learnable signal once flips create mixed neighborhoods
  const Dataset clean = planted_bow(4, 40, 0.3, 0.002, 0.3, 0.05, 21);
  auto run = [&](double rate) {
    Dataset ds = clean;
    if (rate > 0.0) {
      PerturbationSpec spec;
      spec.rate = rate;
      spec.seed = 33;
      ds.graph = perturb_graph(clean.graph, spec, &clean.labels);
    }
    TrainConfig cfg;
    cfg.model = ModelVariant::AdaUgnn;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 5e-3;
    cfg.dropout = 0.2;
    cfg.momentum = 0.9;
    cfg.epochs = 800;
    cfg.patience = 800;
    cfg.hidden = 16;
    cfg.prop_steps = 5;
    cfg.smooth_bound = 9.0;
    cfg.seed = 5;
    const TrainOutcome out = train(cfg, ds);
    return out.metrics.smoothness_correlation.value_or(0.0);
  };
  const double r_clean = run(0.0);
  const double r_attacked = run(0.25);
  const bool ok = r_attacked > 0.2 && r_attacked >= r_clean - 0.05;
  report("C7", ok,
         "corr(smoothness factors, label smoothness): " + fmt(r_clean) + " clean, " +
             fmt(r_attacked) + " at 25% flips (need > 0.2 and no drop beyond 0.05)");
}

void criterion_8() {
  Rng rng(808);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Graph g = random_connected_graph(rng, 3, 8);
    const Signal f = random_signal(rng, g.num_nodes, 1 + rng.uniform_int(3));
    const double cp = rng.uniform(0.05, 2.0), cn = rng.uniform(0.05, 2.0);
    double edge = 0.0, non_edge = 0.0;
    for (int i = 0; i < g.num_nodes; ++i)
      for (int j = i + 1; j < g.num_nodes; ++j) {
        double d = 0.0;
        for (int c = 0; c < f.cols; ++c) {
          const double v = f(i, c) - f(j, c);
          d += v * v;
        }
        (g.has_edge(i, j) ? edge : non_edge) += d;
      }
    const double oracle = cp * edge - cn * non_edge;
    worst = std::max(worst, std::fabs(regularizer_value(PairNorm{cp, cn}, f, g) - oracle));
  }
  report("C8", worst <= 1e-10,
         "pair regularizer, identity route vs pair enumeration: max dev " + fmt(worst) +
             " (tol 1e-10, 100 instances, N<=8)");
}

void criterion_9(bool include_cora) {
  const Graph path = build_graph({{0, 1}, {1, 2}}, 3);
  const LocalSmoothness ls = local_label_smoothness(path, {0, 0, 1});
  bool ok = ls.values == std::vector<double>{1.0, 0.5, 0.0};
  std::string detail = "path fixture smoothness exactly [1, 0.5, 0]";
  if (include_cora && ok) {
    std::string why;
    const std::optional<Dataset> cora = load_cora(why);
    if (!cora) {
      report("C9", false, detail + "; cora histogram blocked: " + why);
      return;
    }
    const LocalSmoothness cls = local_label_smoothness(cora->graph, cora->labels);
    std::vector<long> bins(20, 0);
    for (double v : cls.values) ++bins[std::min(19, static_cast<int>(v * 20))];
    const long top = bins[19];
    bool is_mode = true;
    for (int b = 0; b < 19; ++b) is_mode = is_mode && bins[b] <= top;
    ok = is_mode;
    detail += "; cora (" + std::to_string(cora->graph.num_nodes) + " nodes, " +
              std::to_string(2 * cora->graph.num_edges()) + " edge entries): [0.95,1] bin holds " +
              std::to_string(top) + " nodes and is the mode";
  } else if (include_cora) {
    detail += "; cora check skipped after path failure";
  } else {
    detail += " (cora histogram in --quantitative)";
  }
  report("C9", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  bool core = true, quantitative = true;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--core") quantitative = false;
    else if (arg == "--quantitative") core = false;
    else {
      std::cerr << "unknown flag " << arg << "\n";
      return 2;
    }
  }
  if (core) {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
  }
  if (quantitative) criteria_5_and_6();
  if (core) {
    criterion_7();
    criterion_8();
  }
  if (core && quantitative) criterion_9(true);
  else if (core) criterion_9(false);
  else {
    // quantitative-only run still covers the cora half of the histogram check
    criterion_9(true);
  }
  return g_failures == 0 ? 0 : 1;
}
