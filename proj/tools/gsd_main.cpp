// Command-line interface: theorem verification, smoothness analysis,
// signal denoising, model training, and robustness evaluation.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsd/aggregate.hpp"
#include "gsd/certify.hpp"
#include "gsd/dataset.hpp"
#include "gsd/denoise.hpp"
#include "gsd/graph.hpp"
#include "gsd/model.hpp"
#include "gsd/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw gsd::IoError("cannot write " + path);
  out << body;
  if (!out) throw gsd::IoError("write failed for " + path);
}

void write_report(const std::string& path, const json& report) {
  write_text(path, report.dump(2) + "\n");
}

// "name:key=val,key=val" -> regularizer variant
gsd::RegularizerSpec parse_regularizer(const std::string& text, int num_nodes) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::string rest = text.substr(colon + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string item = rest.substr(pos, comma == std::string::npos ? rest.size() - pos
                                                                           : comma - pos);
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--reg: expected key=value in '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  auto number = [&](const char* key, double fallback, bool required = false) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (required) throw std::invalid_argument(std::string("--reg: missing ") + key);
      return fallback;
    }
    return std::stod(it->second);
  };

  if (name == "global") {
    gsd::LaplacianKind kind = gsd::LaplacianKind::SymNormalizedSelfLoop;
    if (auto it = kv.find("kind"); it != kv.end()) {
      if (it->second == "unnorm") kind = gsd::LaplacianKind::Unnormalized;
      else if (it->second == "unnorm-loop") kind = gsd::LaplacianKind::UnnormalizedSelfLoop;
      else if (it->second == "sym-loop") kind = gsd::LaplacianKind::SymNormalizedSelfLoop;
      else throw std::invalid_argument("--reg: unknown kind '" + it->second + "'");
    }
    return gsd::GlobalLaplacian{number("c", 0.0, true), kind};
  }
  if (name == "adaptive")
    return gsd::NodeAdaptive{std::vector<double>(num_nodes, number("c", 0.0, true))};
  if (name == "degree")
    return gsd::DegreeNormalizedAdaptive{std::vector<double>(num_nodes, number("c", 0.0, true))};
  if (name == "pairnorm")
    return gsd::PairNorm{number("cp", 1.0, true), number("cn", 1.0, true)};
  if (name == "dropedge")
    return gsd::DropEdge{number("q", 0.0, true),
                         static_cast<std::uint64_t>(number("seed", 0.0))};
  if (name == "trend") return gsd::TrendFilter{number("c", 0.0, true)};
  throw std::invalid_argument("--reg: unknown regularizer '" + name + "'");
}

json reg_echo(const std::string& text) { return json{{"spec", text}}; }

struct TrainFlags {
  std::string data_dir;
  std::string model = "gcn";
  double lr = 0.01, wd = 5e-4, dropout = 0.5, momentum = 0.0;
  double alpha = 0.1, s = 9.0;
  int k = 10, hidden = 64, epochs = 1000, patience = 50;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_data = true) {
  if (with_data) cmd->add_option("--data", f.data_dir, "dataset directory")->required();
  cmd->add_option("--model", f.model, "gcn|gat|appnp|ada-ugnn")->required();
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--wd", f.wd, "weight decay");
  cmd->add_option("--dropout", f.dropout, "dropout rate on hidden activations");
  cmd->add_option("--momentum", f.momentum, "heavy-ball momentum (0 = plain GD)");
  cmd->add_option("--alpha", f.alpha, "propagation teleport weight");
  cmd->add_option("--k", f.k, "propagation steps");
  cmd->add_option("--s", f.s, "smoothness factor upper bound");
  cmd->add_option("--hidden", f.hidden, "hidden width");
  cmd->add_option("--epochs", f.epochs, "maximum epochs");
  cmd->add_option("--patience", f.patience, "early-stopping patience");
  cmd->add_option("--seed", f.seed, "random seed");
}

gsd::TrainConfig to_config(const TrainFlags& f) {
  gsd::TrainConfig cfg;
  cfg.model = gsd::parse_model(f.model);
  cfg.learning_rate = f.lr;
  cfg.weight_decay = f.wd;
  cfg.dropout = f.dropout;
  cfg.momentum = f.momentum;
  cfg.alpha = f.alpha;
  cfg.prop_steps = f.k;
  cfg.smooth_bound = f.s;
  cfg.hidden = f.hidden;
  cfg.epochs = f.epochs;
  cfg.patience = f.patience;
  cfg.seed = f.seed;
  return cfg;
}

json config_echo(const TrainFlags& f) {
  return json{{"model", f.model},       {"lr", f.lr},          {"wd", f.wd},
              {"dropout", f.dropout},   {"momentum", f.momentum}, {"alpha", f.alpha},
              {"k", f.k},               {"s", f.s},            {"hidden", f.hidden},
              {"epochs", f.epochs},     {"patience", f.patience}, {"seed", f.seed},
              {"data", f.data_dir}};
}

json metrics_json(const gsd::Metrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["best_epoch"] = m.best_epoch;
  j["epochs_run"] = m.train_loss.size();
  if (m.grouped.low) j["low_smoothness_accuracy"] = *m.grouped.low;
  if (m.grouped.high) j["high_smoothness_accuracy"] = *m.grouped.high;
  if (m.smoothness_correlation) j["smoothness_correlation"] = *m.smoothness_correlation;
  if (!m.train_loss.empty()) j["final_train_loss"] = m.train_loss.back();
  return j;
}

// ---------------------------------------------------------------------------

int cmd_verify(std::uint64_t seed, int trials, int max_nodes, const std::string& out_path,
               bool inject_t3) {
  const gsd::CertifyReport report = gsd::certify_theorems(
      seed, trials, max_nodes,
      inject_t3 ? gsd::FaultInjection::GcnStepsize : gsd::FaultInjection::None);
  json j = gsd::to_json(report);
  j["command"] = "verify";
  j["status"] = report.all_passed ? "ok" : "failed";
  if (!out_path.empty()) write_report(out_path, j);
  for (const gsd::TheoremCheck& c : report.checks)
    std::cout << c.id << " " << (c.passed ? "ok" : "FAILED")
              << "  max_abs_deviation=" << c.max_abs_deviation << " tolerance=" << c.tolerance
              << (c.skipped ? "  (skipped " + std::to_string(c.skipped) + " degenerate draws)"
                            : "")
              << "\n";
  return report.all_passed ? kExitOk : kExitVerificationFailure;
}

int cmd_smoothness(const std::string& data_dir, const std::string& out_path,
                   std::string hist_path) {
  const gsd::Dataset ds = gsd::load_dataset(data_dir);
  const gsd::LocalSmoothness ls = gsd::local_label_smoothness(ds.graph, ds.labels);

  std::string csv = "node_id,degree,ls\n";
  for (int i = 0; i < ds.graph.num_nodes; ++i)
    csv += std::to_string(i) + "," + std::to_string(ds.graph.degrees[i]) + "," +
           fmt17(ls.values[i]) + "\n";
  write_text(out_path, csv);

  constexpr int kBins = 20;
  std::vector<long> counts(kBins, 0);
  for (double v : ls.values) {
    int bin = static_cast<int>(v * kBins);
    if (bin >= kBins) bin = kBins - 1;
    ++counts[bin];
  }
  if (hist_path.empty()) hist_path = out_path + ".hist.csv";
  std::string hist = "bin_lo,bin_hi,count\n";
  for (int b = 0; b < kBins; ++b)
    hist += fmt17(b / static_cast<double>(kBins)) + "," +
            fmt17((b + 1) / static_cast<double>(kBins)) + "," + std::to_string(counts[b]) + "\n";
  write_text(hist_path, hist);

  json report = {{"command", "smoothness"},
                 {"config", {{"data", data_dir}, {"out", out_path}, {"hist", hist_path}}},
                 {"nodes", ds.graph.num_nodes},
                 {"status", "ok"}};
  write_report(out_path + ".report.json", report);
  return kExitOk;
}

int cmd_denoise(const std::string& signal_path, const std::string& data_dir,
                const std::string& reg_text, int steps, double stepsize, bool closed_form,
                const std::string& out_path, std::string trace_path) {
  const auto started = std::chrono::steady_clock::now();
  const gsd::Dataset ds = gsd::load_dataset(data_dir);
  const gsd::Signal s = gsd::load_signal(signal_path);
  if (s.rows != ds.graph.num_nodes)
    throw std::invalid_argument("denoise: signal rows must match the dataset's node count");
  const gsd::RegularizerSpec reg = parse_regularizer(reg_text, ds.graph.num_nodes);

  gsd::DenoiseResult result;
  if (closed_form) {
    const auto* global = std::get_if<gsd::GlobalLaplacian>(&reg);
    if (global == nullptr)
      throw std::invalid_argument("--closed-form applies to the global regularizer only");
    result.denoised = gsd::closed_form_denoise(s, global->c, ds.graph, global->kind);
    result.objective_trace = {gsd::objective(s, s, reg, ds.graph),
                              gsd::objective(result.denoised, s, reg, ds.graph)};
  } else if (steps == 0) {
    // evaluation only: every variant supports the objective
    result.denoised = s;
    result.objective_trace = {gsd::objective(s, s, reg, ds.graph)};
  } else if (const auto* global = std::get_if<gsd::GlobalLaplacian>(&reg);
             global != nullptr && global->kind == gsd::LaplacianKind::SymNormalizedSelfLoop &&
             stepsize == 0.0) {
    result = gsd::gd_denoise(s, global->c, {steps, gsd::TheoremStep{}}, ds.graph);
  } else if (const auto* degree = std::get_if<gsd::DegreeNormalizedAdaptive>(&reg)) {
    result = gsd::degree_normalized_adaptive_denoise(s, degree->c, steps, ds.graph);
  } else {
    const double b = stepsize > 0.0 ? stepsize : gsd::suggested_stepsize(reg, ds.graph);
    result = gsd::generic_gd_denoise(s, reg, steps, b, ds.graph);
  }

  gsd::save_signal(out_path, result.denoised);
  if (trace_path.empty()) trace_path = out_path + ".trace.csv";
  std::string trace = "step,objective\n";
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k)
    trace += std::to_string(k) + "," + fmt17(result.objective_trace[k]) + "\n";
  write_text(trace_path, trace);

  json report = {{"command", "denoise"},
                 {"config",
                  {{"signal", signal_path},
                   {"data", data_dir},
                   {"reg", reg_echo(reg_text)},
                   {"steps", steps},
                   {"stepsize", stepsize},
                   {"closed_form", closed_form},
                   {"out", out_path},
                   {"trace", trace_path}}},
                 {"final_objective", result.objective_trace.back()},
                 {"timings",
                  {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                             started)
                                   .count()}}},
                 {"status", "ok"}};
  write_report(out_path + ".report.json", report);
  return kExitOk;
}

int cmd_train(const TrainFlags& flags, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const gsd::Dataset ds = gsd::load_dataset(flags.data_dir);
  const gsd::TrainConfig cfg = to_config(flags);
  const gsd::TrainOutcome outcome = gsd::train(cfg, ds);

  gsd::save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), outcome.params);
  if (!outcome.smoothness.empty()) {
    std::string csv = "node_id,smoothness_factor\n";
    for (std::size_t i = 0; i < outcome.smoothness.size(); ++i)
      csv += std::to_string(i) + "," + fmt17(outcome.smoothness[i]) + "\n";
    write_text((fs::path(out_dir) / "smoothness.csv").string(), csv);
  }
  json cfg_echo = config_echo(flags);
  cfg_echo["out"] = out_dir;
  json report = {{"command", "train"},
                 {"config", cfg_echo},
                 {"seed", flags.seed},
                 {"metrics", metrics_json(outcome.metrics)},
                 {"timings", {{"train_seconds", outcome.metrics.train_seconds}}},
                 {"status", "ok"}};
  write_report((fs::path(out_dir) / "metrics.json").string(), report);
  std::cout << "test_accuracy=" << outcome.metrics.accuracy << "\n";
  return kExitOk;
}

int cmd_eval_robustness(const TrainFlags& flags, const std::string& graphs_dir,
                        const std::string& out_path) {
  const gsd::Dataset clean = gsd::load_dataset(flags.data_dir);
  const gsd::TrainConfig cfg = to_config(flags);

  // rate parsed from the numeric token before .tsv, e.g. edges_0.15.tsv
  std::vector<std::pair<double, std::string>> ladder;
  for (const auto& entry : fs::directory_iterator(graphs_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".tsv") continue;
    const std::string stem = entry.path().stem().string();
    const auto us = stem.find_last_of('_');
    if (us == std::string::npos)
      throw gsd::IoError("eval-robustness: cannot parse perturb rate from '" + stem + ".tsv'");
    double rate = 0.0;
    try {
      rate = std::stod(stem.substr(us + 1));
    } catch (const std::exception&) {
      throw gsd::IoError("eval-robustness: cannot parse perturb rate from '" + stem + ".tsv'");
    }
    ladder.emplace_back(rate, entry.path().string());
  }
  std::sort(ladder.begin(), ladder.end());

  const bool adaptive = cfg.model == gsd::ModelVariant::AdaUgnn;
  std::string csv = adaptive ? "perturb_rate,accuracy,smoothness_correlation\n"
                             : "perturb_rate,accuracy\n";
  json rows = json::array();
  auto run_one = [&](double rate, const gsd::Dataset& ds) {
    const gsd::TrainOutcome outcome = gsd::train(cfg, ds);
    csv += fmt17(rate) + "," + fmt17(outcome.metrics.accuracy);
    json row = {{"perturb_rate", rate}, {"accuracy", outcome.metrics.accuracy}};
    if (adaptive) {
      const double r = outcome.metrics.smoothness_correlation.value_or(0.0);
      csv += "," + fmt17(r);
      row["smoothness_correlation"] = r;
    }
    csv += "\n";
    rows.push_back(std::move(row));
  };

  run_one(0.0, clean);
  for (const auto& [rate, path] : ladder) {
    gsd::Dataset ds = clean;
    gsd::PerturbationSpec spec;
    spec.mode = gsd::PerturbMode::LoadPrecomputed;
    spec.path = path;
    spec.rate = rate;
    try {
      ds.graph = gsd::perturb_graph(clean.graph, spec, &clean.labels);
    } catch (const std::invalid_argument& e) {
      throw gsd::IoError(path + ": node universe mismatch: " + e.what());
    }
    run_one(rate, ds);
  }

  write_text(out_path, csv);
  json cfg_echo = config_echo(flags);
  cfg_echo["graphs"] = graphs_dir;
  cfg_echo["out"] = out_path;
  json report = {{"command", "eval-robustness"},
                 {"config", cfg_echo},
                 {"rows", rows},
                 {"status", "ok"}};
  write_report(out_path + ".report.json", report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph signal denoising toolkit"};
  app.require_subcommand(1);

  // verify
  std::uint64_t v_seed = 0;
  int v_trials = 100, v_max_nodes = 8;
  std::string v_out;
  bool v_inject = false;
  CLI::App* verify = app.add_subcommand("verify", "certify the aggregation equivalences");
  verify->add_option("--seed", v_seed, "random seed");
  verify->add_option("--trials", v_trials, "instances per check");
  verify->add_option("--max-nodes", v_max_nodes, "largest random graph");
  verify->add_option("--out", v_out, "report path (json)");
  verify->add_flag("--inject-t3-stepsize", v_inject)->group("");  // negative control

  // smoothness
  std::string s_data, s_out, s_hist;
  CLI::App* smooth = app.add_subcommand("smoothness", "per-node local label smoothness");
  smooth->add_option("--data", s_data, "dataset directory")->required();
  smooth->add_option("--out", s_out, "csv path")->required();
  smooth->add_option("--hist", s_hist, "histogram csv path");

  // denoise
  std::string d_signal, d_data, d_reg, d_out, d_trace;
  int d_steps = 0;
  double d_stepsize = 0.0;
  bool d_closed = false;
  CLI::App* denoise = app.add_subcommand("denoise", "solve or evaluate a denoising objective");
  denoise->add_option("--signal", d_signal, "input signal file")->required();
  denoise->add_option("--data", d_data, "dataset directory")->required();
  denoise->add_option("--reg", d_reg, "regularizer, e.g. global:c=1.5,kind=sym-loop")->required();
  denoise->add_option("--steps", d_steps, "gradient steps (0 = evaluate objective only)");
  denoise->add_option("--stepsize", d_stepsize, "fixed stepsize (default: theorem/safe value)");
  denoise->add_flag("--closed-form", d_closed, "solve (I + cL) F = S instead of iterating");
  denoise->add_option("--out", d_out, "output signal file")->required();
  denoise->add_option("--trace", d_trace, "objective trace csv");

  // train
  TrainFlags t_flags;
  std::string t_out;
  CLI::App* train_cmd = app.add_subcommand("train", "train a node classifier");
  add_train_flags(train_cmd, t_flags);
  train_cmd->add_option("--out", t_out, "output directory")->required();

  // eval-robustness
  TrainFlags r_flags;
  std::string r_graphs, r_out;
  CLI::App* robust = app.add_subcommand("eval-robustness",
                                        "accuracy across perturbed versions of one graph");
  add_train_flags(robust, r_flags);
  robust->add_option("--graphs", r_graphs, "directory of perturbed edge files")->required();
  robust->add_option("--out", r_out, "csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify(v_seed, v_trials, v_max_nodes, v_out, v_inject);
    if (smooth->parsed()) return cmd_smoothness(s_data, s_out, s_hist);
    if (denoise->parsed())
      return cmd_denoise(d_signal, d_data, d_reg, d_steps, d_stepsize, d_closed, d_out, d_trace);
    if (train_cmd->parsed()) return cmd_train(t_flags, t_out);
    if (robust->parsed()) return cmd_eval_robustness(r_flags, r_graphs, r_out);
  } catch (const gsd::UnsupportedSolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gsd::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const gsd::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const gsd::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
