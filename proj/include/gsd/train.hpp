#ifndef GSD_TRAIN_HPP
#define GSD_TRAIN_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsd/errors.hpp"
#include "gsd/graph.hpp"
#include "gsd/model.hpp"

namespace gsd {

struct TrainConfig {
  ModelVariant model = ModelVariant::Gcn;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  double momentum = 0.0;  // classical heavy ball; 0 = plain gradient descent
  int epochs = 1000;
  int patience = 50;
  int hidden = 64;
  double alpha = 0.1;
  int prop_steps = 10;
  double smooth_bound = 9.0;  // s
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;
};

struct GroupAccuracy {
  std::optional<double> low;   // nodes with local label smoothness <= threshold
  std::optional<double> high;  // and > threshold
};

struct Metrics {
  double accuracy = 0.0;
  GroupAccuracy grouped;
  std::optional<double> smoothness_correlation;
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  int best_epoch = -1;
  double train_seconds = 0.0;
};

struct TrainOutcome {
  ModelParams params;
  Metrics metrics;
  std::vector<double> smoothness;  // per-node factors at the best checkpoint
};

// Argmax with ties broken toward the lowest class index.
inline int argmax_row(const Signal& logits, int row) {
  int best = 0;
  for (int c = 1; c < logits.cols; ++c)
    if (logits(row, c) > logits(row, best)) best = c;
  return best;
}

inline double accuracy_on(const Signal& logits, const std::vector<int>& labels,
                          const std::vector<int>& idx) {
  if (idx.empty()) throw std::invalid_argument("accuracy_on: empty split");
  int hits = 0;
  for (int i : idx)
    if (argmax_row(logits, i) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("pearson: vectors must be non-empty and equally sized");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0)
    throw NumericalError("pearson: correlation undefined for zero-variance input");
  return cov / std::sqrt(va * vb);
}

// Test accuracy split at local label smoothness <= / > threshold. An empty
// group stays absent rather than reading as zero accuracy.
inline GroupAccuracy grouped_accuracy(const Signal& logits, const Dataset& ds,
                                      double threshold = 0.5) {
  const LocalSmoothness ls = local_label_smoothness(ds.graph, ds.labels);
  std::vector<int> low, high;
  for (int i : ds.test_idx)
    (ls.values[i] <= threshold ? low : high).push_back(i);
  GroupAccuracy out;
  if (!low.empty()) out.low = accuracy_on(logits, ds.labels, low);
  if (!high.empty()) out.high = accuracy_on(logits, ds.labels, high);
  return out;
}

namespace detail {

struct OptimizerState {
  std::vector<std::vector<double>> velocity;
};

// Heavy-ball update with decoupled weight decay:
//   v <- momentum * v + g;  w <- w - lr * v - lr * wd * w
inline void apply_update(std::vector<ParamBinding>& params, const ad::Tape& tape,
                         const TrainConfig& cfg, OptimizerState& opt) {
  if (opt.velocity.empty()) {
    opt.velocity.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p)
      opt.velocity[p].assign(params[p].store->size(), 0.0);
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double>& g = tape.grad(params[p].var);
    std::vector<double>& w = *params[p].store;
    std::vector<double>& v = opt.velocity[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = cfg.momentum * v[i] + g[i];
      w[i] -= cfg.learning_rate * v[i] + cfg.learning_rate * cfg.weight_decay * w[i];
    }
  }
}

}  // namespace detail

// Full-batch training with early stopping on validation accuracy. Returns
// the best-validation checkpoint. Deterministic for a fixed (seed, config,
// dataset); a non-finite loss aborts with NumericalError.
inline TrainOutcome train(const TrainConfig& cfg, const Dataset& ds) {
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be > 0");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("train: weight decay must be >= 0");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("train: dropout must lie in [0, 1)");
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw std::invalid_argument("train: dataset needs train and val splits");

  const auto started = std::chrono::steady_clock::now();

  ModelParams params =
      init_params(cfg.model, ds.features.cols, cfg.hidden, ds.num_classes, cfg.alpha,
                  cfg.prop_steps, cfg.smooth_bound, cfg.leaky_slope, cfg.seed);

  detail::ForwardInputs base;
  base.features = feature_operand(ds.features);
  const GraphOps ops = GraphOps::build(ds.graph);
  base.ops = &ops;
  base.labels = std::make_shared<const std::vector<int>>(ds.labels);
  base.loss_rows = std::make_shared<const std::vector<int>>(ds.train_idx);
  base.dropout_rate = cfg.dropout;

  auto val_rows = std::make_shared<const std::vector<int>>(ds.val_idx);

  TrainOutcome out;
  Metrics& metrics = out.metrics;
  ModelParams best = params;
  double best_val = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  detail::OptimizerState opt;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::ForwardInputs in = base;
    in.train_mode = true;
    in.dropout_seed = mix64(cfg.seed ^ (0xd70b0eed00000000ULL + epoch));
    ForwardGraph fg = build_forward(params, in);
    const double loss = fg.tape.value(fg.loss)[0];
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at epoch " << epoch << "; try a smaller learning rate";
      throw NumericalError(msg.str());
    }
    metrics.train_loss.push_back(loss);
    fg.tape.backward(fg.loss);
    detail::apply_update(fg.params, fg.tape, cfg, opt);

    detail::ForwardInputs ev = base;
    ev.train_mode = false;
    ev.loss_rows = val_rows;
    ForwardGraph eval_fg = build_forward(params, ev);
    const double val_acc = accuracy_on(eval_fg.tape.signal(eval_fg.logits), ds.labels, ds.val_idx);
    const double val_loss = eval_fg.tape.value(eval_fg.loss)[0];
    metrics.val_accuracy.push_back(val_acc);

    // accuracy decides; validation loss breaks the frequent ties
    if (val_acc > best_val || (val_acc == best_val && val_loss < best_val_loss)) {
      best_val = val_acc;
      best_val_loss = val_loss;
      best = params;
      metrics.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  out.params = std::move(best);

  detail::ForwardInputs fin = base;
  fin.train_mode = false;
  ForwardGraph final_fg = build_forward(out.params, fin);
  const Signal logits = final_fg.tape.signal(final_fg.logits);
  if (!ds.test_idx.empty()) {
    metrics.accuracy = accuracy_on(logits, ds.labels, ds.test_idx);
    metrics.grouped = grouped_accuracy(logits, ds);
  }
  if (final_fg.has_smoothness) {
    out.smoothness = final_fg.tape.value(final_fg.smoothness);
    const LocalSmoothness ls = local_label_smoothness(ds.graph, ds.labels);
    auto varies = [](const std::vector<double>& v) {
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] != v[0]) return true;
      return false;
    };
    if (varies(ls.values) && varies(out.smoothness))
      metrics.smoothness_correlation = pearson(out.smoothness, ls.values);
  }
  metrics.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

// Eval-mode metrics for fixed parameters on one split.
inline Metrics evaluate(const ModelParams& params, const Dataset& ds,
                        const std::vector<int>& idx) {
  const ForwardOutput fwd = forward_model(params, ds, false, 0.0, 0);
  Metrics m;
  m.accuracy = accuracy_on(fwd.logits, ds.labels, idx);
  m.grouped = grouped_accuracy(fwd.logits, ds);
  return m;
}

// --------------------------------------------------------------------------
// Checkpoints: JSON with shapes and flat 64-bit real arrays.
// --------------------------------------------------------------------------

inline nlohmann::json to_json(const LinearParam& lp) {
  return {{"in", lp.in}, {"out", lp.out}, {"weight", lp.weight}, {"bias", lp.bias}};
}

inline LinearParam linear_from_json(const nlohmann::json& j) {
  LinearParam lp;
  lp.in = j.at("in").get<int>();
  lp.out = j.at("out").get<int>();
  lp.weight = j.at("weight").get<std::vector<double>>();
  lp.bias = j.at("bias").get<std::vector<double>>();
  if (lp.weight.size() != static_cast<std::size_t>(lp.in) * lp.out ||
      lp.bias.size() != static_cast<std::size_t>(lp.out))
    throw IoError("checkpoint: linear tensor size does not match its shape");
  return lp;
}

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  nlohmann::json j;
  j["model"] = model_name(p.variant);
  j["alpha"] = p.alpha;
  j["prop_steps"] = p.prop_steps;
  j["smooth_bound"] = p.smooth_bound;
  j["leaky_slope"] = p.leaky_slope;
  j["layers"] = nlohmann::json::array();
  for (const LinearParam& lp : p.layers) j["layers"].push_back(to_json(lp));
  if (p.variant == ModelVariant::Gat) {
    j["attention"] = nlohmann::json::array();
    for (const GatAttnParam& a : p.attn)
      j["attention"].push_back({{"a_self", a.a_self}, {"a_neigh", a.a_neigh}});
  }
  if (p.variant == ModelVariant::AdaUgnn) j["smooth_head"] = to_json(p.smooth_head);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  ModelParams p;
  p.variant = parse_model(j.at("model").get<std::string>());
  p.alpha = j.at("alpha").get<double>();
  p.prop_steps = j.at("prop_steps").get<int>();
  p.smooth_bound = j.at("smooth_bound").get<double>();
  p.leaky_slope = j.at("leaky_slope").get<double>();
  for (const auto& lj : j.at("layers")) p.layers.push_back(linear_from_json(lj));
  if (p.variant == ModelVariant::Gat)
    for (const auto& aj : j.at("attention"))
      p.attn.push_back({aj.at("a_self").get<std::vector<double>>(),
                        aj.at("a_neigh").get<std::vector<double>>()});
  if (p.variant == ModelVariant::AdaUgnn) p.smooth_head = linear_from_json(j.at("smooth_head"));
  return p;
}

}  // namespace gsd

#endif  // GSD_TRAIN_HPP
