#ifndef GSD_MODEL_HPP
#define GSD_MODEL_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsd/autodiff.hpp"
#include "gsd/dataset.hpp"
#include "gsd/graph.hpp"
#include "gsd/rng.hpp"
#include "gsd/signal.hpp"
#include "gsd/sparse.hpp"

namespace gsd {

enum class ModelVariant { Gcn, Gat, Appnp, AdaUgnn };

inline std::string model_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Gcn: return "gcn";
    case ModelVariant::Gat: return "gat";
    case ModelVariant::Appnp: return "appnp";
    case ModelVariant::AdaUgnn: return "ada-ugnn";
  }
  return "?";
}

inline ModelVariant parse_model(const std::string& name) {
  if (name == "gcn") return ModelVariant::Gcn;
  if (name == "gat") return ModelVariant::Gat;
  if (name == "appnp") return ModelVariant::Appnp;
  if (name == "ada-ugnn") return ModelVariant::AdaUgnn;
  throw std::invalid_argument("unknown model '" + name + "'");
}

struct LinearParam {
  int in = 0, out = 0;
  std::vector<double> weight;  // in x out, row-major
  std::vector<double> bias;    // out
};

struct GatAttnParam {
  std::vector<double> a_self;
  std::vector<double> a_neigh;
};

struct ModelParams {
  ModelVariant variant = ModelVariant::Gcn;
  std::vector<LinearParam> layers;   // feature transformation stack
  std::vector<GatAttnParam> attn;    // per layer, GAT only
  LinearParam smooth_head;           // classes -> 1, adaptive model only
  double smooth_bound = 1.0;         // s
  double alpha = 0.1;                // propagation teleport weight
  int prop_steps = 10;
  double leaky_slope = 0.2;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, one deterministic stream
// per tensor.
inline ModelParams init_params(ModelVariant variant, int in_dim, int hidden, int num_classes,
                               double alpha, int prop_steps, double smooth_bound,
                               double leaky_slope, std::uint64_t seed) {
  ModelParams p;
  p.variant = variant;
  p.alpha = alpha;
  p.prop_steps = prop_steps;
  p.smooth_bound = smooth_bound;
  p.leaky_slope = leaky_slope;

  std::uint64_t stream = 0;
  auto fill = [&](std::vector<double>& v, std::size_t count, int fan_in) {
    Rng rng(seed, ++stream);
    const double r = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    v.resize(count);
    for (double& x : v) x = rng.uniform(-r, r);
  };
  auto linear = [&](int in, int out) {
    LinearParam lp;
    lp.in = in;
    lp.out = out;
    fill(lp.weight, static_cast<std::size_t>(in) * out, in);
    fill(lp.bias, out, in);
    return lp;
  };

  p.layers.push_back(linear(in_dim, hidden));
  p.layers.push_back(linear(hidden, num_classes));
  if (variant == ModelVariant::Gat) {
    for (const LinearParam& lp : p.layers) {
      GatAttnParam a;
      fill(a.a_self, lp.out, lp.out);
      fill(a.a_neigh, lp.out, lp.out);
      p.attn.push_back(std::move(a));
    }
  }
  if (variant == ModelVariant::AdaUgnn) {
    // start at the neutral midpoint: factors all s/2, the fixed-alpha
    // special case, so adaptivity is learned rather than sampled
    p.smooth_head.in = num_classes;
    p.smooth_head.out = 1;
    p.smooth_head.weight.assign(num_classes, 0.0);
    p.smooth_head.bias.assign(1, 0.0);
  }
  return p;
}

// Graph-derived constants shared by every forward pass.
struct GraphOps {
  std::shared_ptr<const ad::SparseOperand> norm_adj;   // Atilde
  std::shared_ptr<const ad::SparseOperand> nbr_ones;   // A + I, binary
  std::shared_ptr<const ad::SparseOperand> nbr_mean;   // row-normalized A + I
  ad::PatternPtr pattern;                              // self-inclusive CSR skeleton
  std::vector<double> inv_self_degree;

  static GraphOps build(const Graph& g) {
    GraphOps ops;
    ops.norm_adj = ad::SparseOperand::make(normalized_adjacency(g), true);
    ops.nbr_ones = ad::SparseOperand::make(self_loop_adjacency(g), true);
    SparseMatrix mean = self_loop_adjacency(g);
    for (int i = 0; i < mean.rows; ++i) {
      const double inv = 1.0 / static_cast<double>(g.degrees_self_loop[i]);
      for (int k = mean.row_offsets[i]; k < mean.row_offsets[i + 1]; ++k) mean.values[k] = inv;
    }
    ops.nbr_mean = ad::SparseOperand::make(std::move(mean), false);
    ops.pattern = std::make_shared<SelfLoopPattern>(self_loop_pattern(g));
    ops.inv_self_degree.resize(g.num_nodes);
    for (int i = 0; i < g.num_nodes; ++i)
      ops.inv_self_degree[i] = 1.0 / static_cast<double>(g.degrees_self_loop[i]);
    return ops;
  }
};

// Input features as a constant sparse operand (bag-of-words features are
// mostly zeros, so the first transform and its backward stay cheap).
inline std::shared_ptr<const ad::SparseOperand> feature_operand(const Signal& x) {
  SparseMatrix m;
  m.rows = x.rows;
  m.cols = x.cols;
  m.row_offsets.assign(x.rows + 1, 0);
  for (int i = 0; i < x.rows; ++i) {
    for (int c = 0; c < x.cols; ++c)
      if (x(i, c) != 0.0) {
        m.col_indices.push_back(c);
        m.values.push_back(x(i, c));
      }
    m.row_offsets[i + 1] = static_cast<int>(m.col_indices.size());
  }
  return ad::SparseOperand::make(std::move(m), false);
}

// One parameter tensor: the tape leaf plus the backing storage it was
// copied from, so updates can be written back in a fixed order.
struct ParamBinding {
  std::vector<double>* store = nullptr;
  ad::Var var;
};

struct ForwardGraph {
  ad::Tape tape;
  ad::Var logits;
  ad::Var loss;                  // valid only when built with labels
  ad::Var smoothness;            // valid only for the adaptive model
  bool has_loss = false;
  bool has_smoothness = false;
  std::vector<ParamBinding> params;
};

namespace detail {

struct ForwardInputs {
  std::shared_ptr<const ad::SparseOperand> features;
  const GraphOps* ops;
  bool train_mode = false;
  double dropout_rate = 0.0;
  std::uint64_t dropout_seed = 0;
  std::shared_ptr<const std::vector<int>> labels;    // null => no loss node
  std::shared_ptr<const std::vector<int>> loss_rows;
};

inline ad::Var bind_linear(ForwardGraph& fg, LinearParam& lp, ad::Var& bias) {
  ad::Var w = fg.tape.param(lp.in, lp.out, lp.weight);
  bias = fg.tape.param(1, lp.out, lp.bias);
  fg.params.push_back({&lp.weight, w});
  fg.params.push_back({&lp.bias, bias});
  return w;
}

}  // namespace detail

// Builds the full computation graph for one forward pass (and loss when
// labels are provided). `mutable_params` outlives the graph; its tensors are
// re-bound as tape leaves every call.
inline ForwardGraph build_forward(ModelParams& mp, const detail::ForwardInputs& in) {
  ForwardGraph fg;
  ad::Tape& t = fg.tape;

  auto attention_layer = [&](ad::Var h, GatAttnParam& ap) {
    const int dim = t.shape(h).cols;
    ad::Var asv = t.param(dim, 1, ap.a_self);
    ad::Var anv = t.param(dim, 1, ap.a_neigh);
    fg.params.push_back({&ap.a_self, asv});
    fg.params.push_back({&ap.a_neigh, anv});
    ad::Var e = t.leaky_relu(t.edge_pair_sum(t.matmul(h, asv), t.matmul(h, anv), in.ops->pattern),
                             mp.leaky_slope);
    return t.edge_weighted_gather(t.neighborhood_softmax(e, in.ops->pattern), h, in.ops->pattern);
  };

  // transform stack; dropout sits on the post-activation hidden features
  ad::Var bias1;
  ad::Var w1 = detail::bind_linear(fg, mp.layers[0], bias1);
  ad::Var h = t.add_bias(t.spmm(in.features, w1), bias1);

  ad::Var logits;
  switch (mp.variant) {
    case ModelVariant::Gcn: {
      h = t.dropout(t.relu(t.spmm(in.ops->norm_adj, h)), in.dropout_rate, in.train_mode,
                    in.dropout_seed, 1);
      ad::Var bias2;
      ad::Var w2 = detail::bind_linear(fg, mp.layers[1], bias2);
      logits = t.spmm(in.ops->norm_adj, t.add_bias(t.matmul(h, w2), bias2));
      break;
    }
    case ModelVariant::Gat: {
      h = t.dropout(t.relu(attention_layer(h, mp.attn[0])), in.dropout_rate, in.train_mode,
                    in.dropout_seed, 1);
      ad::Var bias2;
      ad::Var w2 = detail::bind_linear(fg, mp.layers[1], bias2);
      logits = attention_layer(t.add_bias(t.matmul(h, w2), bias2), mp.attn[1]);
      break;
    }
    case ModelVariant::Appnp:
    case ModelVariant::AdaUgnn: {
      h = t.dropout(t.relu(h), in.dropout_rate, in.train_mode, in.dropout_seed, 1);
      ad::Var bias2;
      ad::Var w2 = detail::bind_linear(fg, mp.layers[1], bias2);
      ad::Var xp = t.add_bias(t.matmul(h, w2), bias2);

      if (mp.variant == ModelVariant::Appnp) {
        ad::Var prop = xp;
        for (int k = 0; k < mp.prop_steps; ++k)
          prop = t.add(t.scale(t.spmm(in.ops->norm_adj, prop), 1.0 - mp.alpha),
                       t.scale(xp, mp.alpha));
        logits = prop;
      } else {
        // smoothness factors from the neighborhood variance of the logits
        ad::Var mean = t.spmm(in.ops->nbr_mean, xp);
        ad::Var var = t.sub(t.spmm(in.ops->nbr_mean, t.mul(xp, xp)), t.mul(mean, mean));
        ad::Var hb;
        ad::Var hw = detail::bind_linear(fg, mp.smooth_head, hb);
        ad::Var c = t.scale(t.sigmoid(t.add_bias(t.matmul(var, hw), hb)), mp.smooth_bound);
        fg.smoothness = c;
        fg.has_smoothness = true;

        const int n = t.shape(c).rows;
        ad::Var inv_deg = t.constant(n, 1, in.ops->inv_self_degree);
        ad::Var denom =
            t.add_scalar(t.add(c, t.mul(t.spmm(in.ops->nbr_ones, c), inv_deg)), 2.0);
        ad::Var step = t.reciprocal(denom);

        ad::Var anchor = t.scale(t.scale_rows(xp, step), 2.0);
        ad::Var prop = xp;
        for (int k = 0; k < mp.prop_steps; ++k) {
          ad::Var lhs = t.scale_rows(t.spmm(in.ops->norm_adj, prop), c);
          ad::Var rhs = t.spmm(in.ops->norm_adj, t.scale_rows(prop, c));
          prop = t.add(anchor, t.scale_rows(t.add(lhs, rhs), step));
        }
        logits = prop;
      }
      break;
    }
  }

  fg.logits = logits;
  if (in.labels) {
    fg.loss = t.softmax_cross_entropy(logits, in.labels, in.loss_rows);
    fg.has_loss = true;
  }
  return fg;
}

struct ForwardOutput {
  Signal logits;
  std::vector<double> smoothness;  // per-node factors, adaptive model only
};

// Deterministic forward pass at fixed parameters. In train mode the seed
// selects the dropout masks; in eval mode dropout is a no-op.
inline ForwardOutput forward_model(const ModelParams& params, const Dataset& ds, bool train_mode,
                                   double dropout_rate, std::uint64_t seed) {
  ModelParams scratch = params;  // leaves caller's tensors untouched
  detail::ForwardInputs in;
  in.features = feature_operand(ds.features);
  GraphOps ops = GraphOps::build(ds.graph);
  in.ops = &ops;
  in.train_mode = train_mode;
  in.dropout_rate = dropout_rate;
  in.dropout_seed = seed;
  ForwardGraph fg = build_forward(scratch, in);
  ForwardOutput out;
  out.logits = fg.tape.signal(fg.logits);
  if (fg.has_smoothness) out.smoothness = fg.tape.value(fg.smoothness);
  return out;
}

}  // namespace gsd

#endif  // GSD_MODEL_HPP
