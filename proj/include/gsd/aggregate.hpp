#ifndef GSD_AGGREGATE_HPP
#define GSD_AGGREGATE_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsd/denoise.hpp"
#include "gsd/graph.hpp"
#include "gsd/signal.hpp"
#include "gsd/sparse.hpp"

namespace gsd {

// --------------------------------------------------------------------------
// Forward aggregation operators. All take transformed features Xp (N x d)
// and return the aggregated signal with the same column count.
// --------------------------------------------------------------------------

// H = Atilde Xp.
inline Signal gcn_aggregate(const Signal& xp, const Graph& g) {
  if (xp.rows != g.num_nodes)
    throw std::invalid_argument("gcn_aggregate: signal rows must equal node count");
  return spmm(normalized_adjacency(g), xp);
}

struct GatParams {
  std::vector<double> a_self;   // scores the center node's features
  std::vector<double> a_neigh;  // scores the neighbor's features
  double leaky_slope = 0.2;
};

// Attention weights aligned with the self-inclusive neighborhood CSR.
struct EdgeAttention {
  SelfLoopPattern pattern;
  std::vector<double> alpha;  // sums to 1 within each row segment
};

// Numerically stable softmax over each CSR row segment.
inline void segment_softmax(const SelfLoopPattern& p, std::vector<double>& scores) {
  for (int i = 0; i < p.num_rows(); ++i) {
    const int lo = p.offsets[i], hi = p.offsets[i + 1];
    double m = scores[lo];
    for (int k = lo + 1; k < hi; ++k) m = std::max(m, scores[k]);
    double z = 0.0;
    for (int k = lo; k < hi; ++k) {
      scores[k] = std::exp(scores[k] - m);
      z += scores[k];
    }
    for (int k = lo; k < hi; ++k) scores[k] /= z;
  }
}

// Scores e_ij = LeakyReLU(Xp_i . a_self + Xp_j . a_neigh), normalized by a
// softmax over each self-inclusive neighborhood.
inline EdgeAttention gat_attention(const Signal& xp, const Graph& g, const GatParams& params) {
  if (xp.rows != g.num_nodes)
    throw std::invalid_argument("gat_attention: signal rows must equal node count");
  if (static_cast<int>(params.a_self.size()) != xp.cols ||
      static_cast<int>(params.a_neigh.size()) != xp.cols)
    throw std::invalid_argument("gat_attention: attention vector length must match feature dim");

  std::vector<double> self_score(g.num_nodes, 0.0), neigh_score(g.num_nodes, 0.0);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int c = 0; c < xp.cols; ++c) {
      self_score[i] += xp(i, c) * params.a_self[c];
      neigh_score[i] += xp(i, c) * params.a_neigh[c];
    }

  EdgeAttention att;
  att.pattern = self_loop_pattern(g);
  att.alpha.resize(att.pattern.nnz());
  for (int i = 0; i < g.num_nodes; ++i)
    for (int k = att.pattern.offsets[i]; k < att.pattern.offsets[i + 1]; ++k) {
      const double e = self_score[i] + neigh_score[att.pattern.cols[k]];
      att.alpha[k] = e >= 0.0 ? e : params.leaky_slope * e;
    }
  segment_softmax(att.pattern, att.alpha);
  return att;
}

// H_i = sum_j alpha_ij Xp_j over the self-inclusive neighborhood; each row
// is a convex combination of neighborhood rows.
inline Signal attention_aggregate(const EdgeAttention& att, const Signal& xp) {
  Signal out(xp.rows, xp.cols);
  for (int i = 0; i < att.pattern.num_rows(); ++i) {
    double* oi = out.row(i);
    for (int k = att.pattern.offsets[i]; k < att.pattern.offsets[i + 1]; ++k) {
      const double w = att.alpha[k];
      const double* xj = xp.row(att.pattern.cols[k]);
      for (int c = 0; c < xp.cols; ++c) oi[c] += w * xj[c];
    }
  }
  return out;
}

inline Signal gat_aggregate(const Signal& xp, const Graph& g, const GatParams& params) {
  return attention_aggregate(gat_attention(xp, g, params), xp);
}

// H = alpha (I - (1-alpha) Atilde)^{-1} Xp via an SPD solve; the system has
// eigenvalues in [alpha, 2 - alpha].
inline Signal ppnp_aggregate(const Signal& xp, double alpha, const Graph& g,
                             double rel_tol = 1e-10, int max_iter = -1) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("ppnp_aggregate: alpha must lie in (0, 1]");
  if (xp.rows != g.num_nodes)
    throw std::invalid_argument("ppnp_aggregate: signal rows must equal node count");
  const SparseMatrix system = csr_combine(1.0, identity_matrix(g.num_nodes), -(1.0 - alpha),
                                          normalized_adjacency(g));
  Signal h = solve_spd(system, xp, rel_tol, max_iter);
  for (double& v : h.data) v *= alpha;
  return h;
}

// K unrolled propagation steps H <- (1-alpha) Atilde H + alpha Xp, H0 = Xp.
inline Signal appnp_aggregate(const Signal& xp, double alpha, int steps, const Graph& g) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("appnp_aggregate: alpha must lie in (0, 1]");
  if (steps < 1) throw std::invalid_argument("appnp_aggregate: steps must be >= 1");
  if (xp.rows != g.num_nodes)
    throw std::invalid_argument("appnp_aggregate: signal rows must equal node count");
  const SparseMatrix tilde = normalized_adjacency(g);
  Signal h = xp;
  for (int k = 0; k < steps; ++k) {
    Signal prop = spmm(tilde, h);
    for (std::size_t i = 0; i < prop.data.size(); ++i)
      prop.data[i] = (1.0 - alpha) * prop.data[i] + alpha * xp.data[i];
    h = std::move(prop);
  }
  return h;
}

// --------------------------------------------------------------------------
// Adaptive-smoothness aggregation
// --------------------------------------------------------------------------

struct SmoothnessHead {
  std::vector<double> weights;  // one per feature channel
  double bias = 0.0;
  double bound = 1.0;  // s: upper bound of every smoothness factor
};

struct SmoothnessFactors {
  std::vector<double> c;  // per-node factor in (0, s)
  std::vector<double> b;  // matching per-node stepsize
};

// Per-channel population variance of {Xp_j : j in closed N(i)}.
inline Signal neighborhood_variance(const Signal& xp, const Graph& g) {
  if (xp.rows != g.num_nodes)
    throw std::invalid_argument("neighborhood_variance: signal rows must equal node count");
  Signal var(xp.rows, xp.cols);
  std::vector<double> mean(xp.cols);
  for (int i = 0; i < g.num_nodes; ++i) {
    const double inv = 1.0 / static_cast<double>(g.degrees_self_loop[i]);
    for (int c = 0; c < xp.cols; ++c) {
      mean[c] = xp(i, c);
      var(i, c) = xp(i, c) * xp(i, c);
    }
    for (int j : g.neighbors(i))
      for (int c = 0; c < xp.cols; ++c) {
        mean[c] += xp(j, c);
        var(i, c) += xp(j, c) * xp(j, c);
      }
    for (int c = 0; c < xp.cols; ++c) {
      const double m = mean[c] * inv;
      var(i, c) = var(i, c) * inv - m * m;
    }
  }
  return var;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// c_i = s * sigmoid(w . var_i + bias): the neighborhood's channel-wise
// variance squeezed to (0, s), plus the stepsizes it induces.
inline SmoothnessFactors compute_smoothness_factors(const Signal& xp, const Graph& g,
                                                    const SmoothnessHead& head) {
  if (head.bound <= 0.0)
    throw std::invalid_argument("compute_smoothness_factors: bound must be positive");
  if (static_cast<int>(head.weights.size()) != xp.cols)
    throw std::invalid_argument("compute_smoothness_factors: head width must match feature dim");
  const Signal var = neighborhood_variance(xp, g);
  SmoothnessFactors out;
  out.c.resize(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    double z = head.bias;
    for (int c = 0; c < xp.cols; ++c) z += var(i, c) * head.weights[c];
    out.c[i] = head.bound * sigmoid(z);
  }
  out.b = degree_adaptive_stepsizes(out.c, g);
  return out;
}

struct AdaUgnnSpec {
  SmoothnessHead head;
  int steps = 1;
};

// Adaptive aggregation: smoothness factors are computed once from Xp, then
// K degree-normalized updates run with Xp as the anchor.
inline Signal ada_ugnn_aggregate(const Signal& xp, const AdaUgnnSpec& spec, const Graph& g) {
  if (spec.steps < 1) throw std::invalid_argument("ada_ugnn_aggregate: steps must be >= 1");
  const SmoothnessFactors factors = compute_smoothness_factors(xp, g, spec.head);
  Signal h = xp;
  Signal next(xp.rows, xp.cols);
  for (int k = 0; k < spec.steps; ++k) {
    degree_adaptive_update(xp, h, factors.c, factors.b, g, next);
    std::swap(h, next);
  }
  return h;
}

}  // namespace gsd

#endif  // GSD_AGGREGATE_HPP
