#ifndef GSD_DENOISE_HPP
#define GSD_DENOISE_HPP

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "gsd/cg.hpp"
#include "gsd/errors.hpp"
#include "gsd/graph.hpp"
#include "gsd/rng.hpp"
#include "gsd/signal.hpp"
#include "gsd/sparse.hpp"

namespace gsd {

// --------------------------------------------------------------------------
// Regularizer specifications. Every objective is fidelity + r(F):
//   ||F - S||_F^2 + r(F)
// with r selected by one of the variants below.
// --------------------------------------------------------------------------

// c * tr(F' L F) with a single smoothing weight for the whole graph.
struct GlobalLaplacian {
  double c = 0.0;
  LaplacianKind kind = LaplacianKind::SymNormalizedSelfLoop;
};

// 0.5 * sum_i c_i sum_{j in closed N(i)} ||F_i - F_j||^2, one weight per node.
struct NodeAdaptive {
  std::vector<double> c;
};

// 0.5 * sum_i c_i sum_{j in closed N(i)} ||F_i/sqrt(d_i) - F_j/sqrt(d_j)||^2
// with d the self-inclusive degrees.
struct DegreeNormalizedAdaptive {
  std::vector<double> c;
};

// Attracts connected pairs, repels disconnected ones:
//   cp * sum_{(i,j) in E} ||F_i - F_j||^2 - cn * sum_{(i,j) not in E} ||F_i - F_j||^2
// (unordered pairs, i != j).
struct PairNorm {
  double cp = 1.0;
  double cn = 1.0;
};

// sum_{(i,j) in E} m_ij ||F_i - F_j||^2 where m_ij ~ Bernoulli(1 - q),
// regenerated from (seed, edge index) so the mask never needs storing.
struct DropEdge {
  double q = 0.0;
  std::uint64_t seed = 0;
};

// c * ||L F||_1 with the unnormalized Laplacian. Objective evaluation only.
struct TrendFilter {
  double c = 0.0;
};

using RegularizerSpec = std::variant<GlobalLaplacian, NodeAdaptive, DegreeNormalizedAdaptive,
                                     PairNorm, DropEdge, TrendFilter>;

struct FixedStep {
  double b = 0.0;
};
struct TheoremStep {};   // b = 1/(2 + 2c)
struct AdaptiveStep {};  // per-node b_i, used by the degree-normalized solver

using StepPolicy = std::variant<FixedStep, TheoremStep, AdaptiveStep>;

struct DenoiseConfig {
  int steps = 1;
  StepPolicy step = TheoremStep{};
};

struct DenoiseResult {
  Signal denoised;
  std::vector<double> objective_trace;  // steps + 1 entries, starting at F = S
};

namespace detail {

inline std::vector<double> dropedge_mask(const Graph& g, const DropEdge& spec) {
  constexpr std::uint64_t kDropEdgeStream = 0x9d5efab1u;
  if (spec.q < 0.0 || spec.q > 1.0)
    throw std::invalid_argument("DropEdge: q must lie in [0, 1]");
  std::vector<double> mask(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    mask[e] = hash_uniform(spec.seed, kDropEdgeStream, e) < 1.0 - spec.q ? 1.0 : 0.0;
  return mask;
}

inline double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int c = 0; c < d; ++c) {
    const double v = a[c] - b[c];
    s += v * v;
  }
  return s;
}

inline void require_node_weights(const std::vector<double>& c, const Graph& g, const char* who) {
  if (static_cast<int>(c.size()) != g.num_nodes)
    throw std::invalid_argument(std::string(who) + ": one weight per node required");
  for (double v : c)
    if (v < 0.0) throw std::invalid_argument(std::string(who) + ": weights must be nonnegative");
}

// Pairwise evaluation of c * tr(F' L F), the cross-check route for the
// sparse trace form.
inline double global_pairwise_form(const GlobalLaplacian& reg, const Signal& f, const Graph& g) {
  double s = 0.0;
  if (reg.kind == LaplacianKind::SymNormalizedSelfLoop) {
    for (auto [u, v] : g.edges) {
      const double du = std::sqrt(static_cast<double>(g.degrees_self_loop[u]));
      const double dv = std::sqrt(static_cast<double>(g.degrees_self_loop[v]));
      for (int c = 0; c < f.cols; ++c) {
        const double d = f(u, c) / du - f(v, c) / dv;
        s += d * d;
      }
    }
  } else {
    for (auto [u, v] : g.edges) s += sq_dist(f.row(u), f.row(v), f.cols);
  }
  return reg.c * s;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Objective evaluation
// --------------------------------------------------------------------------

// Regularizer value r(F) alone.
inline double regularizer_value(const RegularizerSpec& reg, const Signal& f, const Graph& g) {
  if (f.rows != g.num_nodes)
    throw std::invalid_argument("regularizer_value: signal rows must equal node count");
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GlobalLaplacian>) {
          if (r.c < 0.0) throw std::invalid_argument("GlobalLaplacian: c must be nonnegative");
          const double trace_form = r.c * trace_quadratic(laplacian(g, r.kind), f);
          const double edge_form = detail::global_pairwise_form(r, f, g);
          // Two independent evaluation routes; disagreement means a bug.
          if (std::fabs(trace_form - edge_form) >
              1e-10 * std::max(1.0, std::fabs(trace_form)))
            throw NumericalError("GlobalLaplacian objective: trace and edge forms disagree");
          return trace_form;
        } else if constexpr (std::is_same_v<T, NodeAdaptive>) {
          detail::require_node_weights(r.c, g, "NodeAdaptive");
          double s = 0.0;
          for (auto [u, v] : g.edges) {
            const double d = detail::sq_dist(f.row(u), f.row(v), f.cols);
            s += 0.5 * (r.c[u] + r.c[v]) * d;  // each direction weighted by its own c
          }
          return s;
        } else if constexpr (std::is_same_v<T, DegreeNormalizedAdaptive>) {
          detail::require_node_weights(r.c, g, "DegreeNormalizedAdaptive");
          double s = 0.0;
          for (auto [u, v] : g.edges) {
            const double du = std::sqrt(static_cast<double>(g.degrees_self_loop[u]));
            const double dv = std::sqrt(static_cast<double>(g.degrees_self_loop[v]));
            double d = 0.0;
            for (int c = 0; c < f.cols; ++c) {
              const double t = f(u, c) / du - f(v, c) / dv;
              d += t * t;
            }
            s += 0.5 * (r.c[u] + r.c[v]) * d;
          }
          return s;
        } else if constexpr (std::is_same_v<T, PairNorm>) {
          if (r.cp <= 0.0 || r.cn <= 0.0)
            throw std::invalid_argument("PairNorm: weights must be positive");
          double edge_sum = 0.0;
          for (auto [u, v] : g.edges) edge_sum += detail::sq_dist(f.row(u), f.row(v), f.cols);
          // All unordered pairs via sum identities, O(N d) instead of O(N^2 d):
          // sum_{i<j} ||F_i - F_j||^2 = N * sum_i ||F_i||^2 - ||sum_i F_i||^2.
          std::vector<double> col_sum(f.cols, 0.0);
          double sq_sum = 0.0;
          for (int i = 0; i < f.rows; ++i)
            for (int c = 0; c < f.cols; ++c) {
              col_sum[c] += f(i, c);
              sq_sum += f(i, c) * f(i, c);
            }
          double all_pairs = f.rows * sq_sum;
          for (double v : col_sum) all_pairs -= v * v;
          const double non_edge_sum = all_pairs - edge_sum;
          return r.cp * edge_sum - r.cn * non_edge_sum;
        } else if constexpr (std::is_same_v<T, DropEdge>) {
          const std::vector<double> mask = detail::dropedge_mask(g, r);
          double s = 0.0;
          for (std::size_t e = 0; e < g.edges.size(); ++e) {
            if (mask[e] == 0.0) continue;
            auto [u, v] = g.edges[e];
            s += detail::sq_dist(f.row(u), f.row(v), f.cols);
          }
          return s;
        } else {  // TrendFilter
          if (r.c < 0.0) throw std::invalid_argument("TrendFilter: c must be nonnegative");
          const Signal lf = spmm(laplacian(g, LaplacianKind::Unnormalized), f);
          double s = 0.0;
          for (double v : lf.data) s += std::fabs(v);
          return r.c * s;
        }
      },
      reg);
}

// Full objective ||F - S||_F^2 + r(F).
inline double objective(const Signal& f, const Signal& s, const RegularizerSpec& reg,
                        const Graph& g) {
  require_same_shape(f, s, "objective");
  return frobenius_sq_diff(f, s) + regularizer_value(reg, f, g);
}

// Gradient of r(F) with respect to F, for the differentiable variants.
inline Signal regularizer_gradient(const RegularizerSpec& reg, const Signal& f, const Graph& g) {
  if (f.rows != g.num_nodes)
    throw std::invalid_argument("regularizer_gradient: signal rows must equal node count");
  return std::visit(
      [&](const auto& r) -> Signal {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GlobalLaplacian>) {
          Signal grad = spmm(laplacian(g, r.kind), f);
          for (double& v : grad.data) v *= 2.0 * r.c;
          return grad;
        } else if constexpr (std::is_same_v<T, NodeAdaptive>) {
          detail::require_node_weights(r.c, g, "NodeAdaptive");
          Signal grad(f.rows, f.cols);
          for (int i = 0; i < g.num_nodes; ++i)
            for (int j : g.neighbors(i)) {
              const double w = r.c[i] + r.c[j];
              for (int c = 0; c < f.cols; ++c) grad(i, c) += w * (f(i, c) - f(j, c));
            }
          return grad;
        } else if constexpr (std::is_same_v<T, DegreeNormalizedAdaptive>) {
          detail::require_node_weights(r.c, g, "DegreeNormalizedAdaptive");
          Signal grad(f.rows, f.cols);
          for (int i = 0; i < g.num_nodes; ++i) {
            const double di = std::sqrt(static_cast<double>(g.degrees_self_loop[i]));
            for (int j : g.neighbors(i)) {
              const double dj = std::sqrt(static_cast<double>(g.degrees_self_loop[j]));
              const double w = (r.c[i] + r.c[j]) / di;
              for (int c = 0; c < f.cols; ++c)
                grad(i, c) += w * (f(i, c) / di - f(j, c) / dj);
            }
          }
          return grad;
        } else if constexpr (std::is_same_v<T, PairNorm>) {
          Signal grad(f.rows, f.cols);
          std::vector<double> col_sum(f.cols, 0.0);
          for (int i = 0; i < f.rows; ++i)
            for (int c = 0; c < f.cols; ++c) col_sum[c] += f(i, c);
          for (int i = 0; i < f.rows; ++i) {
            double* gi = grad.row(i);
            // d/dF_i of the all-pairs sum, written via the same identity
            // used for the objective.
            for (int c = 0; c < f.cols; ++c)
              gi[c] = -r.cn * (2.0 * f.rows * f(i, c) - 2.0 * col_sum[c]);
            for (int j : g.neighbors(i))
              for (int c = 0; c < f.cols; ++c)
                gi[c] += 2.0 * (r.cp + r.cn) * (f(i, c) - f(j, c));
          }
          return grad;
        } else if constexpr (std::is_same_v<T, DropEdge>) {
          const std::vector<double> mask = detail::dropedge_mask(g, r);
          Signal grad(f.rows, f.cols);
          for (std::size_t e = 0; e < g.edges.size(); ++e) {
            if (mask[e] == 0.0) continue;
            auto [u, v] = g.edges[e];
            for (int c = 0; c < f.cols; ++c) {
              const double d = 2.0 * (f(u, c) - f(v, c));
              grad(u, c) += d;
              grad(v, c) -= d;
            }
          }
          return grad;
        } else {
          throw UnsupportedSolverError(
              "TrendFilter is evaluation-only: no gradient solver available");
        }
      },
      reg);
}

// --------------------------------------------------------------------------
// Solvers
// --------------------------------------------------------------------------

// Exact minimizer of ||F - S||^2 + c tr(F' L F): solves (I + c L) F = S with
// CG. The system is SPD for any c >= 0 since L is positive semidefinite.
inline Signal closed_form_denoise(const Signal& s, double c, const Graph& g, LaplacianKind kind,
                                  double rel_tol = 1e-10, int max_iter = -1) {
  if (c < 0.0) throw std::invalid_argument("closed_form_denoise: c must be nonnegative");
  if (s.rows != g.num_nodes)
    throw std::invalid_argument("closed_form_denoise: signal rows must equal node count");
  const SparseMatrix system =
      csr_combine(1.0, identity_matrix(g.num_nodes), c, laplacian(g, kind));
  return solve_spd(system, s, rel_tol, max_iter);
}

// Iterative gradient descent on the global objective with the symmetrically
// normalized self-loop Laplacian. The theorem stepsize b = 1/(2+2c) turns
// each step into F <- S/(1+c) + c/(1+c) * Atilde F.
inline DenoiseResult gd_denoise(const Signal& s, double c, const DenoiseConfig& config,
                                const Graph& g) {
  if (c < 0.0) throw std::invalid_argument("gd_denoise: c must be nonnegative");
  if (config.steps < 1) throw std::invalid_argument("gd_denoise: steps must be >= 1");
  if (s.rows != g.num_nodes)
    throw std::invalid_argument("gd_denoise: signal rows must equal node count");
  if (std::holds_alternative<AdaptiveStep>(config.step))
    throw std::invalid_argument("gd_denoise: adaptive stepsizes belong to the per-node solver");

  double b;
  if (std::holds_alternative<TheoremStep>(config.step)) {
    b = 1.0 / (2.0 + 2.0 * c);
  } else {
    b = std::get<FixedStep>(config.step).b;
    if (b <= 0.0) throw std::invalid_argument("gd_denoise: stepsize must be positive");
  }

  const SparseMatrix tilde = normalized_adjacency(g);
  const RegularizerSpec reg = GlobalLaplacian{c, LaplacianKind::SymNormalizedSelfLoop};

  DenoiseResult out;
  out.denoised = s;
  out.objective_trace.reserve(config.steps + 1);
  out.objective_trace.push_back(objective(out.denoised, s, reg, g));

  const double keep = 1.0 - 2.0 * b - 2.0 * b * c;  // exactly 0 at the theorem stepsize
  for (int k = 0; k < config.steps; ++k) {
    const Signal prop = spmm(tilde, out.denoised);
    Signal next(s.rows, s.cols);
    if (std::holds_alternative<TheoremStep>(config.step)) {
      const double anchor = 1.0 / (1.0 + c);
      const double smooth = c / (1.0 + c);
      for (std::size_t i = 0; i < next.data.size(); ++i)
        next.data[i] = anchor * s.data[i] + smooth * prop.data[i];
    } else {
      for (std::size_t i = 0; i < next.data.size(); ++i)
        next.data[i] =
            keep * out.denoised.data[i] + 2.0 * b * s.data[i] + 2.0 * b * c * prop.data[i];
    }
    out.denoised = std::move(next);
    out.objective_trace.push_back(objective(out.denoised, s, reg, g));
  }
  return out;
}

// Per-node stepsizes 1 / sum_{j in closed N(i)} (c_i + c_j) for the
// node-adaptive objective. The closed-neighborhood sum includes the self
// term 2 c_i.
inline std::vector<double> node_adaptive_stepsizes(const std::vector<double>& c, const Graph& g) {
  detail::require_node_weights(c, g, "node_adaptive_stepsizes");
  std::vector<double> b(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    double denom = 2.0 * c[i];
    for (int j : g.neighbors(i)) denom += c[i] + c[j];
    if (denom <= 0.0) {
      std::ostringstream msg;
      msg << "node " << i << " has zero smoothing weight over its closed neighborhood";
      throw DegenerateNodeError(msg.str());
    }
    b[i] = 1.0 / denom;
  }
  return b;
}

// One gradient step from S on the node-adaptive objective. With the
// stepsizes above the self coefficient cancels and every output row is a
// convex combination of the closed neighborhood:
//   F_i = sum_{j in closed N(i)} b_i (c_i + c_j) S_j.
inline Signal adaptive_gd_step(const Signal& s, const std::vector<double>& c, const Graph& g) {
  if (s.rows != g.num_nodes)
    throw std::invalid_argument("adaptive_gd_step: signal rows must equal node count");
  const std::vector<double> b = node_adaptive_stepsizes(c, g);
  Signal out(s.rows, s.cols);
  for (int i = 0; i < g.num_nodes; ++i) {
    double* oi = out.row(i);
    const double self_w = b[i] * 2.0 * c[i];
    for (int col = 0; col < s.cols; ++col) oi[col] = self_w * s(i, col);
    for (int j : g.neighbors(i)) {
      const double w = b[i] * (c[i] + c[j]);
      for (int col = 0; col < s.cols; ++col) oi[col] += w * s(j, col);
    }
  }
  return out;
}

// Per-node stepsizes 1 / (2 + sum_{j in closed N(i)} (c_i + c_j) / d_i) for
// the degree-normalized objective; always finite thanks to the leading 2.
inline std::vector<double> degree_adaptive_stepsizes(const std::vector<double>& c,
                                                     const Graph& g) {
  detail::require_node_weights(c, g, "degree_adaptive_stepsizes");
  std::vector<double> b(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    const double d = static_cast<double>(g.degrees_self_loop[i]);
    double sum = 2.0 * c[i];
    for (int j : g.neighbors(i)) sum += c[i] + c[j];
    b[i] = 1.0 / (2.0 + sum / d);
  }
  return b;
}

// One degree-normalized update of every row:
//   F_i <- 2 b_i S_i + b_i sum_{j in closed N(i)} (c_i + c_j) F_j / sqrt(d_i d_j).
// Shared by the denoising solver and the adaptive aggregation operator.
inline void degree_adaptive_update(const Signal& anchor, const Signal& prev,
                                   const std::vector<double>& c, const std::vector<double>& b,
                                   const Graph& g, Signal& out) {
  for (int i = 0; i < g.num_nodes; ++i) {
    const double di = std::sqrt(static_cast<double>(g.degrees_self_loop[i]));
    double* oi = out.row(i);
    const double self_w = b[i] * 2.0 * c[i] / (di * di);
    for (int col = 0; col < prev.cols; ++col)
      oi[col] = 2.0 * b[i] * anchor(i, col) + self_w * prev(i, col);
    for (int j : g.neighbors(i)) {
      const double dj = std::sqrt(static_cast<double>(g.degrees_self_loop[j]));
      const double w = b[i] * (c[i] + c[j]) / (di * dj);
      for (int col = 0; col < prev.cols; ++col) oi[col] += w * prev(j, col);
    }
  }
}

// Iterative gradient descent on the degree-normalized adaptive objective
// with the per-node theorem stepsizes.
inline DenoiseResult degree_normalized_adaptive_denoise(const Signal& s,
                                                        const std::vector<double>& c, int steps,
                                                        const Graph& g) {
  if (steps < 1)
    throw std::invalid_argument("degree_normalized_adaptive_denoise: steps must be >= 1");
  if (s.rows != g.num_nodes)
    throw std::invalid_argument(
        "degree_normalized_adaptive_denoise: signal rows must equal node count");
  const std::vector<double> b = degree_adaptive_stepsizes(c, g);
  const RegularizerSpec reg = DegreeNormalizedAdaptive{c};

  DenoiseResult out;
  out.denoised = s;
  out.objective_trace.reserve(steps + 1);
  out.objective_trace.push_back(objective(out.denoised, s, reg, g));
  Signal next(s.rows, s.cols);
  for (int k = 0; k < steps; ++k) {
    degree_adaptive_update(s, out.denoised, c, b, g, next);
    std::swap(out.denoised, next);
    out.objective_trace.push_back(objective(out.denoised, s, reg, g));
  }
  return out;
}

// Plain gradient descent on fidelity + r(F) with a fixed stepsize. The
// DropEdge mask is drawn once from its seed and held across steps.
inline DenoiseResult generic_gd_denoise(const Signal& s, const RegularizerSpec& reg, int steps,
                                        double stepsize, const Graph& g) {
  if (steps < 1) throw std::invalid_argument("generic_gd_denoise: steps must be >= 1");
  if (stepsize <= 0.0)
    throw std::invalid_argument("generic_gd_denoise: stepsize must be positive");
  if (std::holds_alternative<TrendFilter>(reg))
    throw UnsupportedSolverError(
        "TrendFilter is evaluation-only: no gradient solver available");

  DenoiseResult out;
  out.denoised = s;
  out.objective_trace.reserve(steps + 1);
  out.objective_trace.push_back(objective(out.denoised, s, reg, g));
  for (int k = 0; k < steps; ++k) {
    Signal grad = regularizer_gradient(reg, out.denoised, g);
    for (std::size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] += 2.0 * (out.denoised.data[i] - s.data[i]);
    for (std::size_t i = 0; i < grad.data.size(); ++i)
      out.denoised.data[i] -= stepsize * grad.data[i];
    out.objective_trace.push_back(objective(out.denoised, s, reg, g));
  }
  return out;
}

// A stepsize that keeps plain gradient descent stable for the given
// regularizer, from coarse curvature bounds.
inline double suggested_stepsize(const RegularizerSpec& reg, const Graph& g) {
  int max_deg = 0;
  for (int d : g.degrees) max_deg = std::max(max_deg, d);
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GlobalLaplacian>) {
          const double lam =
              r.kind == LaplacianKind::SymNormalizedSelfLoop ? 2.0 : 2.0 * max_deg;
          return 1.0 / (2.0 + 2.0 * r.c * lam);
        } else if constexpr (std::is_same_v<T, NodeAdaptive>) {
          double cmax = 0.0;
          for (double v : r.c) cmax = std::max(cmax, v);
          return 1.0 / (2.0 + 4.0 * cmax * (max_deg + 1));
        } else if constexpr (std::is_same_v<T, DegreeNormalizedAdaptive>) {
          double cmax = 0.0;
          for (double v : r.c) cmax = std::max(cmax, v);
          return 1.0 / (2.0 + 4.0 * cmax);
        } else if constexpr (std::is_same_v<T, PairNorm>) {
          return 1.0 / (2.0 + 4.0 * (r.cp + r.cn) * max_deg + 4.0 * r.cn * g.num_nodes);
        } else if constexpr (std::is_same_v<T, DropEdge>) {
          return 1.0 / (2.0 + 4.0 * max_deg);
        } else {
          throw UnsupportedSolverError(
              "TrendFilter is evaluation-only: no gradient solver available");
        }
      },
      reg);
}

}  // namespace gsd

#endif  // GSD_DENOISE_HPP
