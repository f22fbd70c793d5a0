#ifndef GSD_CG_HPP
#define GSD_CG_HPP

#include <cmath>
#include <sstream>
#include <vector>

#include "gsd/errors.hpp"
#include "gsd/signal.hpp"
#include "gsd/sparse.hpp"

namespace gsd {

struct CgOutcome {
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

// Conjugate gradient for a symmetric positive definite system m x = b.
// x starts from zero; convergence when ||r|| <= rel_tol * ||b||.
inline CgOutcome conjugate_gradient(const SparseMatrix& m, const std::vector<double>& b,
                                    std::vector<double>& x, double rel_tol, int max_iter) {
  const int n = m.rows;
  x.assign(n, 0.0);
  std::vector<double> r = b;
  std::vector<double> p = r;
  std::vector<double> q(n, 0.0);

  double rr = 0.0;
  for (double v : r) rr += v * v;
  const double b_norm = std::sqrt(rr);
  const double stop = rel_tol * b_norm;
  if (b_norm == 0.0) return {0, 0.0, true};

  int it = 0;
  while (it < max_iter && std::sqrt(rr) > stop) {
    ++it;
    spmm_into(m, p.data(), 1, q.data());
    double pq = 0.0;
    for (int i = 0; i < n; ++i) pq += p[i] * q[i];
    if (pq <= 0.0)
      throw SolverError("conjugate_gradient: operator is not positive definite");
    const double alpha = rr / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    double rr_new = 0.0;
    for (double v : r) rr_new += v * v;
    const double beta = rr_new / rr;
    rr = rr_new;
    if (std::sqrt(rr) <= stop) break;
    for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  const double res = std::sqrt(rr);
  return {it, res, res <= stop};
}

// Column-wise CG solve of m F = rhs. Throws SolverError with a residual
// report when any column fails to converge. max_iter defaults to 10 * n.
inline Signal solve_spd(const SparseMatrix& m, const Signal& rhs, double rel_tol = 1e-10,
                        int max_iter = -1) {
  if (m.rows != m.cols || m.cols != rhs.rows)
    throw std::invalid_argument("solve_spd: dimension mismatch");
  const int n = m.rows;
  if (max_iter < 0) max_iter = 10 * n;

  Signal out(rhs.rows, rhs.cols);
  std::vector<double> b(n), x(n);
  for (int c = 0; c < rhs.cols; ++c) {
    for (int i = 0; i < n; ++i) b[i] = rhs(i, c);
    const CgOutcome cg = conjugate_gradient(m, b, x, rel_tol, max_iter);
    if (!cg.converged) {
      std::ostringstream msg;
      msg << "solve_spd: column " << c << " did not converge after " << cg.iterations
          << " iterations, residual " << cg.residual_norm;
      throw SolverError(msg.str());
    }
    for (int i = 0; i < n; ++i) out(i, c) = x[i];
  }
  return out;
}

}  // namespace gsd

#endif  // GSD_CG_HPP
