#ifndef GSD_SPARSE_HPP
#define GSD_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gsd/graph.hpp"
#include "gsd/signal.hpp"

namespace gsd {

// Compressed sparse row matrix with 64-bit real values.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_offsets;  // size rows + 1, nondecreasing
  std::vector<int> col_indices;  // strictly increasing within each row
  std::vector<double> values;

  int nnz() const { return static_cast<int>(col_indices.size()); }

  // Value at (i, j), zero when the entry is not stored.
  double at(int i, int j) const {
    const int lo = row_offsets[i], hi = row_offsets[i + 1];
    auto it = std::lower_bound(col_indices.begin() + lo, col_indices.begin() + hi, j);
    if (it == col_indices.begin() + hi || *it != j) return 0.0;
    return values[it - col_indices.begin()];
  }

  bool structurally_valid() const {
    if (static_cast<int>(row_offsets.size()) != rows + 1) return false;
    if (row_offsets.front() != 0 || row_offsets.back() != nnz()) return false;
    for (int i = 0; i < rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1]) return false;
      for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (col_indices[k] < 0 || col_indices[k] >= cols) return false;
        if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) return false;
      }
    }
    return values.size() == col_indices.size();
  }

  // Pairwise check of m[i][j] against m[j][i].
  bool is_symmetric(double tol = 0.0) const {
    if (rows != cols) return false;
    for (int i = 0; i < rows; ++i)
      for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        if (std::fabs(values[k] - at(col_indices[k], i)) > tol) return false;
    return true;
  }
};

inline SparseMatrix identity_matrix(int n) {
  SparseMatrix m;
  m.rows = m.cols = n;
  m.row_offsets.resize(n + 1);
  m.col_indices.resize(n);
  m.values.assign(n, 1.0);
  for (int i = 0; i <= n; ++i) m.row_offsets[i] = i;
  for (int i = 0; i < n; ++i) m.col_indices[i] = i;
  return m;
}

inline SparseMatrix transpose(const SparseMatrix& m) {
  SparseMatrix t;
  t.rows = m.cols;
  t.cols = m.rows;
  t.row_offsets.assign(t.rows + 1, 0);
  for (int c : m.col_indices) ++t.row_offsets[c + 1];
  for (int i = 0; i < t.rows; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
  t.col_indices.resize(m.nnz());
  t.values.resize(m.nnz());
  std::vector<int> fill(t.row_offsets.begin(), t.row_offsets.end() - 1);
  for (int i = 0; i < m.rows; ++i)
    for (int k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      const int pos = fill[m.col_indices[k]]++;
      t.col_indices[pos] = i;  // source rows scanned in order, so columns stay sorted
      t.values[pos] = m.values[k];
    }
  return t;
}

// a*A + b*B for same-shaped matrices; rows merged entry-wise.
inline SparseMatrix csr_combine(double a, const SparseMatrix& ma, double b, const SparseMatrix& mb) {
  if (ma.rows != mb.rows || ma.cols != mb.cols)
    throw std::invalid_argument("csr_combine: dimension mismatch");
  SparseMatrix out;
  out.rows = ma.rows;
  out.cols = ma.cols;
  out.row_offsets.assign(out.rows + 1, 0);
  out.col_indices.reserve(ma.nnz() + mb.nnz());
  out.values.reserve(ma.nnz() + mb.nnz());
  for (int i = 0; i < out.rows; ++i) {
    int ka = ma.row_offsets[i], kb = mb.row_offsets[i];
    const int ea = ma.row_offsets[i + 1], eb = mb.row_offsets[i + 1];
    while (ka < ea || kb < eb) {
      int col;
      double v = 0.0;
      if (kb >= eb || (ka < ea && ma.col_indices[ka] < mb.col_indices[kb])) {
        col = ma.col_indices[ka];
        v = a * ma.values[ka++];
      } else if (ka >= ea || mb.col_indices[kb] < ma.col_indices[ka]) {
        col = mb.col_indices[kb];
        v = b * mb.values[kb++];
      } else {
        col = ma.col_indices[ka];
        v = a * ma.values[ka++] + b * mb.values[kb++];
      }
      out.col_indices.push_back(col);
      out.values.push_back(v);
    }
    out.row_offsets[i + 1] = static_cast<int>(out.col_indices.size());
  }
  return out;
}

// Exact sparse-dense product.
inline Signal spmm(const SparseMatrix& m, const Signal& x) {
  if (m.cols != x.rows) throw std::invalid_argument("spmm: dimension mismatch");
  Signal y(m.rows, x.cols);
  for (int i = 0; i < m.rows; ++i) {
    double* yi = y.row(i);
    for (int k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      const double v = m.values[k];
      const double* xj = x.row(m.col_indices[k]);
      for (int c = 0; c < x.cols; ++c) yi[c] += v * xj[c];
    }
  }
  return y;
}

inline void spmm_into(const SparseMatrix& m, const double* x, int xcols, double* y) {
  for (int i = 0; i < m.rows; ++i) {
    double* yi = y + static_cast<std::size_t>(i) * xcols;
    std::fill(yi, yi + xcols, 0.0);
    for (int k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      const double v = m.values[k];
      const double* xj = x + static_cast<std::size_t>(m.col_indices[k]) * xcols;
      for (int c = 0; c < xcols; ++c) yi[c] += v * xj[c];
    }
  }
}

// sum_ij F_ij (M F)_ij, the quadratic form behind every trace objective.
inline double trace_quadratic(const SparseMatrix& m, const Signal& f) {
  if (m.rows != m.cols || m.cols != f.rows)
    throw std::invalid_argument("trace_quadratic: dimension mismatch");
  const Signal mf = spmm(m, f);
  double s = 0.0;
  for (std::size_t k = 0; k < f.data.size(); ++k) s += f.data[k] * mf.data[k];
  return s;
}

// CSR skeleton of the self-inclusive neighborhoods: row i holds
// sorted(N(i) + {i}). Shared by the normalized adjacency, attention, and
// every neighborhood-segmented operation.
struct SelfLoopPattern {
  std::vector<int> offsets;
  std::vector<int> cols;

  int num_rows() const { return static_cast<int>(offsets.size()) - 1; }
  int nnz() const { return static_cast<int>(cols.size()); }
};

inline SelfLoopPattern self_loop_pattern(const Graph& g) {
  SelfLoopPattern p;
  p.offsets.assign(g.num_nodes + 1, 0);
  for (int i = 0; i < g.num_nodes; ++i)
    p.offsets[i + 1] = p.offsets[i] + g.degrees_self_loop[i];
  p.cols.resize(p.offsets.back());
  for (int i = 0; i < g.num_nodes; ++i) {
    int pos = p.offsets[i];
    bool placed_self = false;
    for (int j : g.neighbors(i)) {
      if (!placed_self && i < j) {
        p.cols[pos++] = i;
        placed_self = true;
      }
      p.cols[pos++] = j;
    }
    if (!placed_self) p.cols[pos++] = i;
  }
  return p;
}

// Binary adjacency A (no self-loops).
inline SparseMatrix adjacency(const Graph& g) {
  SparseMatrix m;
  m.rows = m.cols = g.num_nodes;
  m.row_offsets = g.adj_offsets;
  m.col_indices = g.adj_cols;
  m.values.assign(m.col_indices.size(), 1.0);
  return m;
}

// Binary adjacency with self-loops, A + I.
inline SparseMatrix self_loop_adjacency(const Graph& g) {
  const SelfLoopPattern p = self_loop_pattern(g);
  SparseMatrix m;
  m.rows = m.cols = g.num_nodes;
  m.row_offsets = p.offsets;
  m.col_indices = p.cols;
  m.values.assign(m.col_indices.size(), 1.0);
  return m;
}

// Symmetrically normalized adjacency with self-loops: entry (i, j) is
// 1/sqrt(d_i d_j) over the self-inclusive neighborhood, d being the
// self-inclusive degree. An isolated node gets the single entry 1.
inline SparseMatrix normalized_adjacency(const Graph& g) {
  const SelfLoopPattern p = self_loop_pattern(g);
  SparseMatrix m;
  m.rows = m.cols = g.num_nodes;
  m.row_offsets = p.offsets;
  m.col_indices = p.cols;
  m.values.resize(p.nnz());
  std::vector<double> inv_sqrt(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degrees_self_loop[i]));
  for (int i = 0; i < g.num_nodes; ++i)
    for (int k = p.offsets[i]; k < p.offsets[i + 1]; ++k)
      m.values[k] = inv_sqrt[i] * inv_sqrt[p.cols[k]];
  return m;
}

enum class LaplacianKind {
  Unnormalized,          // D - A
  UnnormalizedSelfLoop,  // (D + I) - (A + I), same matrix by cancellation
  SymNormalizedSelfLoop  // I - normalized_adjacency
};

inline SparseMatrix laplacian(const Graph& g, LaplacianKind kind) {
  switch (kind) {
    case LaplacianKind::Unnormalized:
    case LaplacianKind::UnnormalizedSelfLoop: {
      // Diagonal kept explicit (even a 0 for isolated nodes) so that
      // I + c*L combinations stay cheap.
      const SelfLoopPattern p = self_loop_pattern(g);
      SparseMatrix m;
      m.rows = m.cols = g.num_nodes;
      m.row_offsets = p.offsets;
      m.col_indices = p.cols;
      m.values.resize(p.nnz());
      for (int i = 0; i < g.num_nodes; ++i)
        for (int k = p.offsets[i]; k < p.offsets[i + 1]; ++k)
          m.values[k] = (p.cols[k] == i) ? static_cast<double>(g.degrees[i]) : -1.0;
      return m;
    }
    case LaplacianKind::SymNormalizedSelfLoop: {
      SparseMatrix m = normalized_adjacency(g);
      for (int i = 0; i < m.rows; ++i)
        for (int k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
          m.values[k] = (m.col_indices[k] == i) ? 1.0 - m.values[k] : -m.values[k];
      return m;
    }
  }
  throw std::invalid_argument("laplacian: unknown kind");
}

}  // namespace gsd

#endif  // GSD_SPARSE_HPP
