#ifndef GSD_AUTODIFF_HPP
#define GSD_AUTODIFF_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "gsd/errors.hpp"
#include "gsd/rng.hpp"
#include "gsd/signal.hpp"
#include "gsd/sparse.hpp"

namespace gsd::ad {

struct Shape {
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const Shape&) const = default;
};

// Handle into a Tape. Only valid for the tape that created it.
struct Var {
  int id = -1;
};

// A sparse matrix used as a constant operand, with its transpose cached for
// the backward pass. For symmetric operands the transpose aliases nothing.
struct SparseOperand {
  SparseMatrix mat;
  SparseMatrix mat_t;
  bool symmetric = false;

  static std::shared_ptr<const SparseOperand> make(SparseMatrix m, bool is_symmetric) {
    auto op = std::make_shared<SparseOperand>();
    op->symmetric = is_symmetric;
    if (!is_symmetric) op->mat_t = transpose(m);
    op->mat = std::move(m);
    return op;
  }
  const SparseMatrix& transposed() const { return symmetric ? mat : mat_t; }
};

using PatternPtr = std::shared_ptr<const SelfLoopPattern>;

// Reverse-mode tape over dense buffers. Nodes are appended in evaluation
// order, which is already a topological order, so backward is a single
// reverse sweep. Gradients are only materialized along paths that reach a
// parameter.
class Tape {
 public:
  Var constant(int rows, int cols, std::vector<double> data) {
    return emplace({rows, cols}, std::move(data), false);
  }
  Var constant(const Signal& s) {
    return emplace({s.rows, s.cols}, s.data, false);
  }
  Var param(int rows, int cols, std::vector<double> data) {
    return emplace({rows, cols}, std::move(data), true);
  }

  Shape shape(Var v) const { return node(v).shape; }
  const std::vector<double>& value(Var v) const { return node(v).value; }
  const std::vector<double>& grad(Var v) const { return node(v).grad; }

  Signal signal(Var v) const {
    const Node& n = node(v);
    Signal s(n.shape.rows, n.shape.cols);
    s.data = n.value;
    return s;
  }

  // ---- dense algebra ------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Shape sa = shape(a), sb = shape(b);
    if (sa.cols != sb.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    std::vector<double> out(static_cast<std::size_t>(sa.rows) * sb.cols, 0.0);
    const auto& va = value(a);
    const auto& vb = value(b);
    for (int i = 0; i < sa.rows; ++i)
      for (int k = 0; k < sa.cols; ++k) {
        const double aik = va[idx(i, k, sa.cols)];
        if (aik == 0.0) continue;
        const double* brow = vb.data() + idx(k, 0, sb.cols);
        double* orow = out.data() + idx(i, 0, sb.cols);
        for (int j = 0; j < sb.cols; ++j) orow[j] += aik * brow[j];
      }
    Var r = emplace({sa.rows, sb.cols}, std::move(out), needs(a) || needs(b));
    attach(r, [a, b, r, sa, sb](Tape& t) {
      const auto& go = t.node(r).grad;
      if (t.needs(a)) {  // dA = dOut B^T
        auto& ga = t.node(a).grad;
        const auto& vb = t.value(b);
        for (int i = 0; i < sa.rows; ++i)
          for (int k = 0; k < sa.cols; ++k) {
            double acc = 0.0;
            const double* grow = go.data() + idx(i, 0, sb.cols);
            const double* brow = vb.data() + idx(k, 0, sb.cols);
            for (int j = 0; j < sb.cols; ++j) acc += grow[j] * brow[j];
            ga[idx(i, k, sa.cols)] += acc;
          }
      }
      if (t.needs(b)) {  // dB = A^T dOut
        auto& gb = t.node(b).grad;
        const auto& va = t.value(a);
        for (int i = 0; i < sa.rows; ++i)
          for (int k = 0; k < sa.cols; ++k) {
            const double aik = va[idx(i, k, sa.cols)];
            if (aik == 0.0) continue;
            const double* grow = go.data() + idx(i, 0, sb.cols);
            double* brow = gb.data() + idx(k, 0, sb.cols);
            for (int j = 0; j < sb.cols; ++j) brow[j] += aik * grow[j];
          }
      }
    });
    return r;
  }

  // Constant sparse operand times dense variable.
  Var spmm(std::shared_ptr<const SparseOperand> m, Var x) {
    const Shape sx = shape(x);
    if (m->mat.cols != sx.rows) throw std::invalid_argument("spmm: dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(m->mat.rows) * sx.cols);
    spmm_into(m->mat, value(x).data(), sx.cols, out.data());
    Var r = emplace({m->mat.rows, sx.cols}, std::move(out), needs(x));
    attach(r, [m, x, r, sx](Tape& t) {
      if (!t.needs(x)) return;
      const auto& go = t.node(r).grad;
      auto& gx = t.node(x).grad;
      const SparseMatrix& mt = m->transposed();
      for (int i = 0; i < mt.rows; ++i) {
        double* gi = gx.data() + idx(i, 0, sx.cols);
        for (int k = mt.row_offsets[i]; k < mt.row_offsets[i + 1]; ++k) {
          const double v = mt.values[k];
          const double* gr = go.data() + idx(mt.col_indices[k], 0, sx.cols);
          for (int c = 0; c < sx.cols; ++c) gi[c] += v * gr[c];
        }
      }
    });
    return r;
  }

  // ---- elementwise --------------------------------------------------------

  Var add(Var a, Var b) { return zip(a, b, "add", [](double x, double y) { return x + y; }); }
  Var sub(Var a, Var b) { return zip(a, b, "sub", [](double x, double y) { return x - y; }); }

  Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    const auto& va = value(a);
    const auto& vb = value(b);
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    Var r = emplace(shape(a), std::move(out), needs(a) || needs(b));
    attach(r, [a, b, r](Tape& t) {
      const auto& go = t.node(r).grad;
      if (t.needs(a)) {
        auto& ga = t.node(a).grad;
        const auto& vb = t.value(b);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
      }
      if (t.needs(b)) {
        auto& gb = t.node(b).grad;
        const auto& va = t.value(a);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
      }
    });
    return r;
  }

  // Broadcast a (1 x cols) bias over every row.
  Var add_bias(Var x, Var bias) {
    const Shape sx = shape(x), sb = shape(bias);
    if (sb.rows != 1 || sb.cols != sx.cols)
      throw std::invalid_argument("add_bias: bias must be 1 x cols");
    const auto& vx = value(x);
    const auto& vb = value(bias);
    std::vector<double> out(vx.size());
    for (int i = 0; i < sx.rows; ++i)
      for (int c = 0; c < sx.cols; ++c) out[idx(i, c, sx.cols)] = vx[idx(i, c, sx.cols)] + vb[c];
    Var r = emplace(sx, std::move(out), needs(x) || needs(bias));
    attach(r, [x, bias, r, sx](Tape& t) {
      const auto& go = t.node(r).grad;
      if (t.needs(x)) {
        auto& gx = t.node(x).grad;
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (t.needs(bias)) {
        auto& gb = t.node(bias).grad;
        for (int i = 0; i < sx.rows; ++i)
          for (int c = 0; c < sx.cols; ++c) gb[c] += go[idx(i, c, sx.cols)];
      }
    });
    return r;
  }

  // Multiply row i of x by v_i, v being (rows x 1).
  Var scale_rows(Var x, Var v) {
    const Shape sx = shape(x), sv = shape(v);
    if (sv.rows != sx.rows || sv.cols != 1)
      throw std::invalid_argument("scale_rows: scaler must be rows x 1");
    const auto& vx = value(x);
    const auto& vv = value(v);
    std::vector<double> out(vx.size());
    for (int i = 0; i < sx.rows; ++i)
      for (int c = 0; c < sx.cols; ++c) out[idx(i, c, sx.cols)] = vx[idx(i, c, sx.cols)] * vv[i];
    Var r = emplace(sx, std::move(out), needs(x) || needs(v));
    attach(r, [x, v, r, sx](Tape& t) {
      const auto& go = t.node(r).grad;
      if (t.needs(x)) {
        auto& gx = t.node(x).grad;
        const auto& vv = t.value(v);
        for (int i = 0; i < sx.rows; ++i)
          for (int c = 0; c < sx.cols; ++c) gx[idx(i, c, sx.cols)] += go[idx(i, c, sx.cols)] * vv[i];
      }
      if (t.needs(v)) {
        auto& gv = t.node(v).grad;
        const auto& vx = t.value(x);
        for (int i = 0; i < sx.rows; ++i) {
          double acc = 0.0;
          for (int c = 0; c < sx.cols; ++c)
            acc += go[idx(i, c, sx.cols)] * vx[idx(i, c, sx.cols)];
          gv[i] += acc;
        }
      }
    });
    return r;
  }

  Var scale(Var x, double k) {
    return map(x, [k](double v) { return k * v; }, [k](double, double) { return k; });
  }
  Var add_scalar(Var x, double k) {
    return map(x, [k](double v) { return v + k; }, [](double, double) { return 1.0; });
  }
  Var reciprocal(Var x) {
    return map(x, [](double v) { return 1.0 / v; },
               [](double, double y) { return -y * y; });  // d(1/x)/dx = -1/x^2
  }
  Var relu(Var x) {
    return map(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
  }
  Var leaky_relu(Var x, double slope) {
    return map(x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
               [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
  }
  Var sigmoid(Var x) {
    return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
  }

  Var sum(Var x) {
    const auto& vx = value(x);
    double s = 0.0;
    for (double v : vx) s += v;
    Var r = emplace({1, 1}, {s}, needs(x));
    attach(r, [x, r](Tape& t) {
      if (!t.needs(x)) return;
      const double g = t.node(r).grad[0];
      for (double& v : t.node(x).grad) v += g;
    });
    return r;
  }

  // Inverted dropout as multiplication by a counter-seeded constant mask;
  // a no-op when rate is zero or in eval mode.
  Var dropout(Var x, double rate, bool train_mode, std::uint64_t seed, std::uint64_t stream) {
    if (!train_mode || rate == 0.0) return x;
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    const Shape sx = shape(x);
    std::vector<double> mask(sx.size());
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask[i] = hash_uniform(seed, stream, i) < keep ? 1.0 / keep : 0.0;
    return mul(x, constant(sx.rows, sx.cols, std::move(mask)));
  }

  // ---- neighborhood-segmented ops ----------------------------------------

  // e_k = u[row(k)] + v[col(k)] over the pattern's entries; the additive
  // form of pairwise attention scores.
  Var edge_pair_sum(Var u, Var v, PatternPtr p) {
    const Shape su = shape(u), sv = shape(v);
    const int n = p->num_rows();
    if (su.rows != n || su.cols != 1 || sv.rows != n || sv.cols != 1)
      throw std::invalid_argument("edge_pair_sum: operands must be num_nodes x 1");
    std::vector<double> out(p->nnz());
    const auto& vu = value(u);
    const auto& vv = value(v);
    for (int i = 0; i < n; ++i)
      for (int k = p->offsets[i]; k < p->offsets[i + 1]; ++k) out[k] = vu[i] + vv[p->cols[k]];
    Var r = emplace({p->nnz(), 1}, std::move(out), needs(u) || needs(v));
    attach(r, [u, v, r, p](Tape& t) {
      const auto& go = t.node(r).grad;
      const int n = p->num_rows();
      if (t.needs(u)) {
        auto& gu = t.node(u).grad;
        for (int i = 0; i < n; ++i)
          for (int k = p->offsets[i]; k < p->offsets[i + 1]; ++k) gu[i] += go[k];
      }
      if (t.needs(v)) {
        auto& gv = t.node(v).grad;
        for (int k = 0; k < p->nnz(); ++k) gv[p->cols[k]] += go[k];
      }
    });
    return r;
  }

  // Softmax over each row segment of the pattern.
  Var neighborhood_softmax(Var e, PatternPtr p) {
    const Shape se = shape(e);
    if (se.rows != p->nnz() || se.cols != 1)
      throw std::invalid_argument("neighborhood_softmax: scores must be nnz x 1");
    std::vector<double> out = value(e);
    const int n = p->num_rows();
    for (int i = 0; i < n; ++i) {
      const int lo = p->offsets[i], hi = p->offsets[i + 1];
      double m = out[lo];
      for (int k = lo + 1; k < hi; ++k) m = std::max(m, out[k]);
      double z = 0.0;
      for (int k = lo; k < hi; ++k) {
        out[k] = std::exp(out[k] - m);
        z += out[k];
      }
      for (int k = lo; k < hi; ++k) out[k] /= z;
    }
    Var r = emplace(se, std::move(out), needs(e));
    attach(r, [e, r, p](Tape& t) {
      if (!t.needs(e)) return;
      const auto& go = t.node(r).grad;
      const auto& alpha = t.value(r);
      auto& ge = t.node(e).grad;
      for (int i = 0; i < p->num_rows(); ++i) {
        const int lo = p->offsets[i], hi = p->offsets[i + 1];
        double dot = 0.0;
        for (int k = lo; k < hi; ++k) dot += alpha[k] * go[k];
        for (int k = lo; k < hi; ++k) ge[k] += alpha[k] * (go[k] - dot);
      }
    });
    return r;
  }

  // out_i = sum_{k in row i} w_k * x[col(k), :]. The gather half of the
  // attention pair; its backward scatters into both operands.
  Var edge_weighted_gather(Var w, Var x, PatternPtr p) {
    const Shape sw = shape(w), sx = shape(x);
    if (sw.rows != p->nnz() || sw.cols != 1)
      throw std::invalid_argument("edge_weighted_gather: weights must be nnz x 1");
    if (sx.rows != p->num_rows())
      throw std::invalid_argument("edge_weighted_gather: features must be num_nodes x d");
    const int n = p->num_rows();
    std::vector<double> out(static_cast<std::size_t>(n) * sx.cols, 0.0);
    const auto& vw = value(w);
    const auto& vx = value(x);
    for (int i = 0; i < n; ++i) {
      double* oi = out.data() + idx(i, 0, sx.cols);
      for (int k = p->offsets[i]; k < p->offsets[i + 1]; ++k) {
        const double wk = vw[k];
        const double* xj = vx.data() + idx(p->cols[k], 0, sx.cols);
        for (int c = 0; c < sx.cols; ++c) oi[c] += wk * xj[c];
      }
    }
    Var r = emplace({n, sx.cols}, std::move(out), needs(w) || needs(x));
    attach(r, [w, x, r, p, sx](Tape& t) {
      const auto& go = t.node(r).grad;
      const int n = p->num_rows();
      if (t.needs(w)) {
        auto& gw = t.node(w).grad;
        const auto& vx = t.value(x);
        for (int i = 0; i < n; ++i) {
          const double* gi = go.data() + idx(i, 0, sx.cols);
          for (int k = p->offsets[i]; k < p->offsets[i + 1]; ++k) {
            const double* xj = vx.data() + idx(p->cols[k], 0, sx.cols);
            double acc = 0.0;
            for (int c = 0; c < sx.cols; ++c) acc += gi[c] * xj[c];
            gw[k] += acc;
          }
        }
      }
      if (t.needs(x)) {
        auto& gx = t.node(x).grad;
        const auto& vw = t.value(w);
        for (int i = 0; i < n; ++i) {
          const double* gi = go.data() + idx(i, 0, sx.cols);
          for (int k = p->offsets[i]; k < p->offsets[i + 1]; ++k) {
            double* xj = gx.data() + idx(p->cols[k], 0, sx.cols);
            const double wk = vw[k];
            for (int c = 0; c < sx.cols; ++c) xj[c] += wk * gi[c];
          }
        }
      }
    });
    return r;
  }

  // Mean of -log softmax(logits_i)[label_i] over the given rows.
  Var softmax_cross_entropy(Var logits, std::shared_ptr<const std::vector<int>> labels,
                            std::shared_ptr<const std::vector<int>> rows) {
    const Shape sl = shape(logits);
    if (static_cast<int>(labels->size()) != sl.rows)
      throw std::invalid_argument("softmax_cross_entropy: one label per row required");
    if (rows->empty()) throw std::invalid_argument("softmax_cross_entropy: empty row set");
    const auto& vl = value(logits);
    auto probs = std::make_shared<std::vector<double>>(vl.size(), 0.0);
    double loss = 0.0;
    for (int i : *rows) {
      const int y = (*labels)[i];
      if (y < 0 || y >= sl.cols)
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
      const double* row = vl.data() + idx(i, 0, sl.cols);
      double m = row[0];
      for (int c = 1; c < sl.cols; ++c) m = std::max(m, row[c]);
      double z = 0.0;
      for (int c = 0; c < sl.cols; ++c) z += std::exp(row[c] - m);
      const double logz = std::log(z) + m;
      loss += logz - row[y];
      double* pr = probs->data() + idx(i, 0, sl.cols);
      for (int c = 0; c < sl.cols; ++c) pr[c] = std::exp(row[c] - logz);
    }
    loss /= static_cast<double>(rows->size());
    Var r = emplace({1, 1}, {loss}, needs(logits));
    attach(r, [logits, r, labels, rows, probs, sl](Tape& t) {
      if (!t.needs(logits)) return;
      const double g = t.node(r).grad[0] / static_cast<double>(rows->size());
      auto& gl = t.node(logits).grad;
      for (int i : *rows) {
        const int y = (*labels)[i];
        const double* pr = probs->data() + idx(i, 0, sl.cols);
        double* gi = gl.data() + idx(i, 0, sl.cols);
        for (int c = 0; c < sl.cols; ++c) gi[c] += g * (pr[c] - (c == y ? 1.0 : 0.0));
      }
    });
    return r;
  }

  // ---- backward -----------------------------------------------------------

  void backward(Var loss) {
    const Node& ln = node(loss);
    if (ln.shape.rows != 1 || ln.shape.cols != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    for (Node& n : nodes_)
      if (n.needs_grad) n.grad.assign(n.shape.size(), 0.0);
    if (!node(loss).needs_grad) return;  // nothing reaches a parameter
    node(loss).grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].backward && nodes_[i].needs_grad) nodes_[i].backward(*this);
  }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  static std::size_t idx(int i, int j, int cols) {
    return static_cast<std::size_t>(i) * cols + j;
  }

  Node& node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("tape: variable does not belong to this tape");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("tape: variable does not belong to this tape");
    return nodes_[v.id];
  }

  bool needs(Var v) const { return node(v).needs_grad; }

  Var emplace(Shape s, std::vector<double> data, bool needs_grad) {
    if (data.size() != s.size()) throw std::invalid_argument("tape: value size != shape");
    Node n;
    n.shape = s;
    n.value = std::move(data);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  void attach(Var v, std::function<void(Tape&)> fn) { node(v).backward = std::move(fn); }

  void require_same(Var a, Var b, const char* who) const {
    if (!(shape(a) == shape(b))) throw std::invalid_argument(std::string(who) + ": shape mismatch");
  }

  template <class F>
  Var zip(Var a, Var b, const char* who, F&& f) {
    require_same(a, b, who);
    const bool is_sub = std::string_view(who) == std::string_view("sub");
    const auto& va = value(a);
    const auto& vb = value(b);
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(va[i], vb[i]);
    Var r = emplace(shape(a), std::move(out), needs(a) || needs(b));
    attach(r, [a, b, r, is_sub](Tape& t) {
      const auto& go = t.node(r).grad;
      if (t.needs(a)) {
        auto& ga = t.node(a).grad;
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (t.needs(b)) {
        auto& gb = t.node(b).grad;
        if (is_sub)
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
        else
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
    return r;
  }

  // Elementwise unary: dfdx receives (input value, output value).
  template <class F, class D>
  Var map(Var x, F&& f, D&& dfdx) {
    const auto& vx = value(x);
    std::vector<double> out(vx.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(vx[i]);
    Var r = emplace(shape(x), std::move(out), needs(x));
    attach(r, [x, r, dfdx](Tape& t) {
      if (!t.needs(x)) return;
      const auto& go = t.node(r).grad;
      const auto& vx = t.value(x);
      const auto& vr = t.value(r);
      auto& gx = t.node(x).grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * dfdx(vx[i], vr[i]);
    });
    return r;
  }

  std::vector<Node> nodes_;
};

}  // namespace gsd::ad

#endif  // GSD_AUTODIFF_HPP
