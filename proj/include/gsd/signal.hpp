#ifndef GSD_SIGNAL_HPP
#define GSD_SIGNAL_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gsd {

// Dense row-major N x d real matrix: node signals, features, logits.
struct Signal {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Signal() = default;
  Signal(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Signal: negative dimension");
  }

  static Signal zeros(int r, int c) { return Signal(r, c); }

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  bool same_shape(const Signal& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require_same_shape(const Signal& a, const Signal& b, const char* where) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

inline double max_abs_diff(const Signal& a, const Signal& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) m = std::max(m, std::fabs(a.data[k] - b.data[k]));
  return m;
}

inline double frobenius_sq(const Signal& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

// ||a - b||_F^2, the fidelity term of every denoising objective.
inline double frobenius_sq_diff(const Signal& a, const Signal& b) {
  require_same_shape(a, b, "frobenius_sq_diff");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    s += d * d;
  }
  return s;
}

inline bool all_finite(const Signal& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace gsd

#endif  // GSD_SIGNAL_HPP
