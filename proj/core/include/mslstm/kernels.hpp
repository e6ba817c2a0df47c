#ifndef MSLSTM_KERNELS_HPP
#define MSLSTM_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

// Scalar and raw-pointer loop kernels shared by the tensor ops and the tape.
// Keeping one definition of the math means the traced forward pass and the
// plain tensor API cannot drift apart.

namespace mslstm::detail {

inline double sigmoid_scalar(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double relu_scalar(double z) { return z > 0.0 ? z : 0.0; }

// c[m x n] = a[m x k] * b[k x n], c must be zero-initialized by the caller.
inline void matmul_accum(const double* a, const double* b, double* c, int m,
                         int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

// y[m] = a[m x k] * x[k], y zero-initialized by the caller.
inline void matvec_accum(const double* a, const double* x, double* y, int m,
                         int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) {
      acc += arow[p] * x[p];
    }
    y[i] += acc;
  }
}

// Stable softmax: out may alias in.
inline void softmax_kernel(const double* in, double* out, int n) {
  double mx = in[0];
  for (int i = 1; i < n; ++i) {
    mx = std::max(mx, in[i]);
  }
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    denom += out[i];
  }
  const double inv = 1.0 / denom;
  for (int i = 0; i < n; ++i) {
    out[i] *= inv;
  }
}

/// Compensated (Kahan) accumulator for batch and epoch reductions.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace mslstm::detail

#endif
