#include "mslstm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "mslstm/kernels.hpp"

namespace mslstm {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got shape " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d < 0) {
      throw DimensionError("negative dimension in shape " + shape_str(shape_));
    }
  }
  data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (int d : shape_) {
    if (d < 0) {
      throw DimensionError("negative dimension in shape " + shape_str(shape_));
    }
  }
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " wants " +
                         std::to_string(shape_product(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::row(int i) const {
  require_rank(*this, 2, "row");
  if (i < 0 || i >= shape_[0]) {
    throw IndexError("row index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(shape_[0]) + ")");
  }
  const int cols = shape_[1];
  std::vector<double> out(data_.begin() + static_cast<std::size_t>(i) * cols,
                          data_.begin() + static_cast<std::size_t>(i + 1) * cols);
  return Tensor::vec(std::move(out));
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) {
      s += "x";
    }
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  detail::matmul_accum(a.data().data(), b.data().data(), c.data().data(),
                       a.dim(0), a.dim(1), b.dim(1));
  return c;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  if (a.dim(1) != x.dim(0)) {
    throw DimensionError("matvec: inner dimensions disagree " +
                         shape_str(a.shape()) + " vs " + shape_str(x.shape()));
  }
  Tensor y({a.dim(0)});
  detail::matvec_accum(a.data().data(), x.data().data(), y.data().data(),
                       a.dim(0), a.dim(1));
  return y;
}

namespace {

template <class F>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    ov[i] = f(av[i], bv[i]);
  }
  return out;
}

template <class F>
Tensor unary_op(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto av = a.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    ov[i] = f(av[i]);
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, detail::sigmoid_scalar);
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, [](double z) { return std::tanh(z); });
}

Tensor relu(const Tensor& a) { return unary_op(a, detail::relu_scalar); }

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax");
  if (logits.dim(0) < 1) {
    throw DimensionError("softmax: empty input " + shape_str(logits.shape()));
  }
  Tensor out({logits.dim(0)});
  detail::softmax_kernel(logits.data().data(), out.data().data(),
                         logits.dim(0));
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "concat");
  require_rank(b, 1, "concat");
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return Tensor::vec(std::move(out));
}

Tensor mean_over_time(const Tensor& seq) {
  require_rank(seq, 2, "mean_over_time");
  const int rows = seq.dim(0);
  const int cols = seq.dim(1);
  if (rows < 1) {
    throw DimensionError("mean_over_time: empty sequence " +
                         shape_str(seq.shape()));
  }
  Tensor out({cols});
  for (int t = 0; t < rows; ++t) {
    for (int j = 0; j < cols; ++j) {
      out(j) += seq(t, j);
    }
  }
  const double inv = 1.0 / rows;
  for (int j = 0; j < cols; ++j) {
    out(j) *= inv;
  }
  return out;
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double z) { return std::log(z); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary_op(a, [lo, hi](double z) { return std::clamp(z, lo, hi); });
}

Tensor affine(const Tensor& a, double alpha, double beta) {
  return unary_op(a, [alpha, beta](double z) { return alpha * z + beta; });
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) {
    s += v;
  }
  return s;
}

int argmax(const Tensor& v) {
  if (v.rank() != 1 || v.dim(0) < 1) {
    throw DimensionError("argmax: need non-empty rank-1 tensor, got " +
                         shape_str(v.shape()));
  }
  int best = 0;
  for (int i = 1; i < v.dim(0); ++i) {
    if (v(i) > v(best)) {
      best = i;
    }
  }
  return best;
}

}  // namespace mslstm
