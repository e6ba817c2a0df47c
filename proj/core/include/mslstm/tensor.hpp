#ifndef MSLSTM_TENSOR_HPP
#define MSLSTM_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mslstm/errors.hpp"

namespace mslstm {

/// Dense row-major array of doubles. Rank 0 (scalar) through rank 3 are used.
/// Values are immutable once an operation has produced them; operations hand
/// back fresh tensors.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<int> shape);

  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  /// Copy of row i of a rank-2 tensor, as a rank-1 tensor.
  Tensor row(int i) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);

/// Throws DimensionError naming both shapes unless they match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// Dense kernel operations. Binary elementwise ops require identical shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

/// Numerically stable softmax of a rank-1 tensor (max subtraction).
Tensor softmax(const Tensor& logits);

/// Concatenation of two rank-1 tensors.
Tensor concat(const Tensor& a, const Tensor& b);

/// Column-wise arithmetic mean of a rank-2 tensor [T x n] -> [n].
Tensor mean_over_time(const Tensor& seq);

Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

/// Elementwise alpha * a + beta.
Tensor affine(const Tensor& a, double alpha, double beta);

double sum(const Tensor& a);

/// Index of the largest entry; ties broken by lowest index.
int argmax(const Tensor& v);

}  // namespace mslstm

#endif
