#ifndef MSLSTM_TAPE_HPP
#define MSLSTM_TAPE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mslstm/tensor.hpp"

namespace mslstm {

/// Handle to a node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Eager reverse-mode gradient tape over the kernel operations.
///
/// Values and gradients live in flat arenas that are reused across reset()
/// calls, so a training loop that rebuilds the graph per sample performs no
/// steady-state allocation. Nodes are recorded in evaluation order, which is
/// already a topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  Tape() = default;

  /// Drops all nodes but keeps arena capacity.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

  Var leaf(const Tensor& t);
  Var leaf(std::span<const double> values, std::span<const int> shape);

  std::vector<int> shape_of(Var v) const;
  std::size_t size_of(Var v) const;
  std::span<const double> value(Var v) const;
  std::span<const double> grad(Var v) const;
  Tensor value_tensor(Var v) const;
  Tensor grad_tensor(Var v) const;

  Var matmul(Var a, Var b);
  Var matvec(Var a, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var softmax(Var logits);
  Var concat(Var a, Var b);
  Var stack_rows(std::span<const Var> rows);
  Var mean_over_time(Var seq);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);
  Var affine(Var a, double alpha, double beta);
  Var sum(Var a);

  /// Reverse sweep seeding d(loss)/d(loss) = 1. The loss must be a
  /// single-element node. Gradients of every node are then available
  /// through grad().
  void backward(Var loss);

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kMatVec,
    kAdd,
    kSub,
    kHadamard,
    kSigmoid,
    kTanh,
    kRelu,
    kSoftmax,
    kConcat,
    kStackRows,
    kMeanOverTime,
    kLog,
    kClamp,
    kAffine,
    kSum,
  };

  struct Node {
    Op op;
    std::uint8_t rank;
    int dims[3];
    std::size_t off;
    std::size_t len;
    std::uint32_t poff;
    std::uint32_t pcount;
    double a0;
    double a1;
  };

  const Node& node(Var v) const;
  Node& push(Op op, std::span<const int> dims, std::span<const Var> parents,
             double a0 = 0.0, double a1 = 0.0);
  double* val_ptr(const Node& n) { return vals_.data() + n.off; }
  double* grad_ptr(const Node& n) { return grads_.data() + n.off; }

  std::vector<Node> nodes_;
  std::vector<std::int32_t> parents_;
  std::vector<double> vals_;
  std::vector<double> grads_;
};

}  // namespace mslstm

#endif
