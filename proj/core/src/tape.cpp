#include "mslstm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mslstm/errors.hpp"
#include "mslstm/kernels.hpp"

namespace mslstm {

namespace {

std::string node_shape_str(const int* dims, int rank) {
  std::vector<int> s(dims, dims + rank);
  return shape_str(s);
}

}  // namespace

void Tape::reset() {
  nodes_.clear();
  parents_.clear();
  vals_.clear();
  grads_.clear();
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw IndexError("tape: invalid node handle " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::push(Op op, std::span<const int> dims,
                       std::span<const Var> parents, double a0, double a1) {
  Node n{};
  n.op = op;
  n.rank = static_cast<std::uint8_t>(dims.size());
  std::size_t len = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    n.dims[i] = dims[i];
    len *= static_cast<std::size_t>(dims[i]);
  }
  n.off = vals_.size();
  n.len = len;
  n.poff = static_cast<std::uint32_t>(parents_.size());
  n.pcount = static_cast<std::uint32_t>(parents.size());
  n.a0 = a0;
  n.a1 = a1;
  for (Var p : parents) {
    parents_.push_back(p.id);
  }
  vals_.resize(vals_.size() + len, 0.0);
  nodes_.push_back(n);
  return nodes_.back();
}

Var Tape::leaf(const Tensor& t) {
  return leaf(t.data(), t.shape());
}

Var Tape::leaf(std::span<const double> values, std::span<const int> shape) {
  Node& n = push(Op::kLeaf, shape, {});
  std::memcpy(val_ptr(n), values.data(), values.size() * sizeof(double));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

std::vector<int> Tape::shape_of(Var v) const {
  const Node& n = node(v);
  return std::vector<int>(n.dims, n.dims + n.rank);
}

std::size_t Tape::size_of(Var v) const { return node(v).len; }

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {vals_.data() + n.off, n.len};
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = node(v);
  return {grads_.data() + n.off, n.len};
}

Tensor Tape::value_tensor(Var v) const {
  auto s = value(v);
  return Tensor(shape_of(v), std::vector<double>(s.begin(), s.end()));
}

Tensor Tape::grad_tensor(Var v) const {
  auto s = grad(v);
  return Tensor(shape_of(v), std::vector<double>(s.begin(), s.end()));
}

Var Tape::matmul(Var a, Var b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rank != 2 || nb.rank != 2 || na.dims[1] != nb.dims[0]) {
    throw DimensionError("matmul: inner dimensions disagree " +
                         node_shape_str(na.dims, na.rank) + " vs " +
                         node_shape_str(nb.dims, nb.rank));
  }
  const int dims[2] = {na.dims[0], nb.dims[1]};
  const Var ps[2] = {a, b};
  Node& n = push(Op::kMatMul, dims, ps);
  detail::matmul_accum(vals_.data() + na.off, vals_.data() + nb.off,
                       val_ptr(n), na.dims[0], na.dims[1], nb.dims[1]);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::matvec(Var a, Var x) {
  const Node na = node(a);
  const Node nx = node(x);
  if (na.rank != 2 || nx.rank != 1 || na.dims[1] != nx.dims[0]) {
    throw DimensionError("matvec: inner dimensions disagree " +
                         node_shape_str(na.dims, na.rank) + " vs " +
                         node_shape_str(nx.dims, nx.rank));
  }
  const int dims[1] = {na.dims[0]};
  const Var ps[2] = {a, x};
  Node& n = push(Op::kMatVec, dims, ps);
  detail::matvec_accum(vals_.data() + na.off, vals_.data() + nx.off,
                       val_ptr(n), na.dims[0], na.dims[1]);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::add(Var a, Var b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rank != nb.rank ||
      !std::equal(na.dims, na.dims + na.rank, nb.dims)) {
    throw DimensionError("add: shape mismatch " +
                         node_shape_str(na.dims, na.rank) + " vs " +
                         node_shape_str(nb.dims, nb.rank));
  }
  const Var ps[2] = {a, b};
  Node& n = push(Op::kAdd, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  const double* bv = vals_.data() + nb.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = av[i] + bv[i];
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::sub(Var a, Var b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rank != nb.rank ||
      !std::equal(na.dims, na.dims + na.rank, nb.dims)) {
    throw DimensionError("sub: shape mismatch " +
                         node_shape_str(na.dims, na.rank) + " vs " +
                         node_shape_str(nb.dims, nb.rank));
  }
  const Var ps[2] = {a, b};
  Node& n = push(Op::kSub, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  const double* bv = vals_.data() + nb.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = av[i] - bv[i];
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::hadamard(Var a, Var b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rank != nb.rank ||
      !std::equal(na.dims, na.dims + na.rank, nb.dims)) {
    throw DimensionError("hadamard: shape mismatch " +
                         node_shape_str(na.dims, na.rank) + " vs " +
                         node_shape_str(nb.dims, nb.rank));
  }
  const Var ps[2] = {a, b};
  Node& n = push(Op::kHadamard, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  const double* bv = vals_.data() + nb.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = av[i] * bv[i];
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::sigmoid(Var a) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kSigmoid, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = detail::sigmoid_scalar(av[i]);
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::tanh(Var a) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kTanh, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = std::tanh(av[i]);
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::relu(Var a) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kRelu, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = detail::relu_scalar(av[i]);
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::softmax(Var logits) {
  const Node na = node(logits);
  if (na.rank != 1 || na.dims[0] < 1) {
    throw DimensionError("softmax: need non-empty rank-1 input, got " +
                         node_shape_str(na.dims, na.rank));
  }
  const Var ps[1] = {logits};
  Node& n = push(Op::kSoftmax, {na.dims, na.rank}, ps);
  detail::softmax_kernel(vals_.data() + na.off, val_ptr(n), na.dims[0]);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::concat(Var a, Var b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rank != 1 || nb.rank != 1) {
    throw DimensionError("concat: need rank-1 inputs, got " +
                         node_shape_str(na.dims, na.rank) + " and " +
                         node_shape_str(nb.dims, nb.rank));
  }
  const int dims[1] = {na.dims[0] + nb.dims[0]};
  const Var ps[2] = {a, b};
  Node& n = push(Op::kConcat, dims, ps);
  double* ov = val_ptr(n);
  std::memcpy(ov, vals_.data() + na.off, na.len * sizeof(double));
  std::memcpy(ov + na.len, vals_.data() + nb.off, nb.len * sizeof(double));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) {
    throw DimensionError("stack_rows: empty row list");
  }
  const Node first = node(rows[0]);
  if (first.rank != 1) {
    throw DimensionError("stack_rows: rows must be rank-1, got " +
                         node_shape_str(first.dims, first.rank));
  }
  const int cols = first.dims[0];
  for (Var r : rows) {
    const Node nr = node(r);
    if (nr.rank != 1 || nr.dims[0] != cols) {
      throw DimensionError("stack_rows: row shape mismatch " +
                           node_shape_str(first.dims, 1) + " vs " +
                           node_shape_str(nr.dims, nr.rank));
    }
  }
  const int dims[2] = {static_cast<int>(rows.size()), cols};
  Node& n = push(Op::kStackRows, dims, rows);
  double* ov = val_ptr(n);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Node nr = node(rows[t]);
    std::memcpy(ov + t * static_cast<std::size_t>(cols), vals_.data() + nr.off,
                nr.len * sizeof(double));
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::mean_over_time(Var seq) {
  const Node ns = node(seq);
  if (ns.rank != 2 || ns.dims[0] < 1) {
    throw DimensionError("mean_over_time: need non-empty rank-2 input, got " +
                         node_shape_str(ns.dims, ns.rank));
  }
  const int rows = ns.dims[0];
  const int cols = ns.dims[1];
  const int dims[1] = {cols};
  const Var ps[1] = {seq};
  Node& n = push(Op::kMeanOverTime, dims, ps);
  const double* sv = vals_.data() + ns.off;
  double* ov = val_ptr(n);
  for (int t = 0; t < rows; ++t) {
    for (int j = 0; j < cols; ++j) {
      ov[j] += sv[static_cast<std::size_t>(t) * cols + j];
    }
  }
  const double inv = 1.0 / rows;
  for (int j = 0; j < cols; ++j) {
    ov[j] *= inv;
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::log(Var a) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kLog, {na.dims, na.rank}, ps);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = std::log(av[i]);
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kClamp, {na.dims, na.rank}, ps, lo, hi);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = std::clamp(av[i], lo, hi);
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::affine(Var a, double alpha, double beta) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kAffine, {na.dims, na.rank}, ps, alpha, beta);
  const double* av = vals_.data() + na.off;
  double* ov = val_ptr(n);
  for (std::size_t i = 0; i < n.len; ++i) {
    ov[i] = alpha * av[i] + beta;
  }
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::sum(Var a) {
  const Node na = node(a);
  const Var ps[1] = {a};
  Node& n = push(Op::kSum, {}, ps);
  const double* av = vals_.data() + na.off;
  double acc = 0.0;
  for (std::size_t i = 0; i < na.len; ++i) {
    acc += av[i];
  }
  *val_ptr(n) = acc;
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  const Node nl = node(loss);
  if (nl.len != 1) {
    throw DimensionError("backward: loss must be a single value, got " +
                         node_shape_str(nl.dims, nl.rank));
  }
  grads_.assign(vals_.size(), 0.0);
  grads_[nl.off] = 1.0;

  for (std::size_t idx = static_cast<std::size_t>(loss.id) + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    const double* g = grads_.data() + n.off;
    const std::int32_t* par = parents_.data() + n.poff;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Node& na = nodes_[par[0]];
        const Node& nb = nodes_[par[1]];
        const int m = na.dims[0], k = na.dims[1], c = nb.dims[1];
        const double* av = vals_.data() + na.off;
        const double* bv = vals_.data() + nb.off;
        double* ga = grads_.data() + na.off;
        double* gb = grads_.data() + nb.off;
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < c; ++j) {
              acc += g[static_cast<std::size_t>(i) * c + j] *
                     bv[static_cast<std::size_t>(p) * c + j];
            }
            ga[static_cast<std::size_t>(i) * k + p] += acc;
          }
        }
        for (int p = 0; p < k; ++p) {
          for (int i = 0; i < m; ++i) {
            const double av_ip = av[static_cast<std::size_t>(i) * k + p];
            for (int j = 0; j < c; ++j) {
              gb[static_cast<std::size_t>(p) * c + j] +=
                  av_ip * g[static_cast<std::size_t>(i) * c + j];
            }
          }
        }
        break;
      }
      case Op::kMatVec: {
        const Node& na = nodes_[par[0]];
        const Node& nx = nodes_[par[1]];
        const int m = na.dims[0], k = na.dims[1];
        const double* av = vals_.data() + na.off;
        const double* xv = vals_.data() + nx.off;
        double* ga = grads_.data() + na.off;
        double* gx = grads_.data() + nx.off;
        for (int i = 0; i < m; ++i) {
          const double gi = g[i];
          double* garow = ga + static_cast<std::size_t>(i) * k;
          const double* arow = av + static_cast<std::size_t>(i) * k;
          for (int p = 0; p < k; ++p) {
            garow[p] += gi * xv[p];
            gx[p] += gi * arow[p];
          }
        }
        break;
      }
      case Op::kAdd: {
        double* ga = grads_.data() + nodes_[par[0]].off;
        double* gb = grads_.data() + nodes_[par[1]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = grads_.data() + nodes_[par[0]].off;
        double* gb = grads_.data() + nodes_[par[1]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kHadamard: {
        const Node& na = nodes_[par[0]];
        const Node& nb = nodes_[par[1]];
        const double* av = vals_.data() + na.off;
        const double* bv = vals_.data() + nb.off;
        double* ga = grads_.data() + na.off;
        double* gb = grads_.data() + nb.off;
        for (std::size_t i = 0; i < n.len; ++i) {
          ga[i] += g[i] * bv[i];
          gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kSigmoid: {
        const double* y = vals_.data() + n.off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          gx[i] += g[i] * y[i] * (1.0 - y[i]);
        }
        break;
      }
      case Op::kTanh: {
        const double* y = vals_.data() + n.off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          gx[i] += g[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }
      case Op::kRelu: {
        const double* x = vals_.data() + nodes_[par[0]].off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          if (x[i] > 0.0) {
            gx[i] += g[i];
          }
        }
        break;
      }
      case Op::kSoftmax: {
        const double* y = vals_.data() + n.off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        double dot = 0.0;
        for (std::size_t i = 0; i < n.len; ++i) {
          dot += y[i] * g[i];
        }
        for (std::size_t i = 0; i < n.len; ++i) {
          gx[i] += y[i] * (g[i] - dot);
        }
        break;
      }
      case Op::kConcat: {
        const Node& na = nodes_[par[0]];
        const Node& nb = nodes_[par[1]];
        double* ga = grads_.data() + na.off;
        double* gb = grads_.data() + nb.off;
        for (std::size_t i = 0; i < na.len; ++i) {
          ga[i] += g[i];
        }
        for (std::size_t i = 0; i < nb.len; ++i) {
          gb[i] += g[na.len + i];
        }
        break;
      }
      case Op::kStackRows: {
        const std::size_t cols = static_cast<std::size_t>(n.dims[1]);
        for (std::uint32_t t = 0; t < n.pcount; ++t) {
          double* gr = grads_.data() + nodes_[par[t]].off;
          const double* grow = g + t * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gr[j] += grow[j];
          }
        }
        break;
      }
      case Op::kMeanOverTime: {
        const Node& ns = nodes_[par[0]];
        const int rows = ns.dims[0];
        const int cols = ns.dims[1];
        double* gs = grads_.data() + ns.off;
        const double inv = 1.0 / rows;
        for (int t = 0; t < rows; ++t) {
          for (int j = 0; j < cols; ++j) {
            gs[static_cast<std::size_t>(t) * cols + j] += g[j] * inv;
          }
        }
        break;
      }
      case Op::kLog: {
        const double* x = vals_.data() + nodes_[par[0]].off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          gx[i] += g[i] / x[i];
        }
        break;
      }
      case Op::kClamp: {
        const double* x = vals_.data() + nodes_[par[0]].off;
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          if (x[i] > n.a0 && x[i] < n.a1) {
            gx[i] += g[i];
          }
        }
        break;
      }
      case Op::kAffine: {
        double* gx = grads_.data() + nodes_[par[0]].off;
        for (std::size_t i = 0; i < n.len; ++i) {
          gx[i] += n.a0 * g[i];
        }
        break;
      }
      case Op::kSum: {
        const Node& na = nodes_[par[0]];
        double* gx = grads_.data() + na.off;
        const double gv = g[0];
        for (std::size_t i = 0; i < na.len; ++i) {
          gx[i] += gv;
        }
        break;
      }
    }
  }
}

}  // namespace mslstm
