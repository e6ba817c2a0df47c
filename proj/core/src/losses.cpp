#include "mslstm/losses.hpp"

#include <cmath>
#include <cstdlib>

#include "mslstm/errors.hpp"

namespace mslstm {

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::CE:
      return "ce";
    case LossKind::EGL:
      return "egl";
    case LossKind::LGL:
      return "lgl";
    case LossKind::PLGL:
      return "plgl";
  }
  std::abort();
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::CE;
  if (name == "egl") return LossKind::EGL;
  if (name == "lgl") return LossKind::LGL;
  if (name == "plgl") return LossKind::PLGL;
  throw ConfigError("unknown loss kind '" + name +
                    "' (expected ce, egl, lgl or plgl)");
}

LossWeights loss_weights(LossKind kind, int seq_len) {
  if (seq_len < 1) {
    throw ConfigError("loss_weights: seq_len must be >= 1, got " +
                      std::to_string(seq_len));
  }
  const int T = seq_len;
  LossWeights w;
  w.fn.resize(static_cast<std::size_t>(T));
  w.fp.resize(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    double fn = 0.0;
    double fp = 0.0;
    switch (kind) {
      case LossKind::CE:
        fn = fp = (t == T) ? 1.0 : 0.0;
        break;
      case LossKind::EGL:
        fn = fp = std::exp(-static_cast<double>(T - t));
        break;
      case LossKind::LGL:
        fn = fp = static_cast<double>(t) / T;
        break;
      case LossKind::PLGL:
        fn = 1.0;
        fp = static_cast<double>(t) / T;
        break;
    }
    w.fn[static_cast<std::size_t>(t - 1)] = fn;
    w.fp[static_cast<std::size_t>(t - 1)] = fp;
  }
  return w;
}

TargetSequence::TargetSequence(int seq_len, int n_classes, int label)
    : label_(label) {
  if (seq_len < 1 || n_classes < 1) {
    throw ConfigError("TargetSequence: seq_len and n_classes must be >= 1, got " +
                      std::to_string(seq_len) + ", " + std::to_string(n_classes));
  }
  if (label < 0 || label >= n_classes) {
    throw IndexError("TargetSequence: label " + std::to_string(label) +
                     " out of range [0, " + std::to_string(n_classes) + ")");
  }
  y_ = Tensor({seq_len, n_classes});
  for (int t = 0; t < seq_len; ++t) {
    y_(t, label) = 1.0;
  }
}

PredictionSequence::PredictionSequence(Tensor probs) : p_(std::move(probs)) {
  if (p_.rank() != 2 || p_.dim(0) < 1 || p_.dim(1) < 1) {
    throw DimensionError("PredictionSequence: expected [T x N] with T,N >= 1, got " +
                         shape_str(p_.shape()));
  }
  for (int t = 0; t < p_.dim(0); ++t) {
    double row_sum = 0.0;
    for (int k = 0; k < p_.dim(1); ++k) {
      const double v = p_(t, k);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DimensionError("PredictionSequence: entry (" + std::to_string(t) +
                             ", " + std::to_string(k) + ") = " +
                             std::to_string(v) + " outside [0, 1]");
      }
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw DimensionError("PredictionSequence: row " + std::to_string(t) +
                           " sums to " + std::to_string(row_sum) +
                           ", expected 1 within 1e-6");
    }
  }
}

Var sequence_loss_traced(Tape& tape, Var pred, const TargetSequence& target,
                         LossKind kind) {
  const std::vector<int> shape = tape.shape_of(pred);
  if (shape.size() != 2 || shape[0] != target.seq_len() ||
      shape[1] != target.n_classes()) {
    throw DimensionError("sequence_loss: prediction shape " + shape_str(shape) +
                         " does not match target shape " +
                         shape_str(target.matrix().shape()));
  }
  const int T = target.seq_len();
  const int N = target.n_classes();
  const LossWeights w = loss_weights(kind, T);

  // W_fn[t,k] = fn(t) * y[t,k] and W_fp[t,k] = fp(t) * (1 - y[t,k]) are
  // constants of the target, so they enter the graph as leaves.
  Tensor wfn({T, N});
  Tensor wfp({T, N});
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < N; ++k) {
      const double y = target.matrix()(t, k);
      wfn(t, k) = w.fn[static_cast<std::size_t>(t)] * y;
      wfp(t, k) = w.fp[static_cast<std::size_t>(t)] * (1.0 - y);
    }
  }

  Var log_p = tape.log(tape.clamp(pred, kProbEpsilon, 1.0 - kProbEpsilon));
  Var log_1mp = tape.log(
      tape.clamp(tape.affine(pred, -1.0, 1.0), kProbEpsilon, 1.0 - kProbEpsilon));
  Var weighted = tape.add(tape.hadamard(tape.leaf(wfn), log_p),
                          tape.hadamard(tape.leaf(wfp), log_1mp));
  return tape.affine(tape.sum(weighted), -1.0 / N, 0.0);
}

Var loss_total_traced(Tape& tape, Var pred_first, Var pred_second,
                      const TargetSequence& target, LossKind kind) {
  return tape.add(sequence_loss_traced(tape, pred_first, target, kind),
                  sequence_loss_traced(tape, pred_second, target, kind));
}

double sequence_loss(const PredictionSequence& pred,
                     const TargetSequence& target, LossKind kind) {
  Tape tape;
  Var loss = sequence_loss_traced(tape, tape.leaf(pred.matrix()), target, kind);
  return tape.value(loss)[0];
}

double loss_ce(const PredictionSequence& pred, const TargetSequence& target) {
  return sequence_loss(pred, target, LossKind::CE);
}

double loss_egl(const PredictionSequence& pred, const TargetSequence& target) {
  return sequence_loss(pred, target, LossKind::EGL);
}

double loss_lgl(const PredictionSequence& pred, const TargetSequence& target) {
  return sequence_loss(pred, target, LossKind::LGL);
}

double loss_plgl(const PredictionSequence& pred, const TargetSequence& target) {
  return sequence_loss(pred, target, LossKind::PLGL);
}

double loss_total(const PredictionSequence& pred_first,
                  const PredictionSequence& pred_second,
                  const TargetSequence& target, LossKind kind) {
  return sequence_loss(pred_first, target, kind) +
         sequence_loss(pred_second, target, kind);
}

}  // namespace mslstm
