#ifndef MSLSTM_LOSSES_HPP
#define MSLSTM_LOSSES_HPP

#include <string>
#include <vector>

#include "mslstm/tape.hpp"
#include "mslstm/tensor.hpp"

namespace mslstm {

/// Sequence loss family. All four share one weighted log-likelihood form
/// and differ only in how the false-negative / false-positive terms are
/// weighted over time:
///   CE    final frame only
///   EGL   exponentially growing, exp(-(T - t))
///   LGL   linearly growing, t / T
///   PLGL  full weight on the positive term, t / T on the negative term
enum class LossKind { CE, EGL, LGL, PLGL };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before
/// any logarithm.
inline constexpr double kProbEpsilon = 1e-7;

/// Per-step weights for a sequence of length T; index t-1 holds the weight
/// of (1-based) step t. fn scales -y*log(p), fp scales -(1-y)*log(1-p).
struct LossWeights {
  std::vector<double> fn;
  std::vector<double> fp;
};

LossWeights loss_weights(LossKind kind, int seq_len);

/// One-hot class targets, one row per time step. The label is constant
/// over the sequence.
class TargetSequence {
 public:
  TargetSequence(int seq_len, int n_classes, int label);

  const Tensor& matrix() const { return y_; }
  int seq_len() const { return y_.dim(0); }
  int n_classes() const { return y_.dim(1); }
  int label() const { return label_; }

 private:
  Tensor y_;
  int label_;
};

/// Per-step class distributions [T x N]; each row must sum to 1 within
/// 1e-6 and hold values in [0, 1].
class PredictionSequence {
 public:
  explicit PredictionSequence(Tensor probs);

  const Tensor& matrix() const { return p_; }
  int seq_len() const { return p_.dim(0); }
  int n_classes() const { return p_.dim(1); }

 private:
  Tensor p_;
};

double sequence_loss(const PredictionSequence& pred,
                     const TargetSequence& target, LossKind kind);

double loss_ce(const PredictionSequence& pred, const TargetSequence& target);
double loss_egl(const PredictionSequence& pred, const TargetSequence& target);
double loss_lgl(const PredictionSequence& pred, const TargetSequence& target);
double loss_plgl(const PredictionSequence& pred, const TargetSequence& target);

/// Sum of the per-stream losses for the two prediction streams.
double loss_total(const PredictionSequence& pred_first,
                  const PredictionSequence& pred_second,
                  const TargetSequence& target, LossKind kind);

/// Traced forms over a [T x N] prediction node. The value-level functions
/// above run these on a scratch tape.
Var sequence_loss_traced(Tape& tape, Var pred, const TargetSequence& target,
                         LossKind kind);
Var loss_total_traced(Tape& tape, Var pred_first, Var pred_second,
                      const TargetSequence& target, LossKind kind);

}  // namespace mslstm

#endif
