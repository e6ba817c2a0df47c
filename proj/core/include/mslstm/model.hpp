#ifndef MSLSTM_MODEL_HPP
#define MSLSTM_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mslstm/losses.hpp"
#include "mslstm/lstm.hpp"
#include "mslstm/tape.hpp"
#include "mslstm/tensor.hpp"

namespace mslstm {

/// Recurrent decoder layout.
///   MultiStage  stage 1 over context features, stage 2 over the stage-1
///               hidden state concatenated with action (and optional flow)
///               features; one prediction head per stage.
///   Swapped     MultiStage with the roles of context and action exchanged.
///   Concat      one decoder over concat(context, action); both prediction
///               streams are the single head's output.
///   Parallel    one decoder per feature stream; a shared head reads the
///               concatenated hidden states; both streams are its output.
enum class ArchVariant { MultiStage, Concat, Swapped, Parallel };

std::string arch_name(ArchVariant arch);
ArchVariant arch_from_name(const std::string& name);

enum class Pooling { AveragePool, LastFrame };

/// Hidden units for full-scale runs; tests and smoke configs use far less.
inline constexpr int kDefaultHiddenUnits = 2048;

std::string pooling_name(Pooling pooling);
Pooling pooling_from_name(const std::string& name);

struct ModelDims {
  int ctx_dim = 0;
  int act_dim = 0;
  int flow_dim = 0;  // 0 disables the flow stream
  int hidden = 0;
  int n_classes = 0;

  bool operator==(const ModelDims&) const = default;
};

std::string dims_str(const ModelDims& d);

/// Affine prediction head; logits = w [N x in] * h + b, class distribution
/// via softmax.
struct AffineHead {
  Tensor w;
  Tensor b;
};

struct MsLstmModel {
  ModelDims dims;
  ArchVariant arch = ArchVariant::MultiStage;
  LossKind loss = LossKind::PLGL;  // loss the model was trained with
  std::uint64_t seed = 0;

  LstmParams stage1;
  AffineHead head1;
  LstmParams stage2;  // absent for Concat and empty-stage variants
  AffineHead head2;

  bool has_stage2() const {
    return arch != ArchVariant::Concat;
  }
  bool has_head2() const {
    return arch == ArchVariant::MultiStage || arch == ArchVariant::Swapped;
  }

  /// All parameter tensors in the canonical (checkpoint) order:
  /// MultiStage/Swapped  stage1, head1, stage2, head2
  /// Concat              stage1, head1
  /// Parallel            stage1, head1, stage2
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

/// Builds a model with freshly initialised weights. Flow features are only
/// supported by the MultiStage and Swapped variants.
MsLstmModel init_model(const ModelDims& dims, ArchVariant arch,
                       std::uint64_t seed);

struct AffineHeadRefs {
  Var w, b;
};

struct ModelRefs {
  LstmRefs stage1;
  AffineHeadRefs head1;
  LstmRefs stage2;
  AffineHeadRefs head2;
  bool has_stage2 = false;
  bool has_head2 = false;

  /// Leaf handles in the same order as MsLstmModel::parameters().
  std::vector<Var> ordered(ArchVariant arch) const;
};

struct TracedForward {
  Var pred_first;   // [T x N] stage-1 stream (equals pred_second for
                    // single-head variants)
  Var pred_second;  // [T x N] final stream used for prediction
  ModelRefs refs;
};

/// Builds the forward graph for one sample. ctx is [T x ctx_dim], act is
/// [T x act_dim]; flow must be non-null exactly when dims.flow_dim > 0 and
/// is then [T x flow_dim].
TracedForward forward_traced(Tape& tape, const MsLstmModel& model,
                             const Tensor& ctx, const Tensor& act,
                             const Tensor* flow = nullptr);

struct ForwardResult {
  PredictionSequence pred_first;
  PredictionSequence pred_second;
};

ForwardResult forward(const MsLstmModel& model, const Tensor& ctx,
                      const Tensor& act, const Tensor* flow = nullptr);

/// Class decision from the final prediction stream: AveragePool averages
/// the per-step distributions over time before the argmax, LastFrame uses
/// the final step only.
int predict(const MsLstmModel& model, const Tensor& ctx, const Tensor& act,
            const Tensor* flow, Pooling pooling);

/// Prediction from the first `prefix_len` frames only (1 <= prefix_len <= T);
/// the model never sees the remaining frames. Always AveragePool.
int anticipate(const MsLstmModel& model, const Tensor& ctx, const Tensor& act,
               const Tensor* flow, int prefix_len);

void save_checkpoint(const MsLstmModel& model, const std::string& path);
MsLstmModel load_checkpoint(const std::string& path);

}  // namespace mslstm

#endif
