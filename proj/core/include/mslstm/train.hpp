#ifndef MSLSTM_TRAIN_HPP
#define MSLSTM_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "mslstm/data.hpp"
#include "mslstm/losses.hpp"
#include "mslstm/model.hpp"

namespace mslstm {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 32;
  int epochs = 1;
  LossKind loss = LossKind::PLGL;
  std::uint64_t seed = 0;
  FrameSelection frame_selection = FrameSelection::FirstK;
  int frames = 0;  // 0 keeps full sequences
  bool clip_gradients = true;
  double clip_norm = 5.0;
  int threads = 1;
};

struct EpochStats {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // AveragePool over the training set
};

/// Momentum SGD over parameter tensors:
///   v <- momentum * v - lr * (g + weight_decay * theta)
///   theta <- theta + v
void sgd_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
              std::vector<Tensor>& velocity, const TrainConfig& cfg);

/// Adds the gradient of the per-sample total loss to `accum` (one tensor
/// per model parameter, in canonical order). Returns the loss value.
double sample_gradient(Tape& tape, const MsLstmModel& model,
                       const Sample& sample, LossKind kind,
                       std::vector<Tensor>& accum);

/// Mini-batch SGD training. Shuffling, frame selection and every other
/// random choice derive from cfg.seed; per-sample gradients are reduced in
/// sample order, so results are bit-identical for any thread count.
std::vector<EpochStats> train(MsLstmModel& model, const Dataset& data,
                              const TrainConfig& cfg);

}  // namespace mslstm

#endif
