#ifndef MSLSTM_DATA_HPP
#define MSLSTM_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mslstm/tensor.hpp"

namespace mslstm {

struct Sample {
  int label = 0;
  Tensor ctx;                 // [K x ctx_dim]
  Tensor act;                 // [K x act_dim]
  std::optional<Tensor> flow; // [K x flow_dim] when the stream is enabled

  const Tensor* flow_ptr() const { return flow ? &*flow : nullptr; }
};

struct Dataset {
  int n_classes = 0;
  int seq_len = 0;
  int ctx_dim = 0;
  int act_dim = 0;
  int flow_dim = 0;
  std::vector<Sample> samples;
};

/// Synthetic sequence generator. Each class owns a unit-norm prototype per
/// feature stream. Context frames are drawn from the true prototype with
/// probability ctx_reliability, otherwise from the confuser class
/// ((label + 1) mod n_classes). Action frames interpolate from the confuser
/// prototype at frame 1 to the true prototype at frame ambiguity_horizon,
/// staying on the true prototype afterwards, so early frames are ambiguous
/// by construction. Gaussian noise of scale noise_sigma is added per
/// dimension, and every value is quantised to f32 so a save/load round trip
/// is exact.
struct GenConfig {
  int n_classes = 8;
  int samples = 128;
  int seq_len = 20;
  int ctx_dim = 16;
  int act_dim = 16;
  int flow_dim = 0;  // 0 disables the flow stream
  double noise_sigma = 0.3;
  double ctx_reliability = 0.7;
  int ambiguity_horizon = 10;
  std::uint64_t seed = 0;
};

Dataset generate(const GenConfig& cfg);

/// Frame subsampling applied before training.
enum class FrameSelection { FirstK, RandomK };

std::string frame_selection_name(FrameSelection sel);
FrameSelection frame_selection_from_name(const std::string& name);

/// Keeps `count` of the sample's frames: the first `count`, or a sorted
/// random subset drawn with the given seed.
Sample select_frames(const Sample& sample, int count, FrameSelection sel,
                     std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace mslstm

#endif
