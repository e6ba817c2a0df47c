#ifndef MSLSTM_CAM_HPP
#define MSLSTM_CAM_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "mslstm/tensor.hpp"

namespace mslstm {

/// Convolutional feature stack, activations [L x H x W] (channel-major,
/// rows before columns inside a channel).
struct FeatureMap {
  Tensor activations;

  int channels() const { return activations.dim(0); }
  int height() const { return activations.dim(1); }
  int width() const { return activations.dim(2); }
};

FeatureMap make_feature_map(Tensor activations);

/// Classifier weights over channel-pooled features, [N x L].
struct CamWeights {
  Tensor weights;

  int n_classes() const { return weights.dim(0); }
  int channels() const { return weights.dim(1); }
};

CamWeights make_cam_weights(Tensor weights);

/// Spatial sum per channel, F[l] = sum_xy f_l(x, y). Returns [L].
Tensor channel_pool(const FeatureMap& fmap);

/// Class scores S[k] = sum_l w[k, l] * F[l]. Returns [N].
Tensor class_scores(const FeatureMap& fmap, const CamWeights& weights);

/// Class activation map M_k(x, y) = sum_l w[k, l] * f_l(x, y). Returns
/// [H x W].
Tensor cam_map(const FeatureMap& fmap, const CamWeights& weights, int klass);

/// Activation gating A_l(x, y) = f_l(x, y) * max(0, M(x, y)); the
/// rectified map is broadcast over channels. Returns [L x H x W].
Tensor gated_features(const FeatureMap& fmap, const Tensor& cam);

/// Highest-scoring class, ties broken by lowest index.
int select_class(const Tensor& scores);

/// Learned projection of the flattened gated features to an action
/// feature vector: relu(w * flat + b).
struct ActionFeatureHead {
  Tensor w;  // [out_dim x L*H*W]
  Tensor b;  // [out_dim]
};

ActionFeatureHead init_action_head(int channels, int height, int width,
                                   int out_dim, std::uint64_t seed);

/// Full pipeline: pick the class (or use the given one), gate the features
/// by its rectified activation map, project. Returns [out_dim].
Tensor action_feature_vector(const FeatureMap& fmap, const CamWeights& weights,
                             std::optional<int> klass,
                             const ActionFeatureHead& head);

struct FeatureMapFile {
  FeatureMap fmap;
  CamWeights weights;
};

void save_feature_map(const FeatureMapFile& file, const std::string& path);
FeatureMapFile load_feature_map(const std::string& path);

}  // namespace mslstm

#endif
