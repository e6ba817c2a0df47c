#include "mslstm/cam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mslstm/binio.hpp"
#include "mslstm/errors.hpp"
#include "mslstm/prng.hpp"

namespace mslstm {

namespace {

void require_compatible(const FeatureMap& fmap, const CamWeights& weights) {
  if (weights.channels() != fmap.channels()) {
    throw DimensionError("cam: weights cover " +
                         std::to_string(weights.channels()) +
                         " channels but the feature map has " +
                         std::to_string(fmap.channels()));
  }
}

void require_class(int klass, int n_classes) {
  if (klass < 0 || klass >= n_classes) {
    throw IndexError("cam: class " + std::to_string(klass) +
                     " out of range [0, " + std::to_string(n_classes) + ")");
  }
}

}  // namespace

FeatureMap make_feature_map(Tensor activations) {
  if (activations.rank() != 3 || activations.dim(0) < 1 ||
      activations.dim(1) < 1 || activations.dim(2) < 1) {
    throw DimensionError("feature map must be [L x H x W] with L,H,W >= 1, got " +
                         shape_str(activations.shape()));
  }
  return FeatureMap{std::move(activations)};
}

CamWeights make_cam_weights(Tensor weights) {
  if (weights.rank() != 2 || weights.dim(0) < 1 || weights.dim(1) < 1) {
    throw DimensionError("cam weights must be [N x L] with N,L >= 1, got " +
                         shape_str(weights.shape()));
  }
  return CamWeights{std::move(weights)};
}

Tensor channel_pool(const FeatureMap& fmap) {
  const int L = fmap.channels();
  const int plane = fmap.height() * fmap.width();
  Tensor out({L});
  std::span<const double> data = fmap.activations.data();
  for (int l = 0; l < L; ++l) {
    double acc = 0.0;
    const double* p = data.data() + static_cast<std::size_t>(l) * plane;
    for (int i = 0; i < plane; ++i) {
      acc += p[i];
    }
    out(l) = acc;
  }
  return out;
}

Tensor class_scores(const FeatureMap& fmap, const CamWeights& weights) {
  require_compatible(fmap, weights);
  return matvec(weights.weights, channel_pool(fmap));
}

Tensor cam_map(const FeatureMap& fmap, const CamWeights& weights, int klass) {
  require_compatible(fmap, weights);
  require_class(klass, weights.n_classes());
  const int L = fmap.channels();
  const int H = fmap.height();
  const int W = fmap.width();
  Tensor out({H, W});
  for (int l = 0; l < L; ++l) {
    const double w = weights.weights(klass, l);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        out(y, x) += w * fmap.activations(l, y, x);
      }
    }
  }
  return out;
}

Tensor gated_features(const FeatureMap& fmap, const Tensor& cam) {
  if (cam.rank() != 2 || cam.dim(0) != fmap.height() ||
      cam.dim(1) != fmap.width()) {
    throw DimensionError("gated_features: map shape " + shape_str(cam.shape()) +
                         " does not match feature plane [" +
                         std::to_string(fmap.height()) + " x " +
                         std::to_string(fmap.width()) + "]");
  }
  Tensor out({fmap.channels(), fmap.height(), fmap.width()});
  for (int l = 0; l < fmap.channels(); ++l) {
    for (int y = 0; y < fmap.height(); ++y) {
      for (int x = 0; x < fmap.width(); ++x) {
        out(l, y, x) = fmap.activations(l, y, x) * std::max(0.0, cam(y, x));
      }
    }
  }
  return out;
}

int select_class(const Tensor& scores) { return argmax(scores); }

ActionFeatureHead init_action_head(int channels, int height, int width,
                                   int out_dim, std::uint64_t seed) {
  if (channels < 1 || height < 1 || width < 1 || out_dim < 1) {
    throw ConfigError("init_action_head: all dimensions must be >= 1");
  }
  const int in_dim = channels * height * width;
  ActionFeatureHead head;
  head.w = Tensor({out_dim, in_dim});
  Xoshiro256ss rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& v : head.w.data()) {
    v = rng.uniform(-bound, bound);
  }
  head.b = Tensor({out_dim});
  return head;
}

Tensor action_feature_vector(const FeatureMap& fmap, const CamWeights& weights,
                             std::optional<int> klass,
                             const ActionFeatureHead& head) {
  require_compatible(fmap, weights);
  const int k = klass ? *klass : select_class(class_scores(fmap, weights));
  require_class(k, weights.n_classes());

  const Tensor gated = gated_features(fmap, cam_map(fmap, weights, k));
  const std::size_t flat_len = gated.size();
  if (head.w.rank() != 2 ||
      static_cast<std::size_t>(head.w.dim(1)) != flat_len) {
    throw DimensionError("action_feature_vector: head expects " +
                         std::to_string(head.w.dim(1)) +
                         " inputs but gated features flatten to " +
                         std::to_string(flat_len));
  }
  Tensor flat({static_cast<int>(flat_len)},
              std::vector<double>(gated.data().begin(), gated.data().end()));
  return relu(add(matvec(head.w, flat), head.b));
}

void save_feature_map(const FeatureMapFile& file, const std::string& path) {
  require_compatible(file.fmap, file.weights);
  ByteWriter w;
  w.magic("FMP1");
  w.u32(static_cast<std::uint32_t>(file.fmap.channels()));
  w.u32(static_cast<std::uint32_t>(file.fmap.height()));
  w.u32(static_cast<std::uint32_t>(file.fmap.width()));
  w.u32(static_cast<std::uint32_t>(file.weights.n_classes()));
  for (double v : file.fmap.activations.data()) {
    w.f32(static_cast<float>(v));
  }
  for (double v : file.weights.weights.data()) {
    w.f32(static_cast<float>(v));
  }
  write_file_bytes(path, w.buffer());
}

FeatureMapFile load_feature_map(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("FMP1");
  const int L = static_cast<int>(r.u32("channel count"));
  const int H = static_cast<int>(r.u32("height"));
  const int W = static_cast<int>(r.u32("width"));
  const int N = static_cast<int>(r.u32("class count"));
  if (L < 1 || H < 1 || W < 1 || N < 1) {
    throw FormatError(path + ": implausible dimension header", 4);
  }

  Tensor activations({L, H, W});
  for (double& v : activations.data()) {
    v = static_cast<double>(r.f32("activations"));
  }
  Tensor weights({N, L});
  for (double& v : weights.data()) {
    v = static_cast<double>(r.f32("class weights"));
  }
  if (!r.at_end()) {
    throw FormatError(path + ": trailing bytes after class weights",
                      r.offset());
  }
  return FeatureMapFile{FeatureMap{std::move(activations)},
                        CamWeights{std::move(weights)}};
}

}  // namespace mslstm
