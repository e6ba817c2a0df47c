#ifndef MSLSTM_AUGMENT_HPP
#define MSLSTM_AUGMENT_HPP

#include <cstdint>

#include "mslstm/prng.hpp"
#include "mslstm/tensor.hpp"

namespace mslstm {

inline constexpr int kAugmentOutputSize = 224;

/// Geometric augmentation parameters. Offsets are fractions in [0, 1) of
/// the placement slack left once the crop rectangle is scaled, so the same
/// parameters apply to any input size.
struct AugmentParams {
  bool flip = false;        // horizontal mirror
  double angle_deg = 0.0;   // rotation about the image centre, degrees
  double scale = 1.0;       // crop rectangle scale in [0.8, 1]
  double offset_x = 0.0;    // placement fractions of the remaining slack
  double offset_y = 0.0;
};

/// Draws parameters in fixed order: flip (p = 0.5), angle uniform in
/// [-8, 8] degrees, scale uniform in [0.8, 1], then the two offsets.
AugmentParams draw_augment_params(Xoshiro256ss& rng);

/// Applies flip, rotation (bilinear, border replicate, same canvas), then
/// crops the largest 4:3 rectangle scaled by `scale` placed at the offsets
/// and resizes it to 224 x 224 with one bilinear pass. Input is
/// [H x W x 3] with H, W >= 8.
Tensor augment_with_params(const Tensor& image, const AugmentParams& params);

/// Seeded end-to-end augmentation: draw parameters, then apply them.
Tensor augment_geometric(const Tensor& image, std::uint64_t seed);

}  // namespace mslstm

#endif
