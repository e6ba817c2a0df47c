#include "mslstm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mslstm/errors.hpp"

namespace mslstm {

namespace {

void validate_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("augment: image must be [H x W x 3], got " +
                         shape_str(image.shape()));
  }
  if (image.dim(0) < 8 || image.dim(1) < 8) {
    throw DimensionError("augment: image must be at least 8 x 8, got " +
                         shape_str(image.shape()));
  }
  if (!image.all_finite()) {
    throw DimensionError("augment: image contains non-finite values");
  }
}

/// Bilinear sample at real coordinates with border replicate.
double sample(const Tensor& img, double y, double x, int c) {
  const int H = img.dim(0);
  const int W = img.dim(1);
  const double yc = std::clamp(y, 0.0, static_cast<double>(H - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(W - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, H - 1);
  const int x1 = std::min(x0 + 1, W - 1);
  const double fy = yc - y0;
  const double fx = xc - x0;
  const double top = (1.0 - fx) * img(y0, x0, c) + fx * img(y0, x1, c);
  const double bot = (1.0 - fx) * img(y1, x0, c) + fx * img(y1, x1, c);
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace

AugmentParams draw_augment_params(Xoshiro256ss& rng) {
  AugmentParams p;
  p.flip = rng.uniform() < 0.5;
  p.angle_deg = rng.uniform(-8.0, 8.0);
  p.scale = rng.uniform(0.8, 1.0);
  p.offset_x = rng.uniform();
  p.offset_y = rng.uniform();
  return p;
}

Tensor augment_with_params(const Tensor& image, const AugmentParams& params) {
  validate_image(image);
  if (!(params.scale > 0.0 && params.scale <= 1.0)) {
    throw ConfigError("augment: scale must be in (0, 1], got " +
                      std::to_string(params.scale));
  }
  if (!(params.offset_x >= 0.0 && params.offset_x <= 1.0 &&
        params.offset_y >= 0.0 && params.offset_y <= 1.0)) {
    throw ConfigError("augment: offsets must be in [0, 1]");
  }
  const int H = image.dim(0);
  const int W = image.dim(1);

  // Pass 1: mirror and rotate into a same-size canvas. The mirror is folded
  // into the source coordinate, which is exact, so this costs a single
  // bilinear resampling.
  const double theta = params.angle_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cx = (W - 1) / 2.0;
  const double cy = (H - 1) / 2.0;
  Tensor canvas({H, W, 3});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      double sx = cos_t * dx + sin_t * dy + cx;
      const double sy = -sin_t * dx + cos_t * dy + cy;
      if (params.flip) {
        sx = (W - 1) - sx;
      }
      for (int c = 0; c < 3; ++c) {
        canvas(y, x, c) = sample(image, sy, sx, c);
      }
    }
  }

  // Pass 2: place the largest 4:3 rectangle, scaled, and resize to the
  // output size with pixel-centre sampling.
  double rect_w, rect_h;
  if (static_cast<double>(W) * 3.0 >= static_cast<double>(H) * 4.0) {
    rect_h = H;
    rect_w = H * 4.0 / 3.0;
  } else {
    rect_w = W;
    rect_h = W * 3.0 / 4.0;
  }
  const double crop_w = rect_w * params.scale;
  const double crop_h = rect_h * params.scale;
  const double x0 = params.offset_x * (W - crop_w);
  const double y0 = params.offset_y * (H - crop_h);

  const int S = kAugmentOutputSize;
  Tensor out({S, S, 3});
  for (int i = 0; i < S; ++i) {
    const double sy = y0 + (i + 0.5) * crop_h / S - 0.5;
    for (int j = 0; j < S; ++j) {
      const double sx = x0 + (j + 0.5) * crop_w / S - 0.5;
      for (int c = 0; c < 3; ++c) {
        out(i, j, c) = sample(canvas, sy, sx, c);
      }
    }
  }
  return out;
}

Tensor augment_geometric(const Tensor& image, std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  return augment_with_params(image, draw_augment_params(rng));
}

}  // namespace mslstm
