#pragma once

#include <span>
#include <vector>

#include "ula/dataset.hpp"
#include "ula/rng.hpp"

namespace ula {

// Stochastic view transformations over the renderer's 12x12x3 layout,
// applied in order: random resized crop, channel tint jitter, grayscale,
// horizontal flip, additive Gaussian noise; the result is clipped to
// [0,1]. An all-off config is the exact identity. Defaults must keep the
// bias attribute decodable (checked by the bias-retention suite).
struct AugConfig {
  double crop_min_scale = 1.0;  // in (0,1]; side fraction of the crop
  double tint_jitter = 0.0;     // >= 0; per-channel factor in 1 +- jitter
  double gray_prob = 0.0;       // in [0,1]
  double noise_std = 0.0;       // >= 0
  double flip_prob = 0.0;       // in [0,1]

  void validate() const;
};

std::vector<float> augment(std::span<const float> x, const AugConfig& cfg,
                           Rng& rng);

}  // namespace ula
