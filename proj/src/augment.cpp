#include "ula/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace ula {

void AugConfig::validate() const {
  if (crop_min_scale <= 0.0 || crop_min_scale > 1.0) {
    throw std::invalid_argument("crop_min_scale must be in (0,1]");
  }
  if (tint_jitter < 0.0 || noise_std < 0.0) {
    throw std::invalid_argument("tint_jitter and noise_std must be >= 0");
  }
  if (gray_prob < 0.0 || gray_prob > 1.0 || flip_prob < 0.0 ||
      flip_prob > 1.0) {
    throw std::invalid_argument("gray_prob/flip_prob must be in [0,1]");
  }
}

namespace {

inline float px(std::span<const float> img, int r, int c, int ch) {
  return img[(static_cast<size_t>(r) * kImageW + c) * kImageC + ch];
}

inline float& px(std::span<float> img, int r, int c, int ch) {
  return img[(static_cast<size_t>(r) * kImageW + c) * kImageC + ch];
}

// Bilinear sample inside the crop window [y0, y0+ch) x [x0, x0+cw).
float sample_bilinear(std::span<const float> img, double sy, double sx, int y0,
                      int x0, int crop_h, int crop_w, int ch) {
  const double cy = std::clamp(sy, 0.0, static_cast<double>(crop_h - 1));
  const double cx = std::clamp(sx, 0.0, static_cast<double>(crop_w - 1));
  const int r0 = static_cast<int>(cy);
  const int c0 = static_cast<int>(cx);
  const int r1 = std::min(r0 + 1, crop_h - 1);
  const int c1 = std::min(c0 + 1, crop_w - 1);
  const double fy = cy - r0;
  const double fx = cx - c0;
  const double top = (1 - fx) * px(img, y0 + r0, x0 + c0, ch) +
                     fx * px(img, y0 + r0, x0 + c1, ch);
  const double bot = (1 - fx) * px(img, y0 + r1, x0 + c0, ch) +
                     fx * px(img, y0 + r1, x0 + c1, ch);
  return static_cast<float>((1 - fy) * top + fy * bot);
}

}  // namespace

std::vector<float> augment(std::span<const float> x, const AugConfig& cfg,
                           Rng& rng) {
  cfg.validate();
  if (x.size() != static_cast<size_t>(kFeatureDim)) {
    throw std::invalid_argument("augment expects the renderer feature layout");
  }
  std::vector<float> out(x.begin(), x.end());

  // Random resized crop (square), bilinear resize back.
  const double scale = rng.uniform(cfg.crop_min_scale, 1.0);
  const int crop = std::max(1, static_cast<int>(std::lround(scale * kImageW)));
  const int x0 = rng.uniform_int(0, kImageW - crop);
  const int y0 = rng.uniform_int(0, kImageH - crop);
  if (crop != kImageW) {
    std::vector<float> resized(out.size());
    const double step = static_cast<double>(crop) / kImageW;
    for (int r = 0; r < kImageH; ++r) {
      for (int c = 0; c < kImageW; ++c) {
        const double sy = (r + 0.5) * step - 0.5;
        const double sx = (c + 0.5) * step - 0.5;
        for (int ch = 0; ch < kImageC; ++ch) {
          px(std::span<float>(resized), r, c, ch) =
              sample_bilinear(out, sy, sx, y0, x0, crop, crop, ch);
        }
      }
    }
    out = std::move(resized);
  }

  // Channel tint jitter.
  float factors[kImageC];
  for (float& f : factors) {
    f = static_cast<float>(1.0 + rng.uniform(-cfg.tint_jitter, cfg.tint_jitter));
  }
  if (cfg.tint_jitter > 0.0) {
    for (size_t i = 0; i < out.size(); ++i) out[i] *= factors[i % kImageC];
  }

  if (rng.bernoulli(cfg.gray_prob)) {
    for (int r = 0; r < kImageH; ++r) {
      for (int c = 0; c < kImageW; ++c) {
        float mean = 0.0f;
        for (int ch = 0; ch < kImageC; ++ch) mean += px(std::span<const float>(out), r, c, ch);
        mean /= kImageC;
        for (int ch = 0; ch < kImageC; ++ch) px(std::span<float>(out), r, c, ch) = mean;
      }
    }
  }

  if (rng.bernoulli(cfg.flip_prob)) {
    for (int r = 0; r < kImageH; ++r) {
      for (int c = 0; c < kImageW / 2; ++c) {
        for (int ch = 0; ch < kImageC; ++ch) {
          std::swap(px(std::span<float>(out), r, c, ch),
                    px(std::span<float>(out), r, kImageW - 1 - c, ch));
        }
      }
    }
  }

  if (cfg.noise_std > 0.0) {
    for (float& v : out) {
      v = static_cast<float>(clamp01(v + cfg.noise_std * rng.normal()));
    }
  } else if (cfg.tint_jitter > 0.0) {
    for (float& v : out) v = static_cast<float>(clamp01(v));
  }
  return out;
}

}  // namespace ula
