// Synthetic source generation, the built-in distortion ladders, and the
// block-statistics feature extractor used at desk scale.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rankiq/dataset.hpp"
#include "rankiq/image.hpp"

namespace rankiq {

inline constexpr int kDistortionLevels = 5;
inline constexpr int kFeatureDim = 16;

// Noise standard deviations and blur sigmas per level 1..5. Both ladders are
// roughly geometric so the span runs from barely visible to severe.
inline constexpr double kNoiseSigma[kDistortionLevels] = {2.55, 6.38, 15.94,
                                                          39.85, 99.62};
inline constexpr double kBlurSigma[kDistortionLevels] = {0.8, 1.6, 3.2, 6.4,
                                                         12.8};

// Deterministic grayscale sources mixing a global gradient, sinusoidal
// texture, hard-edged shapes and a smooth random field, so that both noise
// and blur produce measurable quality loss.
inline std::vector<Image> synth_sources(int count, int side,
                                        std::uint64_t seed) {
  require(count >= 1, "source count must be >= 1");
  require(side >= 16, "source side must be >= 16");
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(n) + 1));
    Image img(side, side, 128.0);
    const double inv = 1.0 / static_cast<double>(side);

    const double theta = rng.uniform(0.0, kPi);
    const double grad_amp = rng.uniform(40.0, 90.0);
    const double gx = std::cos(theta), gy = std::sin(theta);

    struct Wave {
      double fx, fy, phase, amp;
    };
    std::vector<Wave> waves(3);
    for (auto& w : waves) {
      const double freq = rng.uniform(0.25, 1.2);
      const double dir = rng.uniform(0.0, kPi);
      w = {freq * std::cos(dir), freq * std::sin(dir),
           rng.uniform(0.0, 2.0 * kPi), rng.uniform(8.0, 25.0)};
    }

    // Coarse random field, bilinearly upsampled.
    const int grid = 5;
    std::vector<double> field(static_cast<std::size_t>(grid) * grid);
    for (double& v : field) v = rng.normal(0.0, 15.0);

    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        double v = 128.0;
        v += grad_amp * ((gx * x + gy * y) * inv * 2.0 - 1.0);
        for (const auto& w : waves) {
          v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        }
        const double u = x * inv * (grid - 1), t = y * inv * (grid - 1);
        const int u0 = std::min(static_cast<int>(u), grid - 2);
        const int t0 = std::min(static_cast<int>(t), grid - 2);
        const double du = u - u0, dt = t - t0;
        const double f00 = field[t0 * grid + u0], f10 = field[t0 * grid + u0 + 1];
        const double f01 = field[(t0 + 1) * grid + u0];
        const double f11 = field[(t0 + 1) * grid + u0 + 1];
        v += (1 - dt) * ((1 - du) * f00 + du * f10) +
             dt * ((1 - du) * f01 + du * f11);
        img.at(x, y) = v;
      }
    }

    // Hard-edged rectangles and disks.
    const int shapes = 3 + static_cast<int>(rng.below(4));
    for (int s = 0; s < shapes; ++s) {
      const bool disk = rng.uniform() < 0.5;
      const double offset = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                            rng.uniform(30.0, 80.0);
      const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(side)));
      const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(side)));
      const int r = side / 8 + static_cast<int>(rng.below(
                                   static_cast<std::uint64_t>(side / 4 + 1)));
      for (int y = std::max(0, cy - r); y < std::min(side, cy + r); ++y) {
        for (int x = std::max(0, cx - r); x < std::min(side, cx + r); ++x) {
          if (disk &&
              (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) {
            continue;
          }
          img.at(x, y) += offset;
        }
      }
    }

    img.clip();
    out.push_back(std::move(img));
  }
  return out;
}

inline Image apply_distortion(const Image& image, const Distortion& distortion,
                              int level, std::uint64_t seed) {
  require(!image.empty(), "cannot distort an empty image");
  require(level >= 1 && level <= kDistortionLevels,
          "distortion level must be in [1, 5]");
  Image out = image;
  switch (distortion.kind) {
    case DistortionKind::kWhiteNoise: {
      Rng rng(mix_seed(seed, 0x574eULL));
      const double sigma = kNoiseSigma[level - 1];
      for (double& p : out.pixels()) p += rng.normal(0.0, sigma);
      break;
    }
    case DistortionKind::kGaussianBlur: {
      const double sigma = kBlurSigma[level - 1];
      const int half = static_cast<int>(std::ceil(3.0 * sigma));
      out = convolve_separable(out, gaussian_kernel(sigma, half));
      break;
    }
    default:
      fail("unsupported distortion tag '" + distortion.tag + "'");
  }
  out.clip();
  return out;
}

// 16-dimensional feature vector built from 8x8 block statistics in two
// bands of a sigma-1 Gaussian decomposition: log variance of the
// local-mean-subtracted residual (tracks additive noise), log gradient
// energy and log variance of the smoothed image (track sharpness and
// content energy with noise suppressed), and the raw log gradient energy.
// Each statistic is pooled over blocks by mean, p10, median and p90. Every
// coordinate is a log-moment of a zero-baseline quantity, so a constant
// image maps to the zero vector.
inline std::vector<double> extract_features(const Image& image) {
  require(!image.empty(), "cannot extract features from an empty image");
  const Image smooth = convolve_separable(image, gaussian_kernel(1.0, 3));
  Image residual = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    residual.pixels()[i] = image.pixels()[i] - smooth.pixels()[i];
  }

  const int bs = 8;
  const int bw = std::max(1, image.width() / bs);
  const int bh = std::max(1, image.height() / bs);
  const int block_w = std::min(bs, image.width());
  const int block_h = std::min(bs, image.height());

  const auto block_stats = [&](const Image& im, int bx, int by, double* var,
                               double* grad) {
    double sum = 0.0, sum2 = 0.0, g = 0.0, gn = 0.0;
    double lo = im.at(bx * block_w, by * block_h), hi = lo;
    for (int y = 0; y < block_h; ++y) {
      for (int x = 0; x < block_w; ++x) {
        const int px = bx * block_w + x, py = by * block_h + y;
        const double p = im.at(px, py);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        sum += p;
        sum2 += p * p;
        if (px + 1 < im.width()) {
          const double dx = im.at(px + 1, py) - p;
          g += dx * dx;
          gn += 1.0;
        }
        if (py + 1 < im.height()) {
          const double dy = im.at(px, py + 1) - p;
          g += dy * dy;
          gn += 1.0;
        }
      }
    }
    const double n = static_cast<double>(block_w) * block_h;
    const double mean = sum / n;
    *var = lo == hi ? 0.0 : std::max(0.0, sum2 / n - mean * mean);
    *grad = gn > 0.0 ? g / gn : 0.0;
  };

  std::vector<std::vector<double>> stats(4);
  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      double var = 0.0, grad = 0.0;
      block_stats(residual, bx, by, &var, &grad);
      stats[0].push_back(std::log1p(var));
      block_stats(smooth, bx, by, &var, &grad);
      stats[1].push_back(std::log1p(grad));
      stats[2].push_back(std::log1p(var));
      block_stats(image, bx, by, &var, &grad);
      stats[3].push_back(std::log1p(grad));
    }
  }

  std::vector<double> features;
  features.reserve(kFeatureDim);
  for (auto& s : stats) {
    std::sort(s.begin(), s.end());
    features.push_back(mean_of(s));
    features.push_back(s[s.size() / 10]);
    features.push_back(s[s.size() / 2]);
    features.push_back(s[s.size() - 1 - s.size() / 10]);
  }
  return features;
}

}  // namespace rankiq
