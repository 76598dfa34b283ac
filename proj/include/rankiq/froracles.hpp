// Built-in full-reference oracles (PSNR clipped at 60 dB, single-scale SSIM
// with the standard pre-downsampling) and 4-parameter logistic calibration
// fitted with a Nelder-Mead simplex.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "rankiq/dataset.hpp"
#include "rankiq/image.hpp"

namespace rankiq {

inline constexpr double kPsnrCap = 60.0;

inline double psnr(const Image& reference, const Image& test) {
  require(reference.same_shape(test), "psnr: image dimensions differ");
  require(!reference.empty(), "psnr: empty image");
  double mse = 0.0;
  const auto& a = reference.pixels();
  const auto& b = test.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01*255)^2,
// C2=(0.03*255)^2, computed on the valid region after the customary
// downsampling by max(1, round(min(H,W)/256)).
inline double ssim(const Image& reference, const Image& test) {
  require(reference.same_shape(test), "ssim: image dimensions differ");
  Image x = reference, y = test;
  const int f = std::max(
      1, static_cast<int>(std::lround(
             std::min(x.height(), x.width()) / 256.0)));
  if (f > 1) {
    x = box_downsample(x, f);
    y = box_downsample(y, f);
  }
  require(std::min(x.width(), x.height()) >= 16, "ssim: image too small");

  const auto win = gaussian_kernel(1.5, 5);
  Image x2 = x, y2 = y, xy = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x2.pixels()[i] = x.pixels()[i] * x.pixels()[i];
    y2.pixels()[i] = y.pixels()[i] * y.pixels()[i];
    xy.pixels()[i] = x.pixels()[i] * y.pixels()[i];
  }
  const Image mu_x = filter_valid(x, win);
  const Image mu_y = filter_valid(y, win);
  const Image e_x2 = filter_valid(x2, win);
  const Image e_y2 = filter_valid(y2, win);
  const Image e_xy = filter_valid(xy, win);

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x.pixels()[i], my = mu_y.pixels()[i];
    const double sxx = e_x2.pixels()[i] - mx * mx;
    const double syy = e_y2.pixels()[i] - my * my;
    const double sxy = e_xy.pixels()[i] - mx * my;
    const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
    const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_x.size());
}

// --------------------------------------------------------------------------
// 4-parameter logistic: q_hat = (b1 - b2) / (1 + exp(-(q - b3)/|b4|)) + b2.

struct LogisticParams {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double beta4 = 1.0;

  double evaluate(double q) const {
    const double b4 = std::max(std::abs(beta4), 1e-12);
    const double t = (q - beta3) / b4;
    const double s = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                              : std::exp(t) / (1.0 + std::exp(t));
    return (beta1 - beta2) * s + beta2;
  }
};

namespace detail {

// Classic Nelder-Mead on the logistic SSE. Initial vertex per the fitting
// convention here: (max target, min target, median raw, raw range / 4);
// stops when the simplex diameter is below 1e-8 relative or after 4000
// iterations.
inline LogisticParams nelder_mead_logistic(const std::vector<double>& raw,
                                           const std::vector<double>& target) {
  const auto sse = [&](const std::array<double, 4>& b) {
    LogisticParams p{b[0], b[1], b[2], b[3]};
    double acc = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double r = p.evaluate(raw[i]) - target[i];
      acc += r * r;
    }
    return acc;
  };

  const double tmax = *std::max_element(target.begin(), target.end());
  const double tmin = *std::min_element(target.begin(), target.end());
  const double rmax = *std::max_element(raw.begin(), raw.end());
  const double rmin = *std::min_element(raw.begin(), raw.end());
  std::array<double, 4> x0{tmax, tmin, median_of(raw), (rmax - rmin) / 4.0};

  struct Vertex {
    std::array<double, 4> x;
    double f;
  };
  std::vector<Vertex> v;
  v.push_back({x0, sse(x0)});
  for (int i = 0; i < 4; ++i) {
    std::array<double, 4> xi = x0;
    xi[i] += xi[i] != 0.0 ? 0.05 * std::abs(xi[i]) : 0.00025;
    v.push_back({xi, sse(xi)});
  }

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  for (int iter = 0; iter < 4000; ++iter) {
    std::stable_sort(v.begin(), v.end(),
                     [](const Vertex& a, const Vertex& b) { return a.f < b.f; });

    double diameter = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      for (int p = 0; p < 4; ++p) {
        diameter = std::max(diameter, std::abs(v[i].x[p] - v[0].x[p]) /
                                          (1.0 + std::abs(v[0].x[p])));
      }
    }
    if (diameter < 1e-8) break;

    std::array<double, 4> centroid{};
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      for (int p = 0; p < 4; ++p) centroid[p] += v[i].x[p];
    }
    for (int p = 0; p < 4; ++p) centroid[p] /= 4.0;

    auto blend = [&](double coef, const std::array<double, 4>& far) {
      std::array<double, 4> x;
      for (int p = 0; p < 4; ++p) x[p] = centroid[p] + coef * (centroid[p] - far[p]);
      return x;
    };

    Vertex& worst = v.back();
    const auto xr = blend(alpha, worst.x);
    const double fr = sse(xr);
    if (fr < v[0].f) {
      const auto xe = blend(gamma, worst.x);
      const double fe = sse(xe);
      worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < v[v.size() - 2].f) {
      worst = {xr, fr};
    } else {
      const auto xc = blend(-rho, worst.x);
      const double fc = sse(xc);
      if (fc < worst.f) {
        worst = {xc, fc};
      } else {
        for (std::size_t i = 1; i < v.size(); ++i) {
          for (int p = 0; p < 4; ++p) {
            v[i].x[p] = v[0].x[p] + sigma * (v[i].x[p] - v[0].x[p]);
          }
          v[i].f = sse(v[i].x);
        }
      }
    }
  }
  std::stable_sort(v.begin(), v.end(),
                   [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  return {v[0].x[0], v[0].x[1], v[0].x[2], v[0].x[3]};
}

}  // namespace detail

inline LogisticParams fit_logistic(const std::vector<double>& raw_scores,
                                   const std::vector<double>& targets) {
  require(raw_scores.size() == targets.size(),
          "fit_logistic: input lengths differ");
  require(raw_scores.size() >= 5, "fit_logistic: need at least 5 points");
  for (double r : raw_scores) {
    require(std::isfinite(r), "fit_logistic: non-finite raw score");
  }
  for (double t : targets) {
    require(std::isfinite(t), "fit_logistic: non-finite target");
  }
  const auto [mn, mx] = std::minmax_element(raw_scores.begin(), raw_scores.end());
  require(*mn < *mx, "fit_logistic: degenerate input, all raw scores equal");
  return detail::nelder_mead_logistic(raw_scores, targets);
}

// Replaces the named oracle's scores by their logistic-mapped values.
inline Dataset calibrate(Dataset dataset, const std::string& oracle_name,
                         const std::vector<std::pair<double, double>>& anchors) {
  const int col = dataset.oracle_index(oracle_name);
  std::vector<double> raw, mos;
  raw.reserve(anchors.size());
  mos.reserve(anchors.size());
  for (const auto& [r, m] : anchors) {
    raw.push_back(r);
    mos.push_back(m);
  }
  const LogisticParams params = fit_logistic(raw, mos);
  for (auto& rec : dataset.records) {
    rec.oracle_scores[static_cast<std::size_t>(col)] =
        params.evaluate(rec.oracle_scores[static_cast<std::size_t>(col)]);
  }
  return dataset;
}

}  // namespace rankiq
