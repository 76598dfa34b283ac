// Grayscale image container plus the filtering primitives the oracles and
// the synthesizer build on. Pixels are doubles in [0, 255], row-major.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rankiq/common.hpp"

namespace rankiq {

class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  double& at(int x, int y) { return pixels_[idx(x, y)]; }
  double at(int x, int y) const { return pixels_[idx(x, y)]; }

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  void clip() {
    for (double& p : pixels_) p = std::clamp(p, 0.0, 255.0);
  }

 private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

inline std::vector<double> gaussian_kernel(double sigma, int half_width) {
  require(sigma > 0.0 && half_width >= 0, "invalid gaussian kernel spec");
  std::vector<double> k(2 * half_width + 1);
  double sum = 0.0;
  for (int i = -half_width; i <= half_width; ++i) {
    k[i + half_width] = std::exp(-(static_cast<double>(i) * i) /
                                 (2.0 * sigma * sigma));
    sum += k[i + half_width];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Mirror padding that duplicates the border pixel (.. 1 0 | 0 1 2 ..).
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Separable convolution with an odd symmetric kernel, mirror-padded borders,
// output the same size as the input.
inline Image convolve_separable(const Image& img, const std::vector<double>& k) {
  const int h = static_cast<int>(k.size() / 2);
  const int w = img.width(), ht = img.height();
  Image tmp(w, ht), out(w, ht);
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -h; t <= h; ++t) {
        acc += k[t + h] * img.at(reflect_index(x + t, w), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -h; t <= h; ++t) {
        acc += k[t + h] * tmp.at(x, reflect_index(y + t, ht));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

// Separable filtering keeping only fully covered positions; the result is
// (W - 2h) x (H - 2h).
inline Image filter_valid(const Image& img, const std::vector<double>& k) {
  const int h = static_cast<int>(k.size() / 2);
  const int w = img.width(), ht = img.height();
  require(w > 2 * h && ht > 2 * h, "image too small for valid filtering");
  Image tmp(w - 2 * h, ht);
  for (int y = 0; y < ht; ++y) {
    for (int x = h; x < w - h; ++x) {
      double acc = 0.0;
      for (int t = -h; t <= h; ++t) acc += k[t + h] * img.at(x + t, y);
      tmp.at(x - h, y) = acc;
    }
  }
  Image out(w - 2 * h, ht - 2 * h);
  for (int y = h; y < ht - h; ++y) {
    for (int x = 0; x < tmp.width(); ++x) {
      double acc = 0.0;
      for (int t = -h; t <= h; ++t) acc += k[t + h] * tmp.at(x, y + t);
      out.at(x, y - h) = acc;
    }
  }
  return out;
}

// f x f block average followed by subsampling, truncating partial blocks.
inline Image box_downsample(const Image& img, int f) {
  require(f >= 1, "downsample factor must be >= 1");
  if (f == 1) return img;
  const int w = img.width() / f, h = img.height() / f;
  require(w > 0 && h > 0, "image too small to downsample");
  Image out(w, h);
  const double inv = 1.0 / (static_cast<double>(f) * f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) acc += img.at(x * f + dx, y * f + dy);
      }
      out.at(x, y) = acc * inv;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// 8-bit binary PGM, used by the synth/score subcommands to pass images
// between pipeline stages.

inline void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      row[x] = static_cast<unsigned char>(
          std::clamp(std::lround(img.at(x, y)), 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  require(out.good(), "failed writing '" + path + "'");
}

inline Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    fail("truncated PGM header in '" + path + "'");
  };
  require(next_token() == "P5", "'" + path + "' is not a binary PGM");
  const int w = static_cast<int>(parse_int(next_token(), path));
  const int h = static_cast<int>(parse_int(next_token(), path));
  const int maxval = static_cast<int>(parse_int(next_token(), path));
  require(w > 0 && h > 0 && maxval == 255, "unsupported PGM in '" + path + "'");
  in.get();  // single whitespace after maxval
  Image img(w, h);
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  require(in.gcount() == static_cast<std::streamsize>(buf.size()),
          "truncated PGM payload in '" + path + "'");
  for (std::size_t i = 0; i < buf.size(); ++i) {
    img.pixels()[i] = static_cast<double>(buf[i]);
  }
  return img;
}

}  // namespace rankiq
