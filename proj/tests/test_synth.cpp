#include <catch2/catch_amalgamated.hpp>

#include "rankiq/froracles.hpp"
#include "rankiq/synth.hpp"

using namespace rankiq;

TEST_CASE("synth_sources is deterministic for a fixed seed") {
  const auto a = synth_sources(2, 64, 7);
  const auto b = synth_sources(2, 64, 7);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels() == b[i].pixels());
  }
  const auto c = synth_sources(2, 64, 8);
  CHECK(a[0].pixels() != c[0].pixels());
}

TEST_CASE("synth_sources honors the pixel range contract") {
  const auto imgs = synth_sources(1, 16, 0);
  REQUIRE(imgs.size() == 1);
  CHECK(imgs[0].width() == 16);
  CHECK(imgs[0].height() == 16);
  for (double p : imgs[0].pixels()) {
    CHECK(p >= 0.0);
    CHECK(p <= 255.0);
  }
}

TEST_CASE("synth_sources produces pairwise distinct images") {
  const auto imgs = synth_sources(200, 64, 1);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    for (std::size_t j = i + 1; j < imgs.size(); ++j) {
      if (imgs[i].pixels() == imgs[j].pixels()) {
        FAIL("images " << i << " and " << j << " are identical");
      }
    }
  }
  SUCCEED();
}

TEST_CASE("synth_sources rejects invalid arguments") {
  CHECK_THROWS_AS(synth_sources(0, 64, 1), Error);
  CHECK_THROWS_AS(synth_sources(1, 8, 1), Error);
}

TEST_CASE("white noise PSNR decreases strictly with the level") {
  const auto sources = synth_sources(5, 64, 11);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    double prev = psnr(sources[s], sources[s]);
    for (int level = 1; level <= kDistortionLevels; ++level) {
      const Image noisy = apply_distortion(sources[s], Distortion::white_noise(),
                                           level, 100 + level);
      const double p = psnr(sources[s], noisy);
      CHECK(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("blur PSNR and SSIM degrade with the level") {
  const auto sources = synth_sources(5, 64, 12);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    double prev = psnr(sources[s], sources[s]);
    for (int level = 1; level <= kDistortionLevels; ++level) {
      const Image blurred = apply_distortion(
          sources[s], Distortion::gaussian_blur(), level, 0);
      const double p = psnr(sources[s], blurred);
      CHECK(p < prev);
      prev = p;
    }
    const Image light =
        apply_distortion(sources[s], Distortion::gaussian_blur(), 1, 0);
    const Image heavy =
        apply_distortion(sources[s], Distortion::gaussian_blur(), 5, 0);
    CHECK(ssim(sources[s], light) > ssim(sources[s], heavy));
  }
}

TEST_CASE("apply_distortion is deterministic and validates input") {
  const auto sources = synth_sources(1, 32, 5);
  const Image a = apply_distortion(sources[0], Distortion::white_noise(), 3, 9);
  const Image b = apply_distortion(sources[0], Distortion::white_noise(), 3, 9);
  CHECK(a.pixels() == b.pixels());
  const Image c = apply_distortion(sources[0], Distortion::white_noise(), 3, 10);
  CHECK(a.pixels() != c.pixels());

  CHECK_THROWS_AS(
      apply_distortion(sources[0], Distortion::white_noise(), 0, 1), Error);
  CHECK_THROWS_AS(
      apply_distortion(sources[0], Distortion::white_noise(), 6, 1), Error);
  CHECK_THROWS_WITH(
      apply_distortion(sources[0], Distortion::from_tag("JPEG"), 1, 1),
      Catch::Matchers::ContainsSubstring("unsupported distortion"));
  CHECK_THROWS_AS(
      apply_distortion(sources[0], Distortion::pristine(), 1, 1), Error);
}

TEST_CASE("extract_features returns 16 finite values") {
  const auto sources = synth_sources(3, 64, 2);
  for (const auto& img : sources) {
    const auto f = extract_features(img);
    REQUIRE(f.size() == kFeatureDim);
    for (double v : f) CHECK(std::isfinite(v));
  }
}

TEST_CASE("variance-type features vanish on a constant image") {
  const Image img(32, 32, 77.0);
  const auto f = extract_features(img);
  REQUIRE(f.size() == kFeatureDim);
  // Every coordinate is a log-moment of a variance- or gradient-type
  // quantity, so a constant image maps to the exact zero vector.
  for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("distorted features differ from the pristine ones") {
  const auto sources = synth_sources(1, 64, 3);
  const Image noisy = apply_distortion(sources[0], Distortion::white_noise(), 2, 4);
  const auto fp = extract_features(sources[0]);
  const auto fn = extract_features(noisy);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(fp[i] - fn[i]));
  }
  CHECK(max_diff > 0.0);
}
