#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "facn/imaging/color.hpp"
#include "facn/imaging/degradation.hpp"
#include "facn/imaging/metrics.hpp"
#include "facn/imaging/png_io.hpp"
#include "facn/imaging/resample.hpp"
#include "oracles.hpp"

using namespace facn;
using imaging::Image;

namespace {

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  return m;
}

Image constant(int h, int w, int c, float v) { return Image(h, w, c, v); }

}  // namespace

TEST(Resample, KeysKernelKnots) {
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(0.0), 1.0);
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(1.0), 0.0);
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(2.0), 0.0);
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(0.5), 0.5625);
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(1.5), -0.0625);
  EXPECT_DOUBLE_EQ(imaging::keys_cubic(-1.5), imaging::keys_cubic(1.5));
}

TEST(Resample, WeightsSumToOne) {
  for (auto [in, out, aa] : {std::tuple{128, 16, true}, {16, 128, false}, {37, 11, true}, {9, 20, false}}) {
    const auto w = imaging::bicubic_weights(in, out, aa);
    for (int i = 0; i < out; ++i) {
      double s = 0.0;
      for (int t = 0; t < w.taps; ++t) s += w.weight[i * w.taps + t];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

// Random shapes and scale factors against the per-pixel formula.
TEST(Resample, MatchesDirectEvaluationOnRandomShapes) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    const int h = 4 + static_cast<int>(rng() % 40), w = 4 + static_cast<int>(rng() % 40);
    const int oh = 2 + static_cast<int>(rng() % 50), ow = 2 + static_cast<int>(rng() % 50);
    const bool aa = rng() & 1;
    const Image img = oracle::random_image(h, w, 2, rng());
    EXPECT_LT(max_abs_diff(imaging::bicubic_resize(img, oh, ow, aa), oracle::resize(img, oh, ow, aa)), 1e-5)
        << h << "x" << w << " -> " << oh << "x" << ow << " antialias " << aa;
  }
}

TEST(Resample, ConstantImageIsPreserved) {
  const Image img = constant(40, 24, 3, 0.3f);
  const Image down = imaging::bicubic_resize(img, 5, 3, true);
  const Image up = imaging::bicubic_resize(img, 80, 48, false);
  for (float v : down.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
  for (float v : up.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(Resample, GaussianKernelClosedForm) {
  const auto k = imaging::gaussian_kernel(7, 1.6);
  ASSERT_EQ(k.size(), 49u);
  double total = 0.0;
  for (double v : k) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  double norm = 0.0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) norm += std::exp(-(x * x + y * y) / (2 * 1.6 * 1.6));
  EXPECT_NEAR(k[3 * 7 + 3], 1.0 / norm, 1e-12);
  EXPECT_NEAR(k[0], std::exp(-18 / (2 * 1.6 * 1.6)) / norm, 1e-12);
  EXPECT_DOUBLE_EQ(k[1], k[7]);
}

TEST(Resample, FilterReplicatesBorder) {
  const Image img = constant(9, 9, 1, 0.7f);
  const Image out = imaging::filter2d(img, imaging::gaussian_kernel(7, 1.6), 7);
  for (float v : out.data()) EXPECT_NEAR(v, 0.7f, 1e-6);
}

TEST(Degradation, ShapesAndDefaults) {
  const Image hr = oracle::random_image(128, 128, 3, 1);
  for (auto kind : {imaging::DegradationKind::Bic, imaging::DegradationKind::BicN, imaging::DegradationKind::BBicN}) {
    const auto spec = imaging::DegradationSpec::make(kind, 5);
    const Image lr = imaging::degrade(hr, spec);
    EXPECT_EQ(lr.height(), 16);
    EXPECT_EQ(lr.width(), 16);
    EXPECT_EQ(lr.channels(), 3);
  }
  EXPECT_EQ(imaging::DegradationSpec::make(imaging::DegradationKind::Bic).noise_level, 0.0);
  EXPECT_EQ(imaging::DegradationSpec::make(imaging::DegradationKind::BicN).noise_level, 10.0);
  const auto b = imaging::DegradationSpec::make(imaging::DegradationKind::BBicN);
  EXPECT_EQ(b.noise_level, 30.0);
  EXPECT_EQ(b.blur_size, 7);
  EXPECT_DOUBLE_EQ(b.blur_sigma, 1.6);
}

TEST(Degradation, BicMatchesOracleDownscale) {
  const Image hr = oracle::random_image(128, 128, 3, 9);
  const Image lr = imaging::degrade(hr, imaging::DegradationSpec::make(imaging::DegradationKind::Bic));
  Image ref = oracle::resize(hr, 16, 16, true);
  ref.clamp01();
  EXPECT_LT(max_abs_diff(lr, ref), 1e-5);
}

TEST(Degradation, DeterministicPerSeed) {
  const Image hr = oracle::random_image(64, 64, 3, 2);
  auto spec = imaging::DegradationSpec::make(imaging::DegradationKind::BBicN, 11, 64);
  const Image a = imaging::degrade(hr, spec);
  EXPECT_EQ(a, imaging::degrade(hr, spec));
  spec.seed = 12;
  EXPECT_NE(a, imaging::degrade(hr, spec));
}

TEST(Degradation, ConstantsSurviveWithoutNoise) {
  const Image hr = constant(128, 128, 3, 0.25f);
  for (auto kind : {imaging::DegradationKind::Bic, imaging::DegradationKind::BBicN}) {
    auto spec = imaging::DegradationSpec::make(kind, 3);
    spec.noise_level = 0.0;
    const Image lr = imaging::degrade(hr, spec);
    for (float v : lr.data()) EXPECT_NEAR(v, 0.25f, 1e-6);
  }
}

TEST(Degradation, NoiseStandardDeviation) {
  for (double level : {10.0, 30.0}) {
    const Image flat = constant(256, 256, 1, 0.5f);
    const Image noisy = imaging::add_gaussian_noise(flat, level, 77);
    double sum = 0.0, sq = 0.0;
    for (float v : noisy.data()) {
      sum += v - 0.5;
      sq += (v - 0.5) * (v - 0.5);
    }
    const double n = static_cast<double>(noisy.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(sd, level / 255.0, 0.03 * level / 255.0);
  }
}

TEST(Degradation, RejectsBadSpecs) {
  auto spec = imaging::DegradationSpec::make(imaging::DegradationKind::BicN);
  spec.noise_level = -1.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  EXPECT_THROW(imaging::parse_degradation_kind("bicubic"), std::exception);
  EXPECT_EQ(imaging::parse_degradation_kind("BBicN"), imaging::DegradationKind::BBicN);
  const Image wrong = oracle::random_image(100, 100, 3, 1);
  EXPECT_THROW(imaging::degrade(wrong, imaging::DegradationSpec::make(imaging::DegradationKind::Bic)), std::invalid_argument);
}

TEST(Metrics, PsnrClosedForms) {
  Image ref = constant(32, 32, 1, 100.0f / 255.0f);
  Image off = constant(32, 32, 1, 101.0f / 255.0f);
  EXPECT_NEAR(imaging::psnr(ref, off), 48.1308, 1e-3);
  EXPECT_NEAR(imaging::psnr(constant(8, 8, 1, 0.0f), constant(8, 8, 1, 1.0f)), 0.0, 1e-3);
  EXPECT_TRUE(std::isinf(imaging::psnr(ref, ref)));
}

TEST(Metrics, SsimClosedForms) {
  const Image img = oracle::random_image(48, 48, 3, 5);
  EXPECT_NEAR(imaging::ssim(img, img), 1.0, 1e-9);
  const double a = 100.0, b = 150.0, c1 = std::pow(0.01 * 255, 2);
  const double expected = (2 * a * b + c1) / (a * a + b * b + c1);
  EXPECT_NEAR(imaging::ssim(constant(32, 32, 1, a / 255.0f), constant(32, 32, 1, b / 255.0f)), expected, 1e-6);
}

TEST(Metrics, LumaConversion) {
  Image rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.0f;
  rgb.at(1, 0, 0) = 1.0f;
  rgb.at(2, 0, 0) = 1.0f;
  EXPECT_NEAR(imaging::rgb_to_y(rgb).at(0, 0, 0) * 255.0, 235.0, 1e-3);
  EXPECT_NEAR(imaging::rgb_to_y(constant(1, 1, 3, 0.0f)).at(0, 0, 0) * 255.0, 16.0, 1e-4);
}

TEST(Png, RoundTripIsExactOnTheByteGrid) {
  const auto path = std::filesystem::temp_directory_path() / "facn_png_roundtrip.png";
  const Image img = imaging::quantize8(oracle::random_image(13, 7, 3, 3));
  imaging::write_png(path, img);
  EXPECT_EQ(imaging::read_png(path), img);
  std::filesystem::remove(path);
  EXPECT_THROW(imaging::read_png(path), std::exception);
}
