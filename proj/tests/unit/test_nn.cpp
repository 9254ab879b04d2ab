#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "facn/nn/adam.hpp"
#include "facn/nn/checkpoint.hpp"
#include "facn/nn/gradcheck.hpp"
#include "facn/nn/init.hpp"
#include "facn/nn/layers.hpp"
#include "oracles.hpp"

using namespace facn;
using namespace facn::nn;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed) {
  Tensor<double> t(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& v : t.values()) v = n(rng);
  return t;
}

}  // namespace

TEST(Conv2d, MatchesDirectConvolution) {
  for (int stride : {1, 2})
    for (auto act : {Activation::None, Activation::LeakyRelu}) {
      Conv2d<double> conv("c", LayerSpec{LayerKind::Conv, 3, stride, 3, 5, act});
      conv.initialize(7);
      for (auto& b : conv.bias().value) b = 0.1;
      const auto x = random_tensor({2, 3, 9, 8}, 3);
      const auto y = conv.forward(x);
      int oh = 0, ow = 0;
      auto ref = oracle::conv2d(std::vector<double>(x.values().begin(), x.values().end()), 2, 3, 9, 8,
                                std::vector<double>(conv.weight().value.begin(), conv.weight().value.end()),
                                std::vector<double>(conv.bias().value.begin(), conv.bias().value.end()), 5, 3, stride, 1, oh, ow);
      if (act == Activation::LeakyRelu)
        for (auto& v : ref) v = v > 0 ? v : 0.2 * v;
      ASSERT_EQ(y.shape(), (Shape{2, 5, oh, ow}));
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
}

TEST(Conv2d, OutputExtentHalvesWithStride) {
  Conv2d<float> conv("c", LayerSpec{LayerKind::Conv, 3, 2, 4, 4, Activation::LeakyRelu});
  EXPECT_EQ(conv.output_shape({1, 4, 128, 128}), (Shape{1, 4, 64, 64}));
  EXPECT_EQ(conv.output_shape({1, 4, 3, 3}), (Shape{1, 4, 2, 2}));
}

TEST(Linear, MatchesMatrixProduct) {
  Linear<double> fc("fc", LayerSpec{LayerKind::FullyConnected, 1, 1, 6, 4, Activation::Sigmoid});
  fc.initialize(3);
  const auto x = random_tensor({3, 6, 1, 1}, 4);
  const auto y = fc.forward(x);
  for (int n = 0; n < 3; ++n)
    for (int o = 0; o < 4; ++o) {
      double acc = fc.bias().value[o];
      for (int i = 0; i < 6; ++i) acc += fc.weight().value[o * 6 + i] * x[n * 6 + i];
      EXPECT_NEAR(y[n * 4 + o], 1.0 / (1.0 + std::exp(-acc)), 1e-12);
    }
}

TEST(Upsample, NearestDoublesEachPixel) {
  Upsample2x<double> up;
  const auto x = random_tensor({1, 2, 3, 4}, 1);
  const auto y = up.forward(x);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 6, 8}));
  for (int c = 0; c < 2; ++c)
    for (int yy = 0; yy < 6; ++yy)
      for (int xx = 0; xx < 8; ++xx) EXPECT_EQ(y.at(0, c, yy, xx), x.at(0, c, yy / 2, xx / 2));
}

TEST(HeInit, VarianceMatchesFanIn) {
  const LayerSpec spec{LayerKind::Conv, 3, 1, 64, 64, Activation::LeakyRelu};
  const auto p = he_init<double>(spec, 5);
  double mean = 0.0, sq = 0.0;
  for (double v : p.weight.value) mean += v;
  mean /= static_cast<double>(p.weight.size());
  for (double v : p.weight.value) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(p.weight.size());
  EXPECT_NEAR(var, 2.0 / spec.fan_in(), 0.03 * 2.0 / spec.fan_in());
  EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(2.0 / spec.fan_in() / p.weight.size()));
  for (double b : p.bias.value) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(he_init<double>(spec, 5).weight.value, p.weight.value);
  EXPECT_NE(he_init<double>(spec, 6).weight.value, p.weight.value);
  EXPECT_EQ((LayerSpec{LayerKind::FullyConnected, 1, 1, 300, 10, Activation::None}).fan_in(), 300);
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
  Parameter<float> p("p", {3});
  p.value = {1.0f, -2.0f, 0.5f};
  p.grad = {0.3f, -4.0f, 0.0f};
  Adam adam({&p}, AdamOptions{0.5, 0.999, 1e-8, 0.0});
  adam.step(1e-2, 1.0);
  EXPECT_NEAR(p.value[0], 1.0f - 1e-2f, 1e-6);
  EXPECT_NEAR(p.value[1], -2.0f + 1e-2f, 1e-6);
  EXPECT_FLOAT_EQ(p.value[2], 0.5f);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, DecoupledDecayFollowsSchedule) {
  Parameter<float> p("p", {1});
  p.value = {2.0f};
  Adam adam({&p}, AdamOptions{0.5, 0.999, 1e-8, 0.1});
  adam.step(1e-3, 0.5);
  EXPECT_NEAR(p.value[0], 2.0f * (1.0f - 0.05f), 1e-6);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "facn_ckpt_unit";
  std::filesystem::remove_all(dir);
  Checkpoint ck;
  ck.fields["step"] = "12";
  ck.fields["format"] = "x";
  ck.blobs.push_back({"g.conv.weight", {2, 3}, {1.5f, -2.0f, 3.25f, 0.0f, 1e-30f, -7.0f}});
  ck.blobs.push_back({"d.fc.bias", {1}, {42.0f}});
  save_checkpoint(dir, ck);
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.fields, ck.fields);
  ASSERT_EQ(back.blobs.size(), 2u);
  EXPECT_EQ(back.find("g.conv.weight")->values, ck.blobs[0].values);
  EXPECT_EQ(back.find("g.conv.weight")->dims, (std::vector<int>{2, 3}));
  EXPECT_EQ(back.find("missing"), nullptr);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_checkpoint(dir), std::exception);
}

TEST(GradCheck, PassesOnCorrectLayerAndFlagsFaultyOne) {
  auto check = [](Layer<double>& layer) {
    auto input = random_tensor({2, 2, 5, 5}, 8);
    Parameter<double> in("input", {static_cast<int>(input.size())});
    in.value.assign(input.values().begin(), input.values().end());
    const auto r = random_tensor(layer.output_shape(input.shape()), 9);
    auto view = [&] { return Tensor<double>(input.shape(), in.value); };
    auto loss = [&] {
      const auto y = layer.forward(view());
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
      return s;
    };
    auto grads = [&] {
      layer.forward(view());
      const auto g = layer.backward(r);
      for (std::size_t i = 0; i < g.size(); ++i) in.grad[i] += g[i];
    };
    auto params = layer.parameters();
    params.push_back(&in);
    return gradient_check(loss, grads, params, {}, [&] {
      std::uint64_t h = 0;
      layer.fold_activation_pattern(h);
      return h;
    });
  };
  Conv2d<double> good("c", LayerSpec{LayerKind::Conv, 3, 2, 2, 3, Activation::LeakyRelu});
  good.initialize(1);
  const auto ok = check(good);
  EXPECT_TRUE(ok.passed(1e-4)) << ok.max_relative_error;
  EXPECT_GT(ok.coordinates, 50u);

  auto inner = std::make_unique<Conv2d<double>>("c", LayerSpec{LayerKind::Conv, 3, 2, 2, 3, Activation::LeakyRelu});
  inner->initialize(1);
  FaultyBackward<double> bad(std::move(inner), 1e-2);
  const auto res = check(bad);
  EXPECT_FALSE(res.passed(1e-4));
  EXPECT_GT(res.max_relative_error, 5e-3);
}

TEST(GradCheck, RelativeErrorUsesFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0, 1e-6), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0, 1e-6), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0, 1e-6), 1e-3);
}
