#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "facn/model/capsules.hpp"
#include "facn/model/routing.hpp"
#include "oracles.hpp"

using namespace facn;
using namespace facn::model;

namespace {

Tensor<double> uniform(nn::Shape s, std::mt19937_64& rng, double lo, double hi) {
  Tensor<double> t(s);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

double kl_monte_carlo(double mu, double var, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double z = mu + sd * n(rng);
    const double log_q = -0.5 * std::log(2 * M_PI * var) - (z - mu) * (z - mu) / (2 * var);
    const double log_p = -0.5 * std::log(2 * M_PI) - z * z / 2;
    acc += log_q - log_p;
  }
  return acc / samples;
}

}  // namespace

TEST(Kl, MatchesMonteCarlo) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mag(0.5, 2.0), lv(std::log(0.25), std::log(4.0));
  for (int draw = 0; draw < 5; ++draw) {
    const double mu = (rng() & 1 ? 1 : -1) * mag(rng);
    const double logvar = lv(rng);
    const double closed = kl_divergence({mu}, {logvar});
    EXPECT_NEAR(kl_monte_carlo(mu, std::exp(logvar), 400000, rng()), closed, 0.02 * closed) << mu << " " << logvar;
  }
}

TEST(Kl, ZeroAtPriorAndNonNegative) {
  EXPECT_NEAR(kl_divergence({0.0, 0.0}, {0.0, 0.0}), 0.0, 1e-12);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto mu = uniform({1, 6, 1, 1}, rng, -3, 3);
    const auto lv = uniform({1, 6, 1, 1}, rng, -5, 5);
    EXPECT_GE(kl_divergence(mu, lv)[0], 0.0);
  }
}

TEST(Kl, SumsOverFeaturesPerSample) {
  Tensor<double> mu({2, 2, 1, 1}, {1.0, 0.0, 0.0, 2.0});
  Tensor<double> lv({2, 2, 1, 1}, {0.0, std::log(2.0), 0.0, 0.0});
  const auto kl = kl_divergence(mu, lv);
  EXPECT_NEAR(kl[0], 0.5 + 0.5 * (2.0 - 1.0 - std::log(2.0)), 1e-12);
  EXPECT_NEAR(kl[1], 2.0, 1e-12);
}

// Scale invariance, mask annihilation and unit norm scaled by the attribute value
// over random batches of capsules.
TEST(SemanticCapsules, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8), d = 1 + static_cast<int>(rng() % 6), n = 1 + static_cast<int>(rng() % 3);
    const auto primary = uniform({n, k * d, 1, 1}, rng, -2, 2);
    auto att = uniform({n, k, 1, 1}, rng, 0, 1);
    att[0] = 0.0;
    const double c = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
    Tensor<double> scaled = primary;
    for (auto& v : scaled.values()) v *= c;
    const auto a = activate_semantic(primary, att, d);
    const auto b = activate_semantic(scaled, att, d);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
    for (int j = 0; j < d; ++j) EXPECT_EQ(a[j], 0.0);
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < k; ++i) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += a[(s * k + i) * d + j] * a[(s * k + i) * d + j];
        EXPECT_NEAR(std::sqrt(sq), att[s * k + i], 1e-9);
      }
  }
}

TEST(Reparameterize, ZeroNoiseReturnsMeanExactly) {
  std::mt19937_64 rng(3);
  const auto mu = uniform({3, 10, 1, 1}, rng, -2, 2);
  const auto lv = uniform({3, 10, 1, 1}, rng, -4, 4);
  const auto out = reparameterize(mu, lv, Tensor<double>(mu.shape(), 0.0));
  for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_EQ(out[i], mu[i]);
}

TEST(Reparameterize, SampleMoments) {
  const int n = 100000;
  Tensor<double> mu({n, 1, 1, 1}, 1.5), lv({n, 1, 1, 1}, std::log(0.64)), eps({n, 1, 1, 1});
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (auto& v : eps.values()) v = g(rng);
  const auto cp = reparameterize(mu, lv, eps);
  double m = 0.0, sq = 0.0;
  for (double v : cp.values()) m += v;
  m /= n;
  for (double v : cp.values()) sq += (v - m) * (v - m);
  EXPECT_NEAR(m, 1.5, 0.03 * 1.5);
  EXPECT_NEAR(sq / n, 0.64, 0.03 * 0.64);
}

TEST(CapsuleBlock, ShiftClampAndAssembly) {
  Tensor<double> mu({1, 4, 1, 1}, {0.0, 1.0, 2.0, 3.0});
  Tensor<double> att({1, 2, 1, 1}, {0.5, -1.0});
  const auto shifted = shift_mean(mu, att, 2);
  EXPECT_EQ(std::vector<double>(shifted.values().begin(), shifted.values().end()), (std::vector<double>{0.5, 1.5, 1.0, 2.0}));
  Tensor<double> raw({1, 3, 1, 1}, {-20.0, 3.0, 11.0});
  const auto cl = clamp_logvar(raw);
  EXPECT_EQ(cl[0], -kLogVarianceLimit);
  EXPECT_EQ(cl[1], 3.0);
  EXPECT_EQ(cl[2], kLogVarianceLimit);
  Tensor<double> sc({1, 4, 1, 1}, {1, 2, 3, 4}), pc({1, 2, 1, 1}, {9, 8});
  const auto fac = assemble_fac(sc, pc, 2, 2, 1);
  EXPECT_EQ(std::vector<double>(fac.values().begin(), fac.values().end()), (std::vector<double>{1, 2, 9, 3, 4, 8}));
  const auto [s2, p2] = split_fac(fac, 2, 2, 1);
  EXPECT_EQ(s2.values()[3], 4.0);
  EXPECT_EQ(p2.values()[1], 8.0);
}

TEST(Squash, ShrinksNormBelowOne) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s(4);
    for (auto& v : s) v = g(rng);
    double q = 0.0;
    for (double v : s) q += v * v;
    const auto v = squash(s);
    double vn = 0.0;
    for (double x : v) vn += x * x;
    EXPECT_NEAR(std::sqrt(vn), q / (1 + q) * std::sqrt(q) / std::sqrt(q + kSquashEpsilon), 1e-12);
    EXPECT_LT(vn, 1.0);
  }
}

// Two input capsules, two output capsules, two iterations, traced by hand:
// u0 = (1,0), u1 = (0,1), every W = I except W[1][1] = 2I.
TEST(Routing, HandTracedTwoByTwo) {
  const RoutingProblem p{2, 2, 2, 2, 2};
  const std::vector<double> u{1, 0, 0, 1};
  std::vector<double> w(16, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int a = 0; a < 2; ++a) w[((i * 2 + j) * 2 + a) * 2 + a] = (i == 1 && j == 1) ? 2.0 : 1.0;
  RoutingTrace trace;
  const auto v = dynamic_routing(p, u, w, &trace);
  const std::vector<double> expected{0.21751005, 0.13968698, 0.23506432, 0.63620531};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i], expected[i], 1e-7);
  ASSERT_EQ(trace.outputs.size(), 2u);
  EXPECT_NEAR(trace.outputs[0][0], 0.23570226, 1e-7);
  EXPECT_NEAR(trace.outputs[0][3], 0.49690399, 1e-7);
  EXPECT_NEAR(trace.coupling[1][0], 1.0 / (1.0 + std::exp(0.24845200 - 0.23570226)), 1e-7);
}

TEST(Routing, MatchesLoopOracleOnRandomShapes) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const RoutingProblem p{1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 5),
                           1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4)};
    std::vector<double> u(p.in_caps * p.in_dim), w(p.in_caps * p.out_caps * p.out_dim * p.in_dim);
    for (auto& x : u) x = g(rng);
    for (auto& x : w) x = g(rng);
    const auto got = dynamic_routing(p, u, w);
    const auto want = oracle::routing(p.in_caps, p.in_dim, p.out_caps, p.out_dim, p.iterations, u, w);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Routing, LayerShapes) {
  CapsuleRouting<double> layer("routing", 4 * 2 * 2, 8, 64, 4, 3);
  layer.initialize(1);
  Tensor<double> x({2, 4, 2, 2});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (auto& v : x.values()) v = g(rng);
  const auto y = layer.forward(x);
  EXPECT_EQ(y.shape(), (nn::Shape{2, 256, 1, 1}));
  EXPECT_EQ(layer.problem().in_caps, 2);
  EXPECT_THROW(CapsuleRouting<double>("bad", 10, 4, 2, 2, 3), std::invalid_argument);
}
