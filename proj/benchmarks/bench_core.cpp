#include <benchmark/benchmark.h>

#include <random>

#include "facn/imaging/degradation.hpp"
#include "facn/imaging/metrics.hpp"
#include "facn/imaging/resample.hpp"
#include "facn/nn/layers.hpp"
#include "facn/training/synthetic_faces.hpp"
#include "facn/training/trainer.hpp"

using namespace facn;

namespace {

nn::Tensor<float> noise(nn::Shape s, std::uint64_t seed) {
  nn::Tensor<float> t(s);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// args: spatial extent, stride
void BM_ConvForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0)), stride = static_cast<int>(state.range(1));
  nn::Conv2d<float> conv("c", nn::LayerSpec{nn::LayerKind::Conv, 3, stride, 64, 64, nn::Activation::LeakyRelu});
  conv.initialize(1);
  const auto x = noise({4, 64, size, size}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_ConvForward)->Args({32, 1})->Args({64, 1})->Args({64, 2})->Unit(benchmark::kMillisecond);

void BM_ConvBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  nn::Conv2d<float> conv("c", nn::LayerSpec{nn::LayerKind::Conv, 3, 1, 64, 64, nn::Activation::LeakyRelu});
  conv.initialize(1);
  const auto x = noise({4, 64, size, size}, 2);
  const auto y = conv.forward(x);
  const auto g = noise(y.shape(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
}
BENCHMARK(BM_ConvBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// arg: HR size
void BM_GeneratorStep(benchmark::State& state) {
  training::TrainConfig c;
  c.dataset_dir = "bench";
  c.model.hr_size = static_cast<int>(state.range(0));
  c.adversarial = false;
  c.batch_size = 2;
  c.degradation = imaging::DegradationSpec::make(imaging::DegradationKind::Bic);
  std::vector<training::Sample> data;
  for (int i = 0; i < 2; ++i) {
    auto f = training::render_synthetic_face(i + 1, c.model.hr_size);
    data.push_back({"f", f.image, f.attributes});
  }
  training::Trainer trainer(c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(data));
}
BENCHMARK(BM_GeneratorStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_AdversarialStep(benchmark::State& state) {
  training::TrainConfig c;
  c.dataset_dir = "bench";
  c.model.hr_size = 64;
  c.batch_size = 2;
  std::vector<training::Sample> data;
  for (int i = 0; i < 2; ++i) {
    auto f = training::render_synthetic_face(i + 1, 64);
    data.push_back({"f", f.image, f.attributes});
  }
  training::Trainer trainer(c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(data));
}
BENCHMARK(BM_AdversarialStep)->Unit(benchmark::kMillisecond);

void BM_Degrade(benchmark::State& state) {
  const auto hr = training::render_synthetic_face(4, 128).image;
  const auto kind = static_cast<imaging::DegradationKind>(state.range(0));
  const auto spec = imaging::DegradationSpec::make(kind, 9);
  for (auto _ : state) benchmark::DoNotOptimize(imaging::degrade(hr, spec));
}
BENCHMARK(BM_Degrade)
    ->Arg(static_cast<int>(imaging::DegradationKind::Bic))
    ->Arg(static_cast<int>(imaging::DegradationKind::BBicN))
    ->Unit(benchmark::kMicrosecond);

void BM_BicubicUpscale(benchmark::State& state) {
  const auto lr = training::render_synthetic_face(5, 16).image;
  for (auto _ : state) benchmark::DoNotOptimize(imaging::bicubic_resize(lr, 128, 128, false));
}
BENCHMARK(BM_BicubicUpscale)->Unit(benchmark::kMicrosecond);

void BM_Ssim(benchmark::State& state) {
  const auto a = training::render_synthetic_face(6, 128).image;
  const auto b = training::render_synthetic_face(7, 128).image;
  for (auto _ : state) benchmark::DoNotOptimize(imaging::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
