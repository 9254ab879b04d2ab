// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: facn_acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "facn/common/rng.hpp"
#include "facn/imaging/degradation.hpp"
#include "facn/imaging/metrics.hpp"
#include "facn/model/capsules.hpp"
#include "facn/model/routing.hpp"
#include "facn/training/gradient_suite.hpp"
#include "facn/training/harness.hpp"
#include "facn/training/synthetic_faces.hpp"
#include "facn/training/trainer.hpp"
#include "oracles.hpp"

using namespace facn;
using namespace facn::training;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Sample> synthetic_faces(int count, int size, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SyntheticFace f = render_synthetic_face(derive_seed(seed, {static_cast<std::uint64_t>(i)}), size);
    out.push_back({"face_" + std::to_string(i), std::move(f.image), std::move(f.attributes)});
  }
  return out;
}

// Desk-scale sizes: the CPU budget rules out the 128 model for the training criteria.
constexpr int kOverfitSize = 32;
constexpr int kTrainedSize = 32;
constexpr std::int64_t kTrainedSteps = 2000;
constexpr int kAblationSize = 32;

TrainConfig desk_config(int hr_size) {
  TrainConfig c;
  c.dataset_dir = "synthetic";
  c.model.hr_size = hr_size;
  c.seed = 1;
  c.model.seed = 1;
  return c;
}

// 1. Finite-difference gradient suite.
void gradient_suite(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = run_gradient_suite("all");
  const double secs = seconds_since(t0);
  double worst = 0.0;
  int failed = 0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.result.max_relative_error);
    if (!e.passed(1e-4)) {
      ++failed;
      o.detail << " " << e.scope << "/" << e.name << "=" << e.result.max_relative_error;
    }
  }
  o.detail << " checks=" << entries.size() << " max_rel_err=" << worst << " seconds=" << secs;
  o.require(!entries.empty() && failed == 0, std::to_string(failed) + " checks above 1e-4");
  o.require(secs < 300.0, "runtime >= 5 min");
}

// 2. Closed-form KL against Monte Carlo.
void kl_oracle(Outcome& o) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> mag(0.5, 2.0), lv(std::log(0.25), std::log(4.0));
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const double mu = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
    const double logvar = lv(rng);
    const double var = std::exp(logvar), sd = std::sqrt(var);
    double acc = 0.0;
    const int samples = 1000000;
    for (int i = 0; i < samples; ++i) {
      const double z = mu + sd * normal(rng);
      const double log_q = -0.5 * std::log(2 * M_PI * var) - (z - mu) * (z - mu) / (2 * var);
      const double log_p = -0.5 * std::log(2 * M_PI) - z * z / 2;
      acc += log_q - log_p;
    }
    const double mc = acc / samples;
    const double closed = model::kl_divergence({mu}, {logvar});
    worst = std::max(worst, std::abs(mc - closed) / closed);
  }
  const double at_prior = model::kl_divergence({0.0}, {0.0});
  o.detail << " draws=20 max_rel_dev=" << worst << " kl(0,1)=" << at_prior;
  o.require(worst < 0.01, "Monte Carlo deviation >= 1%");
  o.require(std::abs(at_prior) < 1e-9, "KL at the prior is not 0");
}

// 3. Semantic and probabilistic capsule invariants.
void capsule_invariants(Outcome& o) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-2.0, 2.0), unit(0.0, 1.0), logc(-4.0, 4.0);
  double scale_dev = 0.0, annihilated = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 16), d = 1 + static_cast<int>(rng() % 8);
    nn::Tensor<double> primary({2, k * d, 1, 1}), att({2, k, 1, 1});
    for (auto& v : primary.values()) v = u(rng);
    for (auto& v : att.values()) v = unit(rng);
    const int dead = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    att[dead] = 0.0;
    nn::Tensor<double> scaled = primary;
    const double c = std::exp(logc(rng));
    for (auto& v : scaled.values()) v *= c;
    const auto a = model::activate_semantic(primary, att, d);
    const auto b = model::activate_semantic(scaled, att, d);
    for (std::size_t i = 0; i < a.size(); ++i) scale_dev = std::max(scale_dev, std::abs(a[i] - b[i]));
    for (int j = 0; j < d; ++j) annihilated = std::max(annihilated, std::abs(a[dead * d + j]));
  }

  nn::Tensor<double> mu({4, 16, 1, 1}), logvar({4, 16, 1, 1});
  for (auto& v : mu.values()) v = u(rng);
  for (auto& v : logvar.values()) v = u(rng);
  const auto mean_only = model::reparameterize(mu, logvar, nn::Tensor<double>(mu.shape(), 0.0));
  bool exact = true;
  for (std::size_t i = 0; i < mu.size(); ++i) exact = exact && mean_only[i] == mu[i];

  const int n = 100000;
  const double m0 = 0.7, var0 = 1.8;
  nn::Tensor<double> mus({n, 1, 1, 1}, m0), lvs({n, 1, 1, 1}, std::log(var0)), eps({n, 1, 1, 1});
  std::normal_distribution<double> normal;
  for (auto& v : eps.values()) v = normal(rng);
  const auto cp = model::reparameterize(mus, lvs, eps);
  double mean = 0.0, var = 0.0;
  for (double v : cp.values()) mean += v;
  mean /= n;
  for (double v : cp.values()) var += (v - mean) * (v - mean);
  var /= n;

  o.detail << " scale_dev=" << scale_dev << " annihilated_max=" << annihilated << " eps0_exact=" << exact
           << " mean=" << mean << " var=" << var;
  o.require(scale_dev <= 1e-6, "scale invariance");
  o.require(annihilated == 0.0, "mask annihilation");
  o.require(exact, "eps = 0 does not return the mean");
  o.require(std::abs(mean - m0) <= 0.03 * m0 && std::abs(var - var0) <= 0.03 * var0, "sample moments");
}

// 4. Degradation pipeline.
void degradation_contract(Outcome& o) {
  using imaging::DegradationKind;
  using imaging::DegradationSpec;
  const imaging::Image hr = oracle::random_image(128, 128, 3, 4);
  bool shapes = true;
  for (auto kind : {DegradationKind::Bic, DegradationKind::BicN, DegradationKind::BBicN}) {
    const auto lr = imaging::degrade(hr, DegradationSpec::make(kind, 5));
    shapes = shapes && lr.height() == 16 && lr.width() == 16 && lr.channels() == 3;
  }

  double worst_noise = 0.0;
  for (double level : {10.0, 30.0}) {
    const imaging::Image flat(256, 256, 1, 0.5f);
    const imaging::Image noisy = imaging::add_gaussian_noise(flat, level, 19);
    double sum = 0.0, sq = 0.0;
    for (float v : noisy.data()) {
      sum += v - 0.5;
      sq += (v - 0.5) * (v - 0.5);
    }
    const double cnt = static_cast<double>(noisy.size());
    const double sd = std::sqrt(sq / cnt - (sum / cnt) * (sum / cnt));
    worst_noise = std::max(worst_noise, std::abs(sd - level / 255.0) / (level / 255.0));
  }

  double constant_dev = 0.0;
  const imaging::Image grey(128, 128, 3, 0.3f);
  for (auto kind : {DegradationKind::Bic, DegradationKind::BicN, DegradationKind::BBicN}) {
    auto spec = DegradationSpec::make(kind, 8);
    spec.noise_level = 0.0;
    const imaging::Image lr = imaging::degrade(grey, spec);
    for (float v : lr.data()) constant_dev = std::max(constant_dev, std::abs(v - 0.3));
  }

  bool identical = true;
  for (auto kind : {DegradationKind::BicN, DegradationKind::BBicN}) {
    const auto spec = DegradationSpec::make(kind, 1234);
    identical = identical && imaging::degrade(hr, spec) == imaging::degrade(hr, spec);
  }

  double oracle_dev = 0.0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const imaging::Image img = oracle::random_image(128, 128, 3, 100 + i);
    const auto lr = imaging::degrade(img, DegradationSpec::make(DegradationKind::Bic));
    imaging::Image ref = oracle::resize(img, 16, 16, true);
    ref.clamp01();
    for (std::size_t j = 0; j < lr.size(); ++j)
      oracle_dev = std::max(oracle_dev, static_cast<double>(std::abs(lr.data()[j] - ref.data()[j])));
  }

  o.detail << " shapes=" << shapes << " noise_rel_dev=" << worst_noise << " constant_dev=" << constant_dev
           << " reruns_identical=" << identical << " bicubic_oracle_dev=" << oracle_dev;
  o.require(shapes, "128 -> 16 shape");
  o.require(worst_noise <= 0.03, "noise std");
  o.require(constant_dev <= 1e-6, "constant preservation");
  o.require(identical, "byte-identical reruns");
  o.require(oracle_dev <= 1e-5, "bicubic oracle");
}

// 5. PSNR and SSIM closed forms.
void metric_oracle(Outcome& o) {
  const imaging::Image a(32, 32, 1, 100.0f / 255.0f), b(32, 32, 1, 101.0f / 255.0f);
  const double p1 = imaging::psnr(a, b);
  const double p0 = imaging::psnr(imaging::Image(16, 16, 1, 0.0f), imaging::Image(16, 16, 1, 1.0f));
  const imaging::Image face = render_synthetic_face(3, 64).image;
  const double self = imaging::ssim(face, face);
  // Constant images: SSIM reduces to the luminance term (2 m1 m2 + C1) / (m1^2 + m2^2 + C1).
  const double m1 = 100.0, m2 = 150.0, c1 = (0.01 * 255) * (0.01 * 255);
  const double expected = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
  const double constant =
      imaging::ssim(imaging::Image(32, 32, 1, static_cast<float>(m1 / 255.0)), imaging::Image(32, 32, 1, static_cast<float>(m2 / 255.0)));
  o.detail << " psnr_err1=" << p1 << " psnr_err255=" << p0 << " ssim_self=" << self << " ssim_const=" << constant
           << " expected=" << expected;
  o.require(std::abs(p1 - 48.1308) <= 1e-3, "48.1308 dB case");
  o.require(std::abs(p0) <= 1e-3, "0 dB case");
  o.require(std::abs(self - 1.0) <= 1e-9, "self SSIM");
  o.require(std::abs(constant - expected) <= 1e-6, "constant SSIM");
}

// 6. Overfitting two images.
void overfit(Outcome& o) {
  TrainConfig c = desk_config(kOverfitSize);
  c.degradation = imaging::DegradationSpec::make(imaging::DegradationKind::Bic);
  c.adam.beta1 = 0.9;
  const auto images = synthetic_faces(2, c.model.hr_size, 7);
  const OverfitResult r = overfit_harness(images, 2000, c);
  o.detail << " hr=" << c.model.hr_size << " steps=" << r.steps << " psnr " << r.initial_psnr << " -> " << r.final_psnr
           << " (bicubic " << r.bicubic_psnr << ") loss " << r.initial_loss << " -> " << r.final_loss
           << " seconds=" << r.seconds;
  o.require(r.final_psnr > 30.0, "train PSNR <= 30 dB");
  o.require(r.seconds <= 900.0, "over 15 minutes");
  o.require(r.final_loss < r.initial_loss, "loss did not decrease");
}

// 7. A trained model beats bicubic upsampling.
void trained_model(Outcome& o) {
  TrainConfig c = desk_config(kTrainedSize);
  c.degradation = imaging::DegradationSpec::make(imaging::DegradationKind::BicN);
  c.adversarial = false;
  c.learning_rate = 1e-3;
  c.adam.beta1 = 0.9;
  c.halving_epochs = 100;
  c.max_steps = kTrainedSteps;
  c.epochs = 1000000;
  const auto images = synthetic_faces(200, c.model.hr_size, 17);
  Trainer trainer(c);
  const auto t0 = std::chrono::steady_clock::now();
  trainer.fit(images);
  const double secs = seconds_since(t0);
  const auto report = evaluate(trainer.generator(), make_eval_pairs(c, images, 99));
  const double gain = report.mean_psnr - report.mean_bicubic_psnr;
  o.detail << " hr=" << c.model.hr_size << " images=200 steps=" << trainer.step() << " facn=" << report.mean_psnr
           << " bicubic=" << report.mean_bicubic_psnr << " gain=" << gain << " seconds=" << secs;
  o.require(gain >= 1.0, "gain over bicubic < 1 dB");
}

// 8. Ablation variants.
void ablation(Outcome& o) {
  TrainConfig c = desk_config(kAblationSize);
  c.batch_size = 4;
  const auto images = synthetic_faces(16, c.model.hr_size, 27);
  const auto cells = ablation_grid(c.model, {model::Variant::V1, model::Variant::V2, model::Variant::V3, model::Variant::Full}, {}, {});
  const auto rows = ablation_harness(cells, images, {}, c, 500);
  const int expected_width[] = {256, 64, 256, 320};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    o.detail << " " << model::to_string(r.variant) << ":width=" << r.decoder_input_width << ",steps=" << r.steps
             << ",objective=" << r.final_objective;
    o.require(!r.diverged && r.steps == 500 && std::isfinite(r.final_objective), std::string(model::to_string(r.variant)) + " did not finish");
    o.require(r.decoder_input_width == expected_width[i], std::string(model::to_string(r.variant)) + " width");
  }
  o.require(rows.size() == 4, "four variants");

  // Two input capsules u0 = (1,0), u1 = (0,1); every W = I except W[1][1] = 2I; two iterations.
  const model::RoutingProblem p{2, 2, 2, 2, 2};
  std::vector<double> w(16, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int a = 0; a < 2; ++a) w[((i * 2 + j) * 2 + a) * 2 + a] = (i == 1 && j == 1) ? 2.0 : 1.0;
  const auto v = model::dynamic_routing(p, {1, 0, 0, 1}, w);
  const double traced[] = {0.21751005, 0.13968698, 0.23506432, 0.63620531};
  double dev = 0.0;
  for (int i = 0; i < 4; ++i) dev = std::max(dev, std::abs(v[i] - traced[i]));
  o.detail << " routing_dev=" << dev;
  o.require(dev < 1e-7, "routing hand trace");
}

// 9. Checkpoint round trip.
void checkpoint_roundtrip(Outcome& o) {
  TrainConfig c = desk_config(32);
  c.model.width = 16;
  c.batch_size = 2;
  c.disc_width = 16;
  c.disc_hidden = 32;
  c.degradation = imaging::DegradationSpec::make(imaging::DegradationKind::BicN);
  const auto images = synthetic_faces(6, 32, 37);

  Trainer straight(c);
  std::vector<double> expected;
  for (int s = 0; s < 10; ++s) {
    const auto m = straight.train_step(images);
    expected.push_back(m.objective);
    expected.push_back(m.discriminator);
  }

  const auto dir = std::filesystem::temp_directory_path() / "facn_acceptance_ckpt";
  std::filesystem::remove_all(dir);
  std::vector<double> got;
  {
    Trainer first(c);
    for (int s = 0; s < 5; ++s) {
      const auto m = first.train_step(images);
      got.push_back(m.objective);
      got.push_back(m.discriminator);
    }
    first.save(dir);
  }
  Trainer resumed = Trainer::resume(dir);
  for (int s = 0; s < 5; ++s) {
    const auto m = resumed.train_step(images);
    got.push_back(m.objective);
    got.push_back(m.discriminator);
  }
  std::filesystem::remove_all(dir);
  int mismatches = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) mismatches += expected[i] != got[i];
  o.detail << " steps=10 resumed_at=5 mismatches=" << mismatches << " final_objective=" << got[18];
  o.require(mismatches == 0, "resumed losses differ");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient suite", gradient_suite},
      {"KL oracle", kl_oracle},
      {"capsule invariants", capsule_invariants},
      {"degradation contract", degradation_contract},
      {"metric oracle", metric_oracle},
      {"overfit sanity", overfit},
      {"trained-model sanity", trained_model},
      {"ablation harness", ablation},
      {"checkpoint round trip", checkpoint_roundtrip},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%.1fs)%s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
