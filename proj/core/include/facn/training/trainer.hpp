#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "facn/adversarial/discriminator.hpp"
#include "facn/model/generator.hpp"
#include "facn/model/loss.hpp"
#include "facn/nn/adam.hpp"
#include "facn/nn/checkpoint.hpp"
#include "facn/training/config_file.hpp"
#include "facn/training/dataset.hpp"

namespace facn::training {

/// base * 0.5^floor(epoch / period).
double lr_schedule(int epoch, double base, int period = 20);

struct StepMetrics {
  std::int64_t step = 0;  ///< 1-based index of the step just taken
  int epoch = 0;
  double learning_rate = 0.0;
  model::GeneratorLossTerms generator;
  double adversarial = 0.0;
  double perceptual = 0.0;
  double objective = 0.0;  ///< generator loss plus the weighted GAN terms
  double discriminator = 0.0;
  double generator_grad_norm = 0.0;
  double discriminator_grad_norm = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::string snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const noexcept { return snapshot_; }

 private:
  std::string snapshot_;
};

struct Batch {
  nn::Tensor<float> hr;
  nn::Tensor<float> lr;
  nn::Tensor<float> labels;
};

/// LR images are degraded on the fly with a per-(step, slot) noise seed.
Batch make_batch(const TrainConfig& config, std::span<const Sample* const> samples, std::int64_t step);

/// Owns the networks and optimizer state of one run. Every random draw is derived from
/// (seed, step), so a run restored from a checkpoint continues exactly.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  std::int64_t step() const noexcept { return step_; }
  int steps_per_epoch(std::size_t dataset_size) const;
  int epoch_of(std::int64_t step, std::size_t dataset_size) const;

  /// Sample indices of the batch used at `step` (0-based): a seeded permutation per epoch.
  std::vector<std::size_t> batch_indices(std::int64_t step, std::size_t dataset_size) const;

  /// One discriminator step (when enabled) then one generator step on the next batch of `data`.
  StepMetrics train_step(const std::vector<Sample>& data);
  /// Same, on an explicit batch; `epoch` selects the learning rate.
  StepMetrics train_step(const Batch& batch, int epoch);

  using StepCallback = std::function<void(const StepMetrics&)>;
  /// Trains until config.epochs (or config.max_steps) is reached.
  void fit(const std::vector<Sample>& data, const StepCallback& on_step = {},
           const std::function<void(int epoch)>& on_epoch_end = {});

  model::Generator<float>& generator() noexcept { return *generator_; }
  adversarial::Discriminator<float>* discriminator() noexcept { return discriminator_.get(); }

  nn::Checkpoint checkpoint() const;
  void restore(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& dir) const;
  static Trainer resume(const std::filesystem::path& dir);

 private:
  StepMetrics step_impl(const Batch& batch, int epoch);

  TrainConfig config_;
  std::unique_ptr<model::Generator<float>> generator_;
  std::unique_ptr<adversarial::Discriminator<float>> discriminator_;
  std::unique_ptr<nn::Adam> g_opt_;
  std::unique_ptr<nn::Adam> d_opt_;
  std::int64_t step_ = 0;
};

/// Generator parameters restored from a trainer checkpoint (for evaluation).
model::Generator<float> load_generator(const std::filesystem::path& checkpoint_dir, TrainConfig* config = nullptr);

/// CSV with a '#' header block; one row per step.
void write_metrics_header(std::ostream& out, const TrainConfig& config);
void write_metrics_row(std::ostream& out, const StepMetrics& m);

}  // namespace facn::training
