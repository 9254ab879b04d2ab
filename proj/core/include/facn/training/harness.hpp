#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "facn/model/config.hpp"
#include "facn/training/config_file.hpp"
#include "facn/training/dataset.hpp"
#include "facn/training/evaluation.hpp"
#include "facn/training/trainer.hpp"

namespace facn::training {

/// Pre-baked LR/HR pairs: each LR is degraded once with a fixed per-image seed.
std::vector<EvalPair> make_eval_pairs(const TrainConfig& config, const std::vector<Sample>& samples,
                                      std::uint64_t seed);

struct OverfitResult {
  double initial_psnr = 0.0;  ///< before any step
  double final_psnr = 0.0;
  double bicubic_psnr = 0.0;
  double initial_loss = 0.0;  ///< objective of the first step
  double final_loss = 0.0;    ///< objective of the last step
  std::int64_t steps = 0;
  double seconds = 0.0;
  std::vector<double> losses;
};

/// Trains with the GAN disabled on at most 16 images (all of them in every batch, constant
/// learning rate) and reports the mean Y-PSNR on those same images.
OverfitResult overfit_harness(const std::vector<Sample>& images, std::int64_t steps, TrainConfig config,
                              const Trainer::StepCallback& on_step = {});

struct AblationCell {
  std::string label;
  model::ModelConfig model;
};

/// Cross product of the given variants, capsule counts and dimensions; an empty list keeps the base value.
std::vector<AblationCell> ablation_grid(const model::ModelConfig& base, const std::vector<model::Variant>& variants,
                                        const std::vector<int>& ks, const std::vector<int>& ds);

struct AblationRow {
  std::string label;
  model::Variant variant = model::Variant::Full;
  int k = 0;
  int d = 0;
  int decoder_input_width = 0;
  std::size_t parameters = 0;
  std::int64_t steps = 0;
  double final_objective = 0.0;
  bool diverged = false;
  std::string error;
  double psnr = 0.0;
  double ssim = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
  double seconds = 0.0;
};

/// Trains every cell from the same seed for the same number of steps, then evaluates on `eval`.
std::vector<AblationRow> ablation_harness(const std::vector<AblationCell>& cells, const std::vector<Sample>& train,
                                          const std::vector<EvalPair>& eval, const TrainConfig& base,
                                          std::int64_t steps,
                                          const std::function<void(const AblationCell&, const StepMetrics&)>& on_step = {});

void write_ablation_report(std::ostream& out, const std::vector<AblationRow>& rows, const TrainConfig& base,
                           std::int64_t steps);

}  // namespace facn::training
