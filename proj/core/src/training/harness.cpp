#include "facn/training/harness.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "facn/common/rng.hpp"
#include "facn/imaging/degradation.hpp"
#include "facn/nn/layers.hpp"

namespace facn::training {

namespace {

constexpr std::uint64_t kEvalStream = 21;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<EvalPair> make_eval_pairs(const TrainConfig& config, const std::vector<Sample>& samples,
                                      std::uint64_t seed) {
  std::vector<EvalPair> pairs;
  pairs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto spec = config.degradation_for(derive_seed(seed, {kEvalStream, static_cast<std::uint64_t>(i)}));
    pairs.push_back({samples[i].name, imaging::degrade(samples[i].hr, spec), samples[i].hr});
  }
  return pairs;
}

OverfitResult overfit_harness(const std::vector<Sample>& images, std::int64_t steps, TrainConfig config,
                              const Trainer::StepCallback& on_step) {
  if (images.empty() || images.size() > 16)
    throw std::invalid_argument("overfit_harness: needs between 1 and 16 images, got " + std::to_string(images.size()));
  if (steps < 0) throw std::invalid_argument("overfit_harness: steps must be >= 0");
  config.adversarial = false;
  config.batch_size = static_cast<int>(images.size());
  config.halving_epochs = std::numeric_limits<int>::max();
  config.epochs = std::numeric_limits<int>::max();
  config.max_steps = 0;

  const auto pairs = make_eval_pairs(config, images, config.seed);
  Trainer trainer(config);
  OverfitResult result;
  const auto before = evaluate(trainer.generator(), pairs);
  result.initial_psnr = before.mean_psnr;
  result.bicubic_psnr = before.mean_bicubic_psnr;

  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t s = 0; s < steps; ++s) {
    const StepMetrics m = trainer.train_step(images);
    result.losses.push_back(m.objective);
    if (on_step) on_step(m);
  }
  result.seconds = seconds_since(t0);
  result.steps = steps;
  if (!result.losses.empty()) {
    result.initial_loss = result.losses.front();
    result.final_loss = result.losses.back();
  }
  result.final_psnr = steps == 0 ? result.initial_psnr : evaluate(trainer.generator(), pairs).mean_psnr;
  return result;
}

std::vector<AblationCell> ablation_grid(const model::ModelConfig& base, const std::vector<model::Variant>& variants,
                                        const std::vector<int>& ks, const std::vector<int>& ds) {
  const std::vector<model::Variant> vs = variants.empty() ? std::vector<model::Variant>{base.variant} : variants;
  const std::vector<int> kk = ks.empty() ? std::vector<int>{base.k} : ks;
  const std::vector<int> dd = ds.empty() ? std::vector<int>{base.d} : ds;
  std::vector<AblationCell> cells;
  for (auto v : vs)
    for (int k : kk)
      for (int d : dd) {
        AblationCell cell;
        cell.model = base;
        cell.model.variant = v;
        cell.model.k = k;
        cell.model.d = d;
        if (base.pc_dim != 1) cell.model.pc_dim = d;
        cell.model.validate();
        cell.label = std::string(model::to_string(v)) + "_k" + std::to_string(k) + "_d" + std::to_string(d);
        cells.push_back(std::move(cell));
      }
  return cells;
}

std::vector<AblationRow> ablation_harness(const std::vector<AblationCell>& cells, const std::vector<Sample>& train,
                                          const std::vector<EvalPair>& eval, const TrainConfig& base,
                                          std::int64_t steps,
                                          const std::function<void(const AblationCell&, const StepMetrics&)>& on_step) {
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    TrainConfig config = base;
    config.model = cell.model;
    config.model.seed = base.seed;
    config.max_steps = steps;
    config.epochs = std::numeric_limits<int>::max();
    AblationRow row;
    row.label = cell.label;
    row.variant = cell.model.variant;
    row.k = cell.model.k;
    row.d = cell.model.d;
    row.decoder_input_width = cell.model.decoder_input_width();

    Trainer trainer(config);
    row.parameters = nn::parameter_count(trainer.generator().parameters());
    const auto t0 = std::chrono::steady_clock::now();
    try {
      trainer.fit(train, [&](const StepMetrics& m) {
        row.final_objective = m.objective;
        row.steps = m.step;
        if (on_step) on_step(cell, m);
      });
    } catch (const TrainingDiverged& e) {
      row.diverged = true;
      row.error = e.what();
    }
    row.seconds = seconds_since(t0);
    if (!row.diverged && !eval.empty()) {
      const auto report = evaluate(trainer.generator(), eval);
      row.psnr = report.mean_psnr;
      row.ssim = report.mean_ssim;
      row.bicubic_psnr = report.mean_bicubic_psnr;
      row.bicubic_ssim = report.mean_bicubic_ssim;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_report(std::ostream& out, const std::vector<AblationRow>& rows, const TrainConfig& base,
                           std::int64_t steps) {
  const auto old = out.precision(10);
  out << "# facn ablation report\n";
  out << "# degradation = " << imaging::to_string(base.degradation.kind) << "\n";
  out << "# steps = " << steps << "\n";
  out << "# seed = " << base.seed << "\n";
  out << "# hr_size = " << base.model.hr_size << "\n";
  out << "label,variant,k,d,decoder_input_width,parameters,steps,final_objective,diverged,psnr,ssim,bicubic_psnr,"
         "bicubic_ssim,seconds\n";
  for (const auto& r : rows)
    out << r.label << ',' << model::to_string(r.variant) << ',' << r.k << ',' << r.d << ',' << r.decoder_input_width
        << ',' << r.parameters << ',' << r.steps << ',' << r.final_objective << ',' << (r.diverged ? 1 : 0) << ','
        << r.psnr << ',' << r.ssim << ',' << r.bicubic_psnr << ',' << r.bicubic_ssim << ',' << r.seconds << '\n';
  out.precision(old);
}

}  // namespace facn::training
