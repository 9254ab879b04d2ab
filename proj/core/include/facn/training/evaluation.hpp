#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "facn/imaging/degradation.hpp"
#include "facn/imaging/image.hpp"
#include "facn/model/generator.hpp"

namespace facn::training {

struct EvalPair {
  std::string name;
  imaging::Image lr;
  imaging::Image hr;
};

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_bicubic_psnr = 0.0;
  double mean_bicubic_ssim = 0.0;
  std::string degradation;
  std::string checkpoint;
  std::string config_hash;
};

/// Plain bicubic upsampling (no antialias), the interpolation baseline.
imaging::Image bicubic_baseline(const imaging::Image& lr, int scale);

/// Generator output for each LR image (eps = 0), quantized to 8 bits as if written to PNG.
std::vector<imaging::Image> super_resolve(model::Generator<float>& generator, const std::vector<imaging::Image>& lr,
                                          int batch_size = 16);

/// Y-channel PSNR/SSIM of the given outputs and of the bicubic baseline. Metrics are computed on
/// `threads` workers; row order follows `pairs`.
EvalReport evaluate_outputs(const std::vector<EvalPair>& pairs, const std::vector<imaging::Image>& outputs, int scale,
                            int threads = 1);
EvalReport evaluate(model::Generator<float>& generator, const std::vector<EvalPair>& pairs, int threads = 1);

/// Recomputes the aggregate means from the rows.
void summarize(EvalReport& report);

void write_report_csv(std::ostream& out, const EvalReport& report);

/// HR | LR (nearest) | bicubic | FACN, separated by white gutters.
imaging::Image comparison_grid(const imaging::Image& hr, const imaging::Image& lr, const imaging::Image& bicubic,
                               const imaging::Image& output);

}  // namespace facn::training
