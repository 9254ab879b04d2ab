#include "facn/training/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "facn/imaging/metrics.hpp"
#include "facn/imaging/resample.hpp"
#include "facn/nn/tensor.hpp"

namespace facn::training {

imaging::Image bicubic_baseline(const imaging::Image& lr, int scale) {
  imaging::Image up = imaging::bicubic_resize(lr, lr.height() * scale, lr.width() * scale, false);
  up.clamp01();
  return imaging::quantize8(up);
}

std::vector<imaging::Image> super_resolve(model::Generator<float>& generator, const std::vector<imaging::Image>& lr,
                                          int batch_size) {
  std::vector<imaging::Image> out;
  out.reserve(lr.size());
  for (std::size_t begin = 0; begin < lr.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(lr.size(), begin + static_cast<std::size_t>(batch_size));
    const auto x = nn::to_tensor<float>(std::span<const imaging::Image>(lr.data() + begin, end - begin));
    const auto y = generator.forward(x, nullptr).output;
    for (int i = 0; i < y.n(); ++i) {
      imaging::Image img = nn::to_image(y, i);
      img.clamp01();
      out.push_back(imaging::quantize8(img));
    }
  }
  return out;
}

void summarize(EvalReport& report) {
  double p = 0, s = 0, bp = 0, bs = 0;
  for (const auto& r : report.rows) {
    p += r.psnr;
    s += r.ssim;
    bp += r.bicubic_psnr;
    bs += r.bicubic_ssim;
  }
  const double n = report.rows.empty() ? 1.0 : static_cast<double>(report.rows.size());
  report.mean_psnr = p / n;
  report.mean_ssim = s / n;
  report.mean_bicubic_psnr = bp / n;
  report.mean_bicubic_ssim = bs / n;
}

EvalReport evaluate_outputs(const std::vector<EvalPair>& pairs, const std::vector<imaging::Image>& outputs, int scale,
                            int threads) {
  if (pairs.size() != outputs.size()) throw std::invalid_argument("evaluate: one output per pair is required");
  EvalReport report;
  report.rows.resize(pairs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      const auto& p = pairs[i];
      if (!p.hr.same_shape(outputs[i]))
        throw std::invalid_argument("evaluate: output for '" + p.name + "' does not match its HR image");
      const imaging::Image bic = bicubic_baseline(p.lr, scale);
      report.rows[i] = {p.name, imaging::psnr(p.hr, outputs[i]), imaging::ssim(p.hr, outputs[i]),
                        imaging::psnr(p.hr, bic), imaging::ssim(p.hr, bic)};
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          work();
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  summarize(report);
  return report;
}

EvalReport evaluate(model::Generator<float>& generator, const std::vector<EvalPair>& pairs, int threads) {
  std::vector<imaging::Image> lr;
  for (const auto& p : pairs) lr.push_back(p.lr);
  return evaluate_outputs(pairs, super_resolve(generator, lr), generator.config().scale, threads);
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  const auto old = out.precision(10);
  out << "# facn evaluation report\n";
  out << "# degradation = " << report.degradation << "\n";
  out << "# checkpoint = " << report.checkpoint << "\n";
  out << "# config_hash = " << report.config_hash << "\n";
  out << "# images = " << report.rows.size() << "\n";
  out << "# channel = Y (BT.601)\n";
  out << "# border_crop = 0\n";
  out << "# mean_psnr = " << report.mean_psnr << "\n";
  out << "# mean_ssim = " << report.mean_ssim << "\n";
  out << "# mean_bicubic_psnr = " << report.mean_bicubic_psnr << "\n";
  out << "# mean_bicubic_ssim = " << report.mean_bicubic_ssim << "\n";
  out << "image,psnr,ssim,bicubic_psnr,bicubic_ssim\n";
  for (const auto& r : report.rows)
    out << r.name << ',' << r.psnr << ',' << r.ssim << ',' << r.bicubic_psnr << ',' << r.bicubic_ssim << '\n';
  out << "mean," << report.mean_psnr << ',' << report.mean_ssim << ',' << report.mean_bicubic_psnr << ','
      << report.mean_bicubic_ssim << '\n';
  out.precision(old);
}

imaging::Image comparison_grid(const imaging::Image& hr, const imaging::Image& lr, const imaging::Image& bicubic,
                               const imaging::Image& output) {
  const int h = hr.height();
  const int w = hr.width();
  const int gap = std::max(2, w / 32);
  const imaging::Image lr_big = imaging::upscale_nearest(lr, std::max(1, w / std::max(1, lr.width())));
  const imaging::Image* panels[] = {&hr, &lr_big, &bicubic, &output};
  imaging::Image grid(h, 4 * w + 3 * gap, 3, 1.0f);
  for (int p = 0; p < 4; ++p) {
    const imaging::Image& img = *panels[p];
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < std::min(h, img.height()); ++y)
        for (int x = 0; x < std::min(w, img.width()); ++x)
          grid.at(c, y, p * (w + gap) + x) = img.at(img.channels() == 3 ? c : 0, y, x);
  }
  return grid;
}

}  // namespace facn::training
