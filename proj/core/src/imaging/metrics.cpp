#include "facn/imaging/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "facn/imaging/color.hpp"
#include "facn/imaging/resample.hpp"

namespace facn::imaging {

Image rgb_to_y(const Image& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("rgb_to_y: expected a 3-channel image");
  Image y(rgb.height(), rgb.width(), 1);
  auto r = rgb.plane(0);
  auto g = rgb.plane(1);
  auto b = rgb.plane(2);
  auto out = y.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>((16.0 + 65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i]) / 255.0);
  return y;
}

namespace {

std::vector<double> luma255(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw std::invalid_argument("metrics: expected a 1- or 3-channel image");
  const Image y = img.channels() == 3 ? rgb_to_y(img) : img;
  std::vector<double> out(y.size());
  auto src = y.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 255.0 * src[i];
  return out;
}

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("metrics: image shapes differ");
}

// Valid-region correlation of an h x w plane with a size x size kernel.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k,
                                 int size) {
  const int oh = h - size + 1;
  const int ow = w - size + 1;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < size; ++ky)
        for (int kx = 0; kx < size; ++kx)
          acc += k[static_cast<std::size_t>(ky) * size + kx] * src[static_cast<std::size_t>(y + ky) * w + (x + kx)];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Image& ref, const Image& test) {
  require_same_shape(ref, test);
  const auto a = luma255(ref);
  const auto b = luma255(test);
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& ref, const Image& test) {
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

  require_same_shape(ref, test);
  if (ref.height() < kWindow || ref.width() < kWindow)
    throw std::invalid_argument("ssim: image is smaller than the 11x11 window");

  const int h = ref.height();
  const int w = ref.width();
  const auto a = luma255(ref);
  const auto b = luma255(test);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto k = gaussian_kernel(kWindow, kSigma);
  const auto mu_a = filter_valid(a, h, w, k, kWindow);
  const auto mu_b = filter_valid(b, h, w, k, kWindow);
  const auto e_aa = filter_valid(aa, h, w, k, kWindow);
  const auto e_bb = filter_valid(bb, h, w, k, kWindow);
  const auto e_ab = filter_valid(ab, h, w, k, kWindow);

  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return sum / static_cast<double>(mu_a.size());
}

}  // namespace facn::imaging
