#include "facn/imaging/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facn::imaging {

double keys_cubic(double x) noexcept {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

ResampleWeights bicubic_weights(int in_length, int out_length, bool antialias) {
  if (in_length < 1 || out_length < 1) throw std::invalid_argument("bicubic_weights: lengths must be >= 1");

  const double scale = static_cast<double>(out_length) / in_length;
  const bool stretch = antialias && scale < 1.0;
  const double kernel_width = stretch ? 4.0 / scale : 4.0;

  ResampleWeights w;
  w.in_length = in_length;
  w.out_length = out_length;
  w.taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  w.index.resize(static_cast<std::size_t>(out_length) * w.taps);
  w.weight.resize(w.index.size());

  for (int i = 0; i < out_length; ++i) {
    // 1-based output coordinate mapped into 1-based input space.
    const double u = i + 1;
    const double x = u / scale + 0.5 * (1.0 - 1.0 / scale);
    const double left = std::floor(x - kernel_width / 2.0);
    double sum = 0.0;
    for (int t = 0; t < w.taps; ++t) {
      const double j = left + t;
      const double dist = x - j;
      const double h = stretch ? scale * keys_cubic(scale * dist) : keys_cubic(dist);
      const std::size_t slot = static_cast<std::size_t>(i) * w.taps + t;
      w.weight[slot] = h;
      w.index[slot] = std::clamp(static_cast<int>(j) - 1, 0, in_length - 1);
      sum += h;
    }
    for (int t = 0; t < w.taps; ++t) w.weight[static_cast<std::size_t>(i) * w.taps + t] /= sum;
  }
  return w;
}

Image bicubic_resize(const Image& img, int out_h, int out_w, bool antialias) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic_resize: output size must be >= 1");
  if (img.empty()) throw std::invalid_argument("bicubic_resize: empty input");

  const int in_h = img.height();
  const int in_w = img.width();
  const ResampleWeights wy = bicubic_weights(in_h, out_h, antialias);
  const ResampleWeights wx = bicubic_weights(in_w, out_w, antialias);

  Image out(out_h, out_w, img.channels());
  std::vector<double> rows(static_cast<std::size_t>(out_h) * in_w);
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    for (int oy = 0; oy < out_h; ++oy)
      for (int x = 0; x < in_w; ++x) {
        double acc = 0.0;
        for (int t = 0; t < wy.taps; ++t) {
          const std::size_t s = static_cast<std::size_t>(oy) * wy.taps + t;
          acc += wy.weight[s] * src[static_cast<std::size_t>(wy.index[s]) * in_w + x];
        }
        rows[static_cast<std::size_t>(oy) * in_w + x] = acc;
      }
    auto dst = out.plane(c);
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        for (int t = 0; t < wx.taps; ++t) {
          const std::size_t s = static_cast<std::size_t>(ox) * wx.taps + t;
          acc += wx.weight[s] * rows[static_cast<std::size_t>(oy) * in_w + wx.index[s]];
        }
        dst[static_cast<std::size_t>(oy) * out_w + ox] = static_cast<float>(acc);
      }
  }
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd and positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const int r = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(y + r) * size + (x + r)] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return k;
}

Image filter2d(const Image& img, const std::vector<double>& kernel, int size) {
  if (size < 1 || size % 2 == 0 || kernel.size() != static_cast<std::size_t>(size) * size)
    throw std::invalid_argument("filter2d: kernel must be odd-sized and square");
  const int r = size / 2;
  const int h = img.height();
  const int w = img.width();
  Image out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ky = -r; ky <= r; ++ky) {
          const int sy = std::clamp(y + ky, 0, h - 1);
          for (int kx = -r; kx <= r; ++kx) {
            const int sx = std::clamp(x + kx, 0, w - 1);
            acc += kernel[static_cast<std::size_t>(ky + r) * size + (kx + r)] * img.at(c, sy, sx);
          }
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace facn::imaging
