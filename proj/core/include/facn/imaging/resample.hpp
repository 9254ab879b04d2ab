#pragma once

#include <vector>

#include "facn/imaging/image.hpp"

namespace facn::imaging {

/// Keys cubic convolution kernel with a = -0.5.
double keys_cubic(double x) noexcept;

/// Sparse 1-D resampling matrix: out[i] = sum_t weight[i*taps+t] * in[index[i*taps+t]].
struct ResampleWeights {
  int in_length = 0;
  int out_length = 0;
  int taps = 0;
  std::vector<int> index;
  std::vector<double> weight;
};

/// Matlab imresize contributions for the bicubic kernel. When downscaling with
/// antialias the kernel is stretched by 1/scale. Out-of-range taps are
/// clamped to the border (replicate padding).
ResampleWeights bicubic_weights(int in_length, int out_length, bool antialias);

/// Separable bicubic resize, rows first then columns.
Image bicubic_resize(const Image& img, int out_h, int out_w, bool antialias);

/// Normalized size x size Gaussian kernel, row-major.
std::vector<double> gaussian_kernel(int size, double sigma);

/// 2-D correlation with an odd square kernel, replicate border.
Image filter2d(const Image& img, const std::vector<double>& kernel, int size);

}  // namespace facn::imaging
