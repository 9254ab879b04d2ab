#pragma once

#include "facn/imaging/image.hpp"

namespace facn::imaging {

// Both metrics operate on luma in [0,255]. RGB inputs are converted with
// rgb_to_y; single-channel inputs are taken to be luma already. No border crop.

/// Returns +infinity when the images are identical.
double psnr(const Image& ref, const Image& test);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255.
double ssim(const Image& ref, const Image& test);

}  // namespace facn::imaging
