#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "facn/imaging/image.hpp"

namespace facn::imaging {

enum class DegradationKind { Bic, BicN, BBicN };

std::string_view to_string(DegradationKind kind) noexcept;
DegradationKind parse_degradation_kind(std::string_view text);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::Bic;
  int scale = 8;
  int blur_size = 7;
  double blur_sigma = 1.6;
  double noise_level = 0.0;  ///< std in [0,255] units
  std::uint64_t seed = 0;
  int hr_size = 128;

  /// Defaults for each model: Bic (no noise), BicN (noise 10), BBicN (7x7 blur, sigma 1.6, noise 30).
  static DegradationSpec make(DegradationKind kind, std::uint64_t seed = 0, int hr_size = 128);

  bool has_blur() const noexcept { return kind == DegradationKind::BBicN; }
  int lr_size() const noexcept { return hr_size / scale; }
  void validate() const;
};

/// Adds i.i.d. N(0, (level/255)^2) noise, then clamps to [0,1].
Image add_gaussian_noise(const Image& img, double level, std::uint64_t seed);

/// HR -> LR: [blur] -> antialiased bicubic downscale -> [noise]; clamped after each stage.
Image degrade(const Image& hr, const DegradationSpec& spec);

}  // namespace facn::imaging
