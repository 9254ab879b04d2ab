#include "facn/imaging/degradation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "facn/common/rng.hpp"
#include "facn/imaging/resample.hpp"

namespace facn::imaging {

std::string_view to_string(DegradationKind kind) noexcept {
  switch (kind) {
    case DegradationKind::Bic: return "Bic";
    case DegradationKind::BicN: return "BicN";
    case DegradationKind::BBicN: return "BBicN";
  }
  return "?";
}

DegradationKind parse_degradation_kind(std::string_view text) {
  if (text == "Bic" || text == "bic") return DegradationKind::Bic;
  if (text == "BicN" || text == "bicn") return DegradationKind::BicN;
  if (text == "BBicN" || text == "bbicn") return DegradationKind::BBicN;
  throw std::invalid_argument("unknown degradation model '" + std::string(text) + "' (expected Bic, BicN or BBicN)");
}

DegradationSpec DegradationSpec::make(DegradationKind kind, std::uint64_t seed, int hr_size) {
  DegradationSpec s;
  s.kind = kind;
  s.seed = seed;
  s.hr_size = hr_size;
  switch (kind) {
    case DegradationKind::Bic: s.noise_level = 0.0; break;
    case DegradationKind::BicN: s.noise_level = 10.0; break;
    case DegradationKind::BBicN: s.noise_level = 30.0; break;
  }
  return s;
}

void DegradationSpec::validate() const {
  if (scale < 1) throw std::invalid_argument("degradation: scale must be >= 1");
  if (hr_size < scale || hr_size % scale != 0)
    throw std::invalid_argument("degradation: hr_size must be a positive multiple of scale");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw std::invalid_argument("degradation: noise level must be finite and >= 0");
  if (kind == DegradationKind::Bic && noise_level != 0.0)
    throw std::invalid_argument("degradation: Bic model carries no noise");
  if (has_blur() && (blur_size < 1 || blur_size % 2 == 0 || !(blur_sigma > 0.0)))
    throw std::invalid_argument("degradation: blur needs an odd size and positive sigma");
}

Image add_gaussian_noise(const Image& img, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw std::invalid_argument("add_gaussian_noise: level must be >= 0");
  if (level == 0.0) return img;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, level / 255.0);
  Image out = img;
  for (float& v : out.data()) v = static_cast<float>(v + normal(rng));
  out.clamp01();
  return out;
}

Image degrade(const Image& hr, const DegradationSpec& spec) {
  spec.validate();
  if (hr.height() != spec.hr_size || hr.width() != spec.hr_size || hr.channels() != 3)
    throw std::invalid_argument("degrade: expected a " + std::to_string(spec.hr_size) + "x" +
                                std::to_string(spec.hr_size) + "x3 HR image, got " + std::to_string(hr.height()) +
                                "x" + std::to_string(hr.width()) + "x" + std::to_string(hr.channels()));
  Image img = hr;
  if (spec.has_blur()) {
    img = filter2d(img, gaussian_kernel(spec.blur_size, spec.blur_sigma), spec.blur_size);
    img.clamp01();
  }
  img = bicubic_resize(img, spec.lr_size(), spec.lr_size(), /*antialias=*/true);
  img.clamp01();
  return add_gaussian_noise(img, spec.noise_level, spec.seed);
}

}  // namespace facn::imaging
