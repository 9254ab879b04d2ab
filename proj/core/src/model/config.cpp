#include "facn/model/config.hpp"

#include <stdexcept>

#include "facn/common/rng.hpp"

namespace facn::model {

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::V1: return "v1";
    case Variant::V2: return "v2";
    case Variant::V3: return "v3";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "full") return Variant::Full;
  if (text == "v1") return Variant::V1;
  if (text == "v2") return Variant::V2;
  if (text == "v3") return Variant::V3;
  throw std::invalid_argument("unknown model variant '" + std::string(text) + "' (expected full, v1, v2 or v3)");
}

int ModelConfig::decoder_input_width() const noexcept {
  switch (variant) {
    case Variant::Full: return k * (d + pc_dim);
    case Variant::V1: return k * d;
    case Variant::V2: return k * pc_dim;
    case Variant::V3: return k * d;
  }
  return 0;
}

std::vector<int> ModelConfig::encoder_strides() const {
  static const std::vector<int> full = {2, 1, 2, 1, 2, 1, 2, 1, 2, 2, 1};
  int drop = 0;
  for (int s = 128; s > hr_size; s /= 2) drop += 2;
  return {full.begin() + drop, full.end()};
}

int ModelConfig::decoder_upsamples() const noexcept {
  int n = 0;
  for (int s = kFeatureExtent; s < hr_size; s *= 2) ++n;
  return n;
}

void ModelConfig::validate() const {
  if (hr_size != 16 && hr_size != 32 && hr_size != 64 && hr_size != 128)
    throw std::invalid_argument("model: hr_size must be 16, 32, 64 or 128");
  if (scale < 1 || hr_size % scale != 0) throw std::invalid_argument("model: hr_size must be a multiple of scale");
  if (width < 1) throw std::invalid_argument("model: width must be >= 1");
  if (d < 1) throw std::invalid_argument("model: capsule dimension d must be >= 1");
  if (pc_dim != 1 && pc_dim != d) throw std::invalid_argument("model: pc_dim must be 1 or d");
  if (supervised_attributes < 0) throw std::invalid_argument("model: supervised_attributes must be >= 0");
  if (k < supervised_attributes)
    throw std::invalid_argument("model: capsule count k must cover the " + std::to_string(supervised_attributes) +
                                " supervised attributes");
  if (routing_iterations < 1) throw std::invalid_argument("model: routing_iterations must be >= 1");
  if (uses_routing()) {
    const int features = width * kFeatureExtent * kFeatureExtent;
    if (primary_capsule_dim < 1 || features % primary_capsule_dim != 0)
      throw std::invalid_argument("model: encoded feature count must be divisible by primary_capsule_dim");
  }
}

std::string ModelConfig::canonical() const {
  std::string s;
  s += "hr_size=" + std::to_string(hr_size);
  s += ";scale=" + std::to_string(scale);
  s += ";width=" + std::to_string(width);
  s += ";k=" + std::to_string(k);
  s += ";d=" + std::to_string(d);
  s += ";pc_dim=" + std::to_string(pc_dim);
  s += ";supervised=" + std::to_string(supervised_attributes);
  s += ";variant=" + std::string(to_string(variant));
  s += ";routing_iterations=" + std::to_string(routing_iterations);
  s += ";primary_capsule_dim=" + std::to_string(primary_capsule_dim);
  return s;
}

std::uint64_t ModelConfig::hash() const {
  return fnv1a(canonical());
}

}  // namespace facn::model
