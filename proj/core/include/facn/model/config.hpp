#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace facn::model {

/// full: semantic + probabilistic capsules; v1: semantic only; v2: probabilistic only;
/// v3: the capsule block replaced by primary capsules + dynamic routing.
enum class Variant { Full, V1, V2, V3 };

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view text);

struct ModelConfig {
  int hr_size = 128;  ///< 16, 32, 64 or 128; the encoder drops leading stride pairs below 128
  int scale = 8;
  int width = 64;  ///< channel count of every hidden convolution
  int k = 64;      ///< capsule count
  int d = 4;       ///< semantic capsule dimension
  int pc_dim = 1;  ///< probabilistic values per capsule: 1, or d for the per-dimension alternative
  int supervised_attributes = 18;
  Variant variant = Variant::Full;
  int routing_iterations = 3;
  int primary_capsule_dim = 8;  ///< v3 only
  std::uint64_t seed = 1;

  int lr_size() const noexcept { return hr_size / scale; }
  bool has_semantic() const noexcept { return variant == Variant::Full || variant == Variant::V1; }
  bool has_probabilistic() const noexcept { return variant == Variant::Full || variant == Variant::V2; }
  bool has_attributes() const noexcept { return variant != Variant::V3; }
  bool uses_routing() const noexcept { return variant == Variant::V3; }
  /// The flat FAC length the decoder consumes.
  int decoder_input_width() const noexcept;
  /// Strides of the encoding part (11 layers at 128, two fewer per halving).
  std::vector<int> encoder_strides() const;
  /// Number of 2x up-sampling convolutions in the decoder (6 at 128).
  int decoder_upsamples() const noexcept;
  /// Spatial extent of the encoded features (always 2).
  static constexpr int kFeatureExtent = 2;

  void validate() const;
  /// Stable textual form of every architectural field; hashed into checkpoints.
  std::string canonical() const;
  std::uint64_t hash() const;
};

}  // namespace facn::model
