#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "facn/imaging/image.hpp"

namespace facn::training {

/// The 18 supervised attributes, in label order.
inline constexpr std::array<std::string_view, 18> kAttributeNames = {
    "Male",       "Young",         "No_Beard",  "Goatee",      "Mustache",        "Sideburns",
    "Smiling",    "Eyeglasses",    "Wearing_Hat", "Bald",      "Bangs",           "Big_Nose",
    "Big_Lips",   "Pointy_Nose",   "Narrow_Eyes", "Bags_Under_Eyes", "Heavy_Makeup", "Mouth_Slightly_Open"};

struct SyntheticFace {
  imaging::Image image;
  std::vector<float> attributes;  ///< {0,1}, kAttributeNames order
};

/// Procedural cartoon face whose appearance is driven by the 18 attributes
/// plus random pose, colour and lighting. Deterministic in seed.
SyntheticFace render_synthetic_face(std::uint64_t seed, int size = 128);

/// Writes face_NNNNN.png files and an attributes.txt table (CelebA layout: count line,
/// header line, then `name v1 .. v18` rows with values +-1).
void write_synthetic_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed, int size = 128);

}  // namespace facn::training
