#pragma once

#include <filesystem>

#include "facn/imaging/image.hpp"

namespace facn::imaging {

/// Reads an 8-bit PNG. Gray images load as 1 channel, everything else as RGB
/// (alpha is dropped). Throws LoadError.
Image read_png(const std::filesystem::path& path);

/// Writes 1- or 3-channel images as 8-bit PNG after clamping to [0,1].
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace facn::imaging
