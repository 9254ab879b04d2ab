#pragma once

#include "facn/imaging/image.hpp"

namespace facn::imaging {

/// BT.601 studio-swing luma (Matlab rgb2ycbcr): Y = (16 + 65.481 R + 128.553 G + 24.966 B) / 255.
Image rgb_to_y(const Image& rgb);

}  // namespace facn::imaging
