#include "facn/imaging/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facn::imaging {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw std::invalid_argument("Image: negative dimension");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

std::span<float> Image::plane(int c) noexcept {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * height_ * width_,
                                         static_cast<std::size_t>(height_) * width_);
}

std::span<const float> Image::plane(int c) const noexcept {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * height_ * width_,
                                               static_cast<std::size_t>(height_) * width_);
}

bool Image::same_shape(const Image& other) const noexcept {
  return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void Image::clamp01() noexcept {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

Image upscale_nearest(const Image& img, int factor) {
  if (factor < 1) throw std::invalid_argument("upscale_nearest: factor must be >= 1");
  Image out(img.height() * factor, img.width() * factor, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = img.at(c, y / factor, x / factor);
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data()) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

}  // namespace facn::imaging
