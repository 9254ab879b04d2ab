#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace facn::imaging {

/// Planar (channel-major) image with intensities nominally in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

  std::span<float> plane(int c) noexcept;
  std::span<const float> plane(int c) const noexcept;
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept;
  bool all_finite() const noexcept;
  void clamp01() noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Nearest-neighbour enlargement by an integer factor (display only).
Image upscale_nearest(const Image& img, int factor);

/// Round to the 8-bit grid and back, as a PNG round trip would.
Image quantize8(const Image& img);

}  // namespace facn::imaging
