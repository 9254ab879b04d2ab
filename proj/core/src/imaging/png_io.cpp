#include "facn/imaging/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "facn/common/error.hpp"

namespace facn::imaging {

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw LoadError(path.string(), png.message[0] ? png.message : "cannot open PNG");

  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw LoadError(path.string(), msg);
  }

  const int h = static_cast<int>(png.height);
  const int w = static_cast<int>(png.width);
  Image img(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(c, y, x) = buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0f;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw std::invalid_argument("write_png: only 1- or 3-channel images are supported");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  const int channels = img.channels();
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * img.width() + x) * channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw LoadError(path.string(), png.message[0] ? png.message : "cannot write PNG");
}

}  // namespace facn::imaging
