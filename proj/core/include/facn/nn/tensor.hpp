#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "facn/imaging/image.hpp"
#include "facn/nn/aligned.hpp"

namespace facn::nn {

/// NCHW extent. Vectors are stored as (n, features, 1, 1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;

  std::size_t size() const noexcept { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> values);
  template <typename Alloc>
  Tensor(Shape shape, const std::vector<T, Alloc>& values) : Tensor(shape, std::vector<T>(values.begin(), values.end())) {}

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  Buffer<T>& storage() noexcept { return data_; }
  const Buffer<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }
  T& at(int n, int c, int y, int x) noexcept { return data_[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const noexcept { return data_[offset(n, c, y, x)]; }

  std::span<T> sample(int i) noexcept { return std::span<T>(data_).subspan(i * shape_.sample_size(), shape_.sample_size()); }
  std::span<const T> sample(int i) const noexcept {
    return std::span<const T>(data_).subspan(i * shape_.sample_size(), shape_.sample_size());
  }

  /// Same data, new extent; sizes must agree.
  Tensor reshaped(Shape shape) const;
  void fill(T v);
  Tensor& operator+=(const Tensor& other);

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  std::size_t offset(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  Buffer<T> data_;
};

/// Stacks same-sized images into an (n, channels, h, w) batch.
template <typename T>
Tensor<T> to_tensor(std::span<const imaging::Image> images);

template <typename T>
imaging::Image to_image(const Tensor<T>& t, int index);

/// Concatenates along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Copies channels [begin, begin + count).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int begin, int count);

template <typename T>
double squared_norm(std::span<const T> v);

}  // namespace facn::nn
