#include "facn/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace facn::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(values.begin(), values.end()) {
  if (data_.size() != shape_.size()) throw std::invalid_argument("Tensor: value count does not match shape " + shape_.str());
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape.size() != shape_.size())
    throw std::invalid_argument("Tensor::reshaped: " + shape_.str() + " -> " + shape.str() + " changes size");
  return Tensor(shape, data_);
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) throw std::invalid_argument("Tensor::operator+=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
Tensor<T> to_tensor(std::span<const imaging::Image> images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: empty batch");
  const auto& first = images.front();
  Tensor<T> t({static_cast<int>(images.size()), first.channels(), first.height(), first.width()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(first)) throw std::invalid_argument("to_tensor: images differ in shape");
    auto dst = t.sample(static_cast<int>(i));
    auto src = images[i].data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return t;
}

template <typename T>
imaging::Image to_image(const Tensor<T>& t, int index) {
  imaging::Image img(t.h(), t.w(), t.c());
  auto src = t.sample(index);
  auto dst = img.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src[i]);
  return img;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw std::invalid_argument("concat_channels: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
  Tensor<T> out({a.n(), a.c() + b.c(), a.h(), a.w()});
  for (int i = 0; i < a.n(); ++i) {
    auto dst = out.sample(i);
    auto sa = a.sample(i);
    auto sb = b.sample(i);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > t.c()) throw std::invalid_argument("slice_channels: out of range");
  Tensor<T> out({t.n(), count, t.h(), t.w()});
  const std::size_t plane = static_cast<std::size_t>(t.h()) * t.w();
  for (int i = 0; i < t.n(); ++i) {
    auto src = t.sample(i).subspan(begin * plane, count * plane);
    std::copy(src.begin(), src.end(), out.sample(i).begin());
  }
  return out;
}

template <typename T>
double squared_norm(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return s;
}

#define FACN_INSTANTIATE(T)                                                      \
  template class Tensor<T>;                                                      \
  template Tensor<T> to_tensor<T>(std::span<const imaging::Image>);              \
  template imaging::Image to_image<T>(const Tensor<T>&, int);                    \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, int, int);              \
  template double squared_norm<T>(std::span<const T>);

FACN_INSTANTIATE(float)
FACN_INSTANTIATE(double)
#undef FACN_INSTANTIATE

}  // namespace facn::nn
