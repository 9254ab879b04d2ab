#include "facn/adversarial/discriminator.hpp"

#include <stdexcept>
#include <string>

namespace facn::adversarial {

using nn::Activation;
using nn::LayerKind;

void DiscriminatorConfig::validate() const {
  if (hr_size < 16 || hr_size % 16 != 0)
    throw std::invalid_argument("discriminator: hr_size must be a positive multiple of 16, got " +
                                std::to_string(hr_size));
  if (width <= 0 || hidden <= 0) throw std::invalid_argument("discriminator: width and hidden must be positive");
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& config) : config_(config) {
  config_.validate();
  int in = 6;
  for (int i = 0; i < kConvLayers; ++i) {
    net_.template emplace<nn::Conv2d<T>>(
        "disc.conv" + std::to_string(i),
        nn::LayerSpec{LayerKind::Conv, 3, i % 2 == 0 ? 1 : 2, in, config_.width, Activation::LeakyRelu});
    in = config_.width;
  }
  const int flat = config_.width * config_.final_extent() * config_.final_extent();
  net_.template emplace<nn::Linear<T>>(
      "disc.fc0", nn::LayerSpec{LayerKind::FullyConnected, 1, 1, flat, config_.hidden, Activation::LeakyRelu});
  output_ = &net_.template emplace<nn::Linear<T>>(
      "disc.fc1", nn::LayerSpec{LayerKind::FullyConnected, 1, 1, config_.hidden, 1, Activation::Sigmoid});
  net_.initialize(config_.seed);
}

template <typename T>
Tensor<T> Discriminator<T>::pair(const Tensor<T>& candidate, const Tensor<T>& condition) const {
  const int s = config_.hr_size;
  auto check = [s](const Tensor<T>& t, const char* what) {
    if (t.c() != 3 || t.h() != s || t.w() != s)
      throw std::invalid_argument(std::string("discriminator: ") + what + " must be (n,3," + std::to_string(s) + "," +
                                  std::to_string(s) + "), got " + t.shape().str());
  };
  check(candidate, "candidate");
  check(condition, "condition");
  if (candidate.n() != condition.n()) throw std::invalid_argument("discriminator: batch sizes differ");
  return nn::concat_channels(candidate, condition);
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& candidate, const Tensor<T>& condition) {
  Tensor<T> x = pair(candidate, condition);
  for (std::size_t i = 0; i < net_.size(); ++i) {
    x = net_[i].forward(x);
    if (i + 1 == kFeatureLayer) features_ = x;
  }
  ran_ = net_.size();
  return x;
}

template <typename T>
Tensor<T> Discriminator<T>::features(const Tensor<T>& candidate, const Tensor<T>& condition) {
  features_ = net_.forward_prefix(pair(candidate, condition), kFeatureLayer);
  ran_ = kFeatureLayer;
  return features_;
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& grad_prob, const Tensor<T>& grad_features) {
  if (ran_ == 0) throw std::logic_error("discriminator: backward() without forward()");
  Tensor<T> g;
  std::size_t i = ran_;
  if (ran_ == net_.size()) {
    g = grad_prob;
  } else {
    if (grad_features.empty()) throw std::invalid_argument("discriminator: feature pass needs grad_features");
  }
  while (i > 0) {
    --i;
    if (i + 1 == kFeatureLayer && !grad_features.empty()) {
      if (g.empty())
        g = grad_features;
      else
        g += grad_features;
    }
    g = net_[i].backward(g);
  }
  return nn::slice_channels(g, 0, 3);
}

template <typename T>
void Discriminator<T>::set_frozen(bool frozen) {
  frozen_ = frozen;
  net_.set_accumulate_param_grads(!frozen);
}

template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace facn::adversarial
