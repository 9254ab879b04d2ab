#pragma once

#include <cstdint>

#include "facn/nn/layers.hpp"

namespace facn::adversarial {

using nn::Tensor;

struct DiscriminatorConfig {
  int hr_size = 128;
  int width = 64;    ///< channels of every conv
  int hidden = 256;  ///< first fully connected layer
  std::uint64_t seed = 2;

  /// Spatial extent after the four stride-2 convs.
  int final_extent() const noexcept { return hr_size / 16; }
  void validate() const;
};

/// Conditional discriminator over (candidate HR, bicubic-upsampled LR) pairs concatenated to 6 channels.
/// Eight 3x3 convs alternating stride 1 / stride 2, then FC(hidden) and FC(1) with a sigmoid.
template <typename T>
class Discriminator {
 public:
  /// The perceptual features are the output of this conv (1-based), after its activation.
  static constexpr int kFeatureLayer = 5;
  static constexpr int kConvLayers = 8;

  explicit Discriminator(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const noexcept { return config_; }

  /// Probabilities (n, 1, 1, 1). Also caches the perceptual features of this pass.
  Tensor<T> forward(const Tensor<T>& candidate, const Tensor<T>& condition);
  /// Perceptual features only (runs the first kFeatureLayer convs).
  Tensor<T> features(const Tensor<T>& candidate, const Tensor<T>& condition);
  /// Features of the last forward().
  const Tensor<T>& last_features() const noexcept { return features_; }

  /// Backward through the last forward(). grad_features (optional, may be empty) is added at the feature tap.
  /// Returns the gradient with respect to the candidate channels.
  Tensor<T> backward(const Tensor<T>& grad_prob, const Tensor<T>& grad_features = {});

  /// Frozen: gradients still reach the candidate, parameter gradients are left untouched.
  void set_frozen(bool frozen);
  bool frozen() const noexcept { return frozen_; }

  nn::ParameterList<T> parameters() { return net_.parameters(); }
  nn::Sequential<T>& net() noexcept { return net_; }
  nn::Linear<T>& output_layer() noexcept { return *output_; }
  void initialize(std::uint64_t seed) { net_.initialize(seed); }
  std::uint64_t activation_pattern() const {
    std::uint64_t h = 0;
    net_.fold_activation_pattern(h);
    return h;
  }

 private:
  Tensor<T> pair(const Tensor<T>& candidate, const Tensor<T>& condition) const;

  DiscriminatorConfig config_;
  nn::Sequential<T> net_;
  nn::Linear<T>* output_ = nullptr;
  Tensor<T> features_;
  std::size_t ran_ = 0;
  bool frozen_ = false;
};

}  // namespace facn::adversarial
