#pragma once

#include <memory>
#include <optional>

#include "facn/imaging/resample.hpp"
#include "facn/model/config.hpp"
#include "facn/model/routing.hpp"
#include "facn/nn/layers.hpp"

namespace facn::model {

using nn::Tensor;

/// Shared structure of SEN, AAN and PIN: three 3x3 stride-1 convs on the encoded
/// features followed by one fully connected layer.
template <typename T>
class CapsuleHead {
 public:
  CapsuleHead(const std::string& name, int width, int outputs, nn::Activation output_activation);

  Tensor<T> forward(const Tensor<T>& features);
  Tensor<T> backward(const Tensor<T>& grad_out);
  nn::ParameterList<T> parameters();
  void initialize(std::uint64_t seed);
  void fold_activation_pattern(std::uint64_t& h) const { trunk_.fold_activation_pattern(h); }

  nn::Sequential<T>& trunk() noexcept { return trunk_; }
  nn::Linear<T>& fc() noexcept { return *fc_; }

 private:
  nn::Sequential<T> trunk_;
  nn::Linear<T>* fc_ = nullptr;
};

/// Everything one generator pass produces. Tensors not used by a variant stay empty.
template <typename T>
struct GeneratorOutputs {
  Tensor<T> lr_upsampled;     ///< bicubic x scale of the input
  Tensor<T> coarse;           ///< y_p
  Tensor<T> features;         ///< D_f
  Tensor<T> primary;          ///< C_s^pr, (n, k*d)
  Tensor<T> attributes;       ///< a_tt, (n, k)
  Tensor<T> semantic;         ///< C_s, (n, k*d)
  Tensor<T> mu;               ///< (n, k*pc_dim)
  Tensor<T> logvar_raw;       ///< PIN output before clamping
  Tensor<T> logvar;           ///< clamped to [-10, 10]
  Tensor<T> mu_hat;
  Tensor<T> eps;
  Tensor<T> probabilistic;    ///< C_p
  Tensor<T> caps;             ///< decoder input
  Tensor<T> output;           ///< y_hat
};

/// Loss gradients with respect to generator outputs. Empty tensors mean zero.
template <typename T>
struct GeneratorGradients {
  Tensor<T> output;
  Tensor<T> coarse;
  Tensor<T> attributes;
  Tensor<T> mu;
  Tensor<T> logvar;
};

/// Bicubic (Matlab-style, no antialias) upsampling of an NCHW batch by an integer factor.
template <typename T>
Tensor<T> upsample_bicubic(const Tensor<T>& x, int factor);

/// FACN generator: pre-SR, encoder, capsule generation block, decoder.
template <typename T>
class Generator {
 public:
  explicit Generator(const ModelConfig& config);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;

  const ModelConfig& config() const noexcept { return config_; }

  /// lr: (n, 3, lr, lr). eps: (n, k*pc_dim) standard-normal draws, or nullptr for the mean (eps = 0).
  GeneratorOutputs<T> forward(const Tensor<T>& lr, const Tensor<T>* eps = nullptr);
  /// Backpropagates through the most recent forward().
  void backward(const GeneratorGradients<T>& grads);

  // Stage-level entry points; each caches for its own backward.
  Tensor<T> pre_sr(const Tensor<T>& lr_upsampled) { return pre_sr_.forward(lr_upsampled); }
  Tensor<T> encode(const Tensor<T>& coarse) { return encoder_.forward(coarse); }
  Tensor<T> decode(const Tensor<T>& caps);

  nn::Sequential<T>& pre_sr_net() noexcept { return pre_sr_; }
  nn::Sequential<T>& encoder_net() noexcept { return encoder_; }
  nn::Sequential<T>& decoder_net() noexcept { return decoder_; }
  CapsuleHead<T>* sen() noexcept { return sen_.get(); }
  CapsuleHead<T>* aan() noexcept { return aan_.get(); }
  CapsuleHead<T>* pin() noexcept { return pin_.get(); }
  CapsuleRouting<T>* routing() noexcept { return routing_.get(); }

  nn::ParameterList<T> parameters();
  nn::ParameterList<T> pre_sr_parameters() { return pre_sr_.parameters(); }
  nn::ParameterList<T> encoder_parameters() { return encoder_.parameters(); }
  nn::ParameterList<T> capsule_block_parameters();
  nn::ParameterList<T> decoder_parameters() { return decoder_.parameters(); }

  void initialize(std::uint64_t seed);

  /// Piecewise-linear region of the last forward: leaky-relu signs and which logvar entries were clamped.
  std::uint64_t activation_pattern() const;

 private:
  ModelConfig config_;
  nn::Sequential<T> pre_sr_;
  nn::Sequential<T> encoder_;
  std::unique_ptr<CapsuleHead<T>> sen_;
  std::unique_ptr<CapsuleHead<T>> aan_;
  std::unique_ptr<CapsuleHead<T>> pin_;
  std::unique_ptr<CapsuleRouting<T>> routing_;
  nn::Sequential<T> decoder_;
  GeneratorOutputs<T> last_;
};

}  // namespace facn::model
