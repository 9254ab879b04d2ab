#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "facn/nn/parameter.hpp"
#include "facn/nn/tensor.hpp"

namespace facn::nn {

enum class LayerKind { Conv, UpsampleConv, FullyConnected, ResidualBlock, Activation };
enum class Activation { None, LeakyRelu, Sigmoid };

inline constexpr double kLeakySlope = 0.2;

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int kernel = 3;
  int stride = 1;
  int channels_in = 0;  ///< input features for fully-connected layers
  int channels_out = 0;
  Activation activation = Activation::LeakyRelu;

  /// Inputs feeding one output unit: kernel^2 * channels_in, or channels_in for FC.
  int fan_in() const noexcept;
};

template <typename T>
void apply_activation(std::span<T> values, Activation act);

/// Multiplies grad by the activation derivative, expressed through the activation output.
template <typename T>
void activation_backward(std::span<T> grad, std::span<const T> output, Activation act);

/// Base of every differentiable layer. forward() caches what backward() needs;
/// backward() accumulates parameter gradients and returns d(loss)/d(input).
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::string describe() const = 0;
  virtual ParameterList<T> parameters() { return {}; }
  virtual void initialize(std::uint64_t /*seed*/) {}

  /// Frozen layers still propagate input gradients but leave parameter grads alone.
  virtual void set_accumulate_param_grads(bool on) { accumulate_params_ = on; }
  /// Layers fed by constants can skip the input gradient entirely (backward returns an empty tensor).
  virtual void set_propagate_input_grad(bool on) { propagate_input_ = on; }
  /// Folds the signs of leaky-relu outputs from the last forward into h. Two forwards with
  /// different patterns lie on different linear pieces.
  virtual void fold_activation_pattern(std::uint64_t& h) const { (void)h; }

 protected:
  bool accumulate_params_ = true;
  bool propagate_input_ = true;
};

/// Hashes the sign bits of `values` into h.
template <typename T>
void fold_signs(std::span<const T> values, std::uint64_t& h);

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

/// k x k convolution, padding k/2, optional fused activation. Output extent ceil(in / stride).
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, LayerSpec spec);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  ParameterList<T> parameters() override { return {&weight_, &bias_}; }
  void initialize(std::uint64_t seed) override;
  void fold_activation_pattern(std::uint64_t& h) const override;

  const LayerSpec& spec() const noexcept { return spec_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

 private:
  void im2col(const T* src, int h, int w, int oh, int ow, T* cols) const;
  void col2im(const T* cols, int h, int w, int oh, int ow, T* dst) const;

  LayerSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  Tensor<T> output_;
  Buffer<T> cols_;
};

/// Dense layer over the flattened sample, output (n, out, 1, 1).
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, LayerSpec spec);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  ParameterList<T> parameters() override { return {&weight_, &bias_}; }
  void initialize(std::uint64_t seed) override;
  void fold_activation_pattern(std::uint64_t& h) const override;

  const LayerSpec& spec() const noexcept { return spec_; }
  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

 private:
  LayerSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  Tensor<T> output_;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;
  void fold_activation_pattern(std::uint64_t& h) const override;

 private:
  Activation act_;
  Tensor<T> output_;
};

/// Nearest-neighbour 2x upsampling.
template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override { return {in.n, in.c, in.h * 2, in.w * 2}; }
  std::string describe() const override { return "upsample2x"; }

 private:
  Shape in_shape_;
};

/// Reinterprets each sample as (c, h, w).
template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override { return {in.n, c_, h_, w_}; }
  std::string describe() const override;

 private:
  int c_, h_, w_;
  Shape in_shape_;
};

/// x + conv(leaky(conv(x))), both 3x3 stride 1.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, int channels);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;
  ParameterList<T> parameters() override;
  void initialize(std::uint64_t seed) override;
  void set_accumulate_param_grads(bool on) override;
  void fold_activation_pattern(std::uint64_t& h) const override;

  Conv2d<T>& inner(int i) noexcept { return i == 0 ? first_ : second_; }

 private:
  Conv2d<T> first_;
  Conv2d<T> second_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;

  Sequential& add(LayerPtr<T> layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  ParameterList<T> parameters() override;
  void initialize(std::uint64_t seed) override;
  void set_accumulate_param_grads(bool on) override;
  void set_propagate_input_grad(bool on) override;
  void fold_activation_pattern(std::uint64_t& h) const override;

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) noexcept { return *layers_[i]; }

  /// Runs only the first `count` layers (used to tap intermediate features).
  Tensor<T> forward_prefix(const Tensor<T>& x, std::size_t count);
  /// Backward through the first `count` layers, after forward_prefix(count) or forward().
  Tensor<T> backward_prefix(const Tensor<T>& grad_out, std::size_t count);

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// Builds a layer from its spec; UpsampleConv becomes upsample2x followed by a stride-1 conv.
template <typename T>
LayerPtr<T> make_layer(const std::string& name, const LayerSpec& spec);

template <typename T>
void zero_grads(const ParameterList<T>& params);

template <typename T>
std::size_t parameter_count(const ParameterList<T>& params);

}  // namespace facn::nn
