#include "facn/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "facn/common/rng.hpp"
#include "facn/nn/init.hpp"

namespace facn::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::None: return "none";
    case Activation::LeakyRelu: return "leaky-relu(0.2)";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int floor_div(int a, int b) noexcept {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

int LayerSpec::fan_in() const noexcept {
  if (kind == LayerKind::FullyConnected) return channels_in;
  return kernel * kernel * channels_in;
}

template <typename T>
void apply_activation(std::span<T> values, Activation act) {
  switch (act) {
    case Activation::None: break;
    case Activation::LeakyRelu:
      for (T& v : values) v = v > T{0} ? v : static_cast<T>(kLeakySlope) * v;
      break;
    case Activation::Sigmoid:
      for (T& v : values) v = T{1} / (T{1} + std::exp(-v));
      break;
  }
}

template <typename T>
void activation_backward(std::span<T> grad, std::span<const T> output, Activation act) {
  switch (act) {
    case Activation::None: break;
    case Activation::LeakyRelu:
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(output[i] > T{0})) grad[i] *= static_cast<T>(kLeakySlope);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (T{1} - output[i]);
      break;
  }
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, LayerSpec spec)
    : spec_(spec),
      weight_(name + ".weight", {spec.channels_out, spec.channels_in, spec.kernel, spec.kernel}),
      bias_(name + ".bias", {spec.channels_out}) {
  require(spec.kernel >= 1 && spec.kernel % 2 == 1, name + ": kernel must be odd");
  require(spec.stride >= 1, name + ": stride must be >= 1");
  require(spec.channels_in >= 1 && spec.channels_out >= 1, name + ": channel counts must be >= 1");
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  return {in.n, spec_.channels_out, (in.h + spec_.stride - 1) / spec_.stride, (in.w + spec_.stride - 1) / spec_.stride};
}

template <typename T>
std::string Conv2d<T>::describe() const {
  return "conv k" + std::to_string(spec_.kernel) + "s" + std::to_string(spec_.stride) + " " +
         std::to_string(spec_.channels_in) + "->" + std::to_string(spec_.channels_out) + " " +
         activation_name(spec_.activation);
}

template <typename T>
void Conv2d<T>::initialize(std::uint64_t seed) {
  he_fill(weight_, bias_, spec_.fan_in(), seed);
}

template <typename T>
void Conv2d<T>::im2col(const T* src, int h, int w, int oh, int ow, T* cols) const {
  const int k = spec_.kernel;
  const int s = spec_.stride;
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < spec_.channels_in; ++c) {
    const T* channel = src + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        // valid output columns: 0 <= ox*s - pad + kx < w
        const int x_lo = std::max(0, (pad - kx + s - 1) / s);
        const int x_hi = std::min(ow, floor_div(w - 1 + pad - kx, s) + 1);
        for (int oy = 0; oy < oh; ++oy) {
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          const int iy = oy * s - pad + ky;
          if (iy < 0 || iy >= h || x_lo >= x_hi) {
            std::fill(dst, dst + ow, T{0});
            continue;
          }
          const T* line = channel + static_cast<std::size_t>(iy) * w;
          std::fill(dst, dst + x_lo, T{0});
          if (s == 1) {
            std::memcpy(dst + x_lo, line + (x_lo - pad + kx), sizeof(T) * (x_hi - x_lo));
          } else {
            for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] = line[ox * s - pad + kx];
          }
          std::fill(dst + x_hi, dst + ow, T{0});
        }
      }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* cols, int h, int w, int oh, int ow, T* dst) const {
  const int k = spec_.kernel;
  const int s = spec_.stride;
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < spec_.channels_in; ++c) {
    T* channel = dst + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        const int x_lo = std::max(0, (pad - kx + s - 1) / s);
        const int x_hi = std::min(ow, floor_div(w - 1 + pad - kx, s) + 1);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* line = channel + static_cast<std::size_t>(iy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = x_lo; ox < x_hi; ++ox) line[ox * s - pad + kx] += src[ox];
        }
      }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  require(x.c() == spec_.channels_in, "conv: expected " + std::to_string(spec_.channels_in) + " input channels, got " +
                                          std::to_string(x.c()));
  const Shape os = output_shape(x.shape());
  const int rows = spec_.channels_in * spec_.kernel * spec_.kernel;
  const int cols = os.h * os.w;
  input_ = x;
  Tensor<T> out(os);
  cols_.resize(static_cast<std::size_t>(rows) * cols);

  ConstMatrixMap<T> weight(weight_.value.data(), spec_.channels_out, rows);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(bias_.value.data(), spec_.channels_out);
  for (int i = 0; i < x.n(); ++i) {
    im2col(x.sample(i).data(), x.h(), x.w(), os.h, os.w, cols_.data());
    MatrixMap<T> y(out.sample(i).data(), spec_.channels_out, cols);
    y.noalias() = weight * ConstMatrixMap<T>(cols_.data(), rows, cols);
    y.colwise() += bias;
  }
  apply_activation(out.values(), spec_.activation);
  if (spec_.activation != Activation::None) output_ = out;
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const Shape os = output_shape(input_.shape());
  require(grad_out.shape() == os, "conv backward: gradient shape " + grad_out.shape().str() + " != " + os.str());
  Tensor<T> g = grad_out;
  if (spec_.activation != Activation::None) activation_backward<T>(g.values(), std::as_const(output_).values(), spec_.activation);

  const int rows = spec_.channels_in * spec_.kernel * spec_.kernel;
  const int cols = os.h * os.w;
  cols_.resize(static_cast<std::size_t>(rows) * cols);
  Tensor<T> grad_in;
  if (this->propagate_input_) grad_in = Tensor<T>(input_.shape());
  if (!this->accumulate_params_ && !this->propagate_input_) return grad_in;

  ConstMatrixMap<T> weight(weight_.value.data(), spec_.channels_out, rows);
  MatrixMap<T> dweight(weight_.grad.data(), spec_.channels_out, rows);
  for (int i = 0; i < g.n(); ++i) {
    ConstMatrixMap<T> gy(g.sample(i).data(), spec_.channels_out, cols);
    if (this->accumulate_params_) {
      im2col(input_.sample(i).data(), input_.h(), input_.w(), os.h, os.w, cols_.data());
      dweight.noalias() += gy * ConstMatrixMap<T>(cols_.data(), rows, cols).transpose();
      for (int o = 0; o < spec_.channels_out; ++o) bias_.grad[o] += gy.row(o).sum();
    }
    if (this->propagate_input_) {
      MatrixMap<T> dcols(cols_.data(), rows, cols);
      dcols.noalias() = weight.transpose() * gy;
      col2im(cols_.data(), input_.h(), input_.w(), os.h, os.w, grad_in.sample(i).data());
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, LayerSpec spec)
    : spec_(spec),
      weight_(name + ".weight", {spec.channels_out, spec.channels_in}),
      bias_(name + ".bias", {spec.channels_out}) {
  spec_.kind = LayerKind::FullyConnected;
  require(spec.channels_in >= 1 && spec.channels_out >= 1, name + ": feature counts must be >= 1");
}

template <typename T>
Shape Linear<T>::output_shape(const Shape& in) const {
  return {in.n, spec_.channels_out, 1, 1};
}

template <typename T>
std::string Linear<T>::describe() const {
  return "fc " + std::to_string(spec_.channels_in) + "->" + std::to_string(spec_.channels_out) + " " +
         activation_name(spec_.activation);
}

template <typename T>
void Linear<T>::initialize(std::uint64_t seed) {
  he_fill(weight_, bias_, spec_.fan_in(), seed);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  require(static_cast<int>(x.shape().sample_size()) == spec_.channels_in,
          "fc: expected " + std::to_string(spec_.channels_in) + " input features, got " +
              std::to_string(x.shape().sample_size()));
  input_ = x;
  Tensor<T> out(output_shape(x.shape()));
  ConstMatrixMap<T> in(x.data(), x.n(), spec_.channels_in);
  ConstMatrixMap<T> weight(weight_.value.data(), spec_.channels_out, spec_.channels_in);
  MatrixMap<T> y(out.data(), x.n(), spec_.channels_out);
  y.noalias() = in * weight.transpose();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), spec_.channels_out);
  apply_activation(out.values(), spec_.activation);
  if (spec_.activation != Activation::None) output_ = out;
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  require(grad_out.shape() == output_shape(input_.shape()), "fc backward: gradient shape mismatch");
  Tensor<T> g = grad_out;
  if (spec_.activation != Activation::None) activation_backward<T>(g.values(), std::as_const(output_).values(), spec_.activation);
  ConstMatrixMap<T> gy(g.data(), g.n(), spec_.channels_out);
  ConstMatrixMap<T> weight(weight_.value.data(), spec_.channels_out, spec_.channels_in);
  if (this->accumulate_params_) {
    MatrixMap<T>(weight_.grad.data(), spec_.channels_out, spec_.channels_in).noalias() +=
        gy.transpose() * ConstMatrixMap<T>(input_.data(), input_.n(), spec_.channels_in);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), spec_.channels_out) += gy.colwise().sum();
  }
  Tensor<T> grad_in;
  if (this->propagate_input_) {
    grad_in = Tensor<T>(input_.shape());
    MatrixMap<T>(grad_in.data(), input_.n(), spec_.channels_in).noalias() = gy * weight;
  }
  return grad_in;
}

// ---------------------------------------------------------------- element-wise

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x) {
  output_ = x;
  apply_activation(output_.values(), act_);
  return output_;
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& grad_out) {
  require(grad_out.shape() == output_.shape(), "activation backward: gradient shape mismatch");
  Tensor<T> g = grad_out;
  activation_backward<T>(g.values(), std::as_const(output_).values(), act_);
  return g;
}

template <typename T>
std::string ActivationLayer<T>::describe() const {
  return activation_name(act_);
}

template <typename T>
Tensor<T> Upsample2x<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  Tensor<T> out(output_shape(x.shape()));
  const int ow = x.w() * 2;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < x.h(); ++y) {
        const T* src = &x.data()[((static_cast<std::size_t>(n) * x.c() + c) * x.h() + y) * x.w()];
        T* row0 = &out.at(n, c, 2 * y, 0);
        for (int xx = 0; xx < x.w(); ++xx) row0[2 * xx] = row0[2 * xx + 1] = src[xx];
        std::copy(row0, row0 + ow, row0 + ow);
      }
  return out;
}

template <typename T>
Tensor<T> Upsample2x<T>::backward(const Tensor<T>& grad_out) {
  require(grad_out.shape() == output_shape(in_shape_), "upsample backward: gradient shape mismatch");
  Tensor<T> g(in_shape_);
  for (int n = 0; n < in_shape_.n; ++n)
    for (int c = 0; c < in_shape_.c; ++c)
      for (int y = 0; y < in_shape_.h; ++y)
        for (int x = 0; x < in_shape_.w; ++x)
          g.at(n, c, y, x) = grad_out.at(n, c, 2 * y, 2 * x) + grad_out.at(n, c, 2 * y, 2 * x + 1) +
                             grad_out.at(n, c, 2 * y + 1, 2 * x) + grad_out.at(n, c, 2 * y + 1, 2 * x + 1);
  return g;
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  return x.reshaped(output_shape(x.shape()));
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& grad_out) {
  return grad_out.reshaped(in_shape_);
}

template <typename T>
std::string Reshape<T>::describe() const {
  return "reshape " + std::to_string(c_) + "x" + std::to_string(h_) + "x" + std::to_string(w_);
}

// ---------------------------------------------------------------- ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, int channels)
    : first_(name + ".conv0", {LayerKind::Conv, 3, 1, channels, channels, Activation::LeakyRelu}),
      second_(name + ".conv1", {LayerKind::Conv, 3, 1, channels, channels, Activation::None}) {}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> out = second_.forward(first_.forward(x));
  out += x;
  return out;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = first_.backward(second_.backward(grad_out));
  if (!this->propagate_input_) return {};
  g += grad_out;
  return g;
}

template <typename T>
std::string ResidualBlock<T>::describe() const {
  return "residual[" + first_.describe() + ", " + second_.describe() + "]";
}

template <typename T>
ParameterList<T> ResidualBlock<T>::parameters() {
  ParameterList<T> p = first_.parameters();
  for (auto* q : second_.parameters()) p.push_back(q);
  return p;
}

template <typename T>
void ResidualBlock<T>::initialize(std::uint64_t seed) {
  first_.initialize(derive_seed(seed, {0}));
  second_.initialize(derive_seed(seed, {1}));
}

template <typename T>
void ResidualBlock<T>::set_accumulate_param_grads(bool on) {
  Layer<T>::set_accumulate_param_grads(on);
  first_.set_accumulate_param_grads(on);
  second_.set_accumulate_param_grads(on);
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Sequential<T>& Sequential<T>::add(LayerPtr<T> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  return forward_prefix(x, layers_.size());
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  return backward_prefix(grad_out, layers_.size());
}

template <typename T>
Tensor<T> Sequential<T>::forward_prefix(const Tensor<T>& x, std::size_t count) {
  if (count == 0) return x;
  Tensor<T> h = layers_[0]->forward(x);
  for (std::size_t i = 1; i < count; ++i) h = layers_[i]->forward(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward_prefix(const Tensor<T>& grad_out, std::size_t count) {
  Tensor<T> g = grad_out;
  for (std::size_t i = count; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string out;
  for (const auto& l : layers_) {
    if (!out.empty()) out += "; ";
    out += l->describe();
  }
  return out;
}

template <typename T>
ParameterList<T> Sequential<T>::parameters() {
  ParameterList<T> p;
  for (auto& l : layers_)
    for (auto* q : l->parameters()) p.push_back(q);
  return p;
}

template <typename T>
void Sequential<T>::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->initialize(derive_seed(seed, {i}));
}

template <typename T>
void Sequential<T>::set_accumulate_param_grads(bool on) {
  Layer<T>::set_accumulate_param_grads(on);
  for (auto& l : layers_) l->set_accumulate_param_grads(on);
}

template <typename T>
void Sequential<T>::set_propagate_input_grad(bool on) {
  Layer<T>::set_propagate_input_grad(on);
  if (!layers_.empty()) layers_.front()->set_propagate_input_grad(on);
}

// ---------------------------------------------------------------- activation patterns

template <typename T>
void fold_signs(std::span<const T> values, std::uint64_t& h) {
  std::uint64_t word = 0;
  int bits = 0;
  for (T v : values) {
    word = (word << 1) | (v > T{0} ? 1U : 0U);
    if (++bits == 64) {
      h = mix_seed(h ^ word);
      word = 0;
      bits = 0;
    }
  }
  h = mix_seed(h ^ word ^ (static_cast<std::uint64_t>(bits) << 58));
}

template <typename T>
void Conv2d<T>::fold_activation_pattern(std::uint64_t& h) const {
  if (spec_.activation == Activation::LeakyRelu) fold_signs<T>(output_.values(), h);
}

template <typename T>
void Linear<T>::fold_activation_pattern(std::uint64_t& h) const {
  if (spec_.activation == Activation::LeakyRelu) fold_signs<T>(output_.values(), h);
}

template <typename T>
void ActivationLayer<T>::fold_activation_pattern(std::uint64_t& h) const {
  if (act_ == Activation::LeakyRelu) fold_signs<T>(output_.values(), h);
}

template <typename T>
void ResidualBlock<T>::fold_activation_pattern(std::uint64_t& h) const {
  first_.fold_activation_pattern(h);
  second_.fold_activation_pattern(h);
}

template <typename T>
void Sequential<T>::fold_activation_pattern(std::uint64_t& h) const {
  for (const auto& l : layers_) l->fold_activation_pattern(h);
}

// ---------------------------------------------------------------- helpers

template <typename T>
LayerPtr<T> make_layer(const std::string& name, const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv: return std::make_unique<Conv2d<T>>(name, spec);
    case LayerKind::UpsampleConv: {
      auto seq = std::make_unique<Sequential<T>>();
      seq->template emplace<Upsample2x<T>>();
      LayerSpec conv = spec;
      conv.kind = LayerKind::Conv;
      conv.stride = 1;
      seq->template emplace<Conv2d<T>>(name, conv);
      return seq;
    }
    case LayerKind::FullyConnected: return std::make_unique<Linear<T>>(name, spec);
    case LayerKind::ResidualBlock:
      require(spec.channels_in == spec.channels_out, name + ": residual block needs equal channel counts");
      return std::make_unique<ResidualBlock<T>>(name, spec.channels_in);
    case LayerKind::Activation: return std::make_unique<ActivationLayer<T>>(spec.activation);
  }
  throw std::invalid_argument(name + ": unknown layer kind");
}

template <typename T>
void zero_grads(const ParameterList<T>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename T>
std::size_t parameter_count(const ParameterList<T>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->size();
  return n;
}

#define FACN_INSTANTIATE(T)                                                              \
  template void apply_activation<T>(std::span<T>, Activation);                           \
  template void activation_backward<T>(std::span<T>, std::span<const T>, Activation);    \
  template void fold_signs<T>(std::span<const T>, std::uint64_t&);                       \
  template class Conv2d<T>;                                                              \
  template class Linear<T>;                                                              \
  template class ActivationLayer<T>;                                                     \
  template class Upsample2x<T>;                                                          \
  template class Reshape<T>;                                                             \
  template class ResidualBlock<T>;                                                       \
  template class Sequential<T>;                                                          \
  template LayerPtr<T> make_layer<T>(const std::string&, const LayerSpec&);              \
  template void zero_grads<T>(const ParameterList<T>&);                                  \
  template std::size_t parameter_count<T>(const ParameterList<T>&);

FACN_INSTANTIATE(float)
FACN_INSTANTIATE(double)
#undef FACN_INSTANTIATE

}  // namespace facn::nn
