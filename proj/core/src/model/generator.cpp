#include "facn/model/generator.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "facn/common/rng.hpp"
#include "facn/model/capsules.hpp"

namespace facn::model {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

LayerSpec conv_spec(int in, int out, int stride, Activation act) {
  return {LayerKind::Conv, 3, stride, in, out, act};
}

LayerSpec fc_spec(int in, int out, Activation act) {
  return {LayerKind::FullyConnected, 1, 1, in, out, act};
}

// Per-component seed streams; variants share initial weights where they share structure.
enum SeedStream : std::uint64_t { kPreSr = 1, kEncoder, kSen, kAan, kPin, kRouting, kDecoder };

}  // namespace

template <typename T>
Tensor<T> upsample_bicubic(const Tensor<T>& x, int factor) {
  const auto wy = imaging::bicubic_weights(x.h(), x.h() * factor, false);
  const auto wx = imaging::bicubic_weights(x.w(), x.w() * factor, false);
  const int oh = x.h() * factor;
  const int ow = x.w() * factor;
  Tensor<T> out({x.n(), x.c(), oh, ow});
  std::vector<double> rows(static_cast<std::size_t>(oh) * x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* src = &x.data()[(static_cast<std::size_t>(n) * x.c() + c) * x.h() * x.w()];
      for (int oy = 0; oy < oh; ++oy)
        for (int ix = 0; ix < x.w(); ++ix) {
          double acc = 0.0;
          for (int t = 0; t < wy.taps; ++t) {
            const std::size_t s = static_cast<std::size_t>(oy) * wy.taps + t;
            acc += wy.weight[s] * src[static_cast<std::size_t>(wy.index[s]) * x.w() + ix];
          }
          rows[static_cast<std::size_t>(oy) * x.w() + ix] = acc;
        }
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int t = 0; t < wx.taps; ++t) {
            const std::size_t s = static_cast<std::size_t>(ox) * wx.taps + t;
            acc += wx.weight[s] * rows[static_cast<std::size_t>(oy) * x.w() + wx.index[s]];
          }
          out.at(n, c, oy, ox) = static_cast<T>(acc);
        }
    }
  return out;
}

// ---------------------------------------------------------------- CapsuleHead

template <typename T>
CapsuleHead<T>::CapsuleHead(const std::string& name, int width, int outputs, Activation output_activation) {
  for (int i = 0; i < 3; ++i)
    trunk_.template emplace<nn::Conv2d<T>>(name + ".conv" + std::to_string(i),
                                           conv_spec(width, width, 1, Activation::LeakyRelu));
  const int flat = width * ModelConfig::kFeatureExtent * ModelConfig::kFeatureExtent;
  fc_ = &trunk_.template emplace<nn::Linear<T>>(name + ".fc", fc_spec(flat, outputs, output_activation));
}

template <typename T>
Tensor<T> CapsuleHead<T>::forward(const Tensor<T>& features) {
  return trunk_.forward(features);
}

template <typename T>
Tensor<T> CapsuleHead<T>::backward(const Tensor<T>& grad_out) {
  return trunk_.backward(grad_out);
}

template <typename T>
nn::ParameterList<T> CapsuleHead<T>::parameters() {
  return trunk_.parameters();
}

template <typename T>
void CapsuleHead<T>::initialize(std::uint64_t seed) {
  trunk_.initialize(seed);
}

// ---------------------------------------------------------------- Generator

template <typename T>
Generator<T>::Generator(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int w = config_.width;

  pre_sr_.template emplace<nn::Conv2d<T>>("pre_sr.conv_in", conv_spec(3, w, 1, Activation::LeakyRelu));
  for (int i = 0; i < 3; ++i) pre_sr_.template emplace<nn::ResidualBlock<T>>("pre_sr.res" + std::to_string(i), w);
  pre_sr_.template emplace<nn::Conv2d<T>>("pre_sr.conv_out", conv_spec(w, 3, 1, Activation::None));
  pre_sr_.set_propagate_input_grad(false);  // fed by the fixed bicubic upsampler

  int in = 3;
  const auto strides = config_.encoder_strides();
  for (std::size_t i = 0; i < strides.size(); ++i) {
    encoder_.template emplace<nn::Conv2d<T>>("encoder.conv" + std::to_string(i),
                                             conv_spec(in, w, strides[i], Activation::LeakyRelu));
    in = w;
  }

  const int k = config_.k;
  if (config_.uses_routing()) {
    const int flat = w * ModelConfig::kFeatureExtent * ModelConfig::kFeatureExtent;
    routing_ = std::make_unique<CapsuleRouting<T>>("routing", flat, config_.primary_capsule_dim, k, config_.d,
                                                   config_.routing_iterations);
  } else {
    aan_ = std::make_unique<CapsuleHead<T>>("aan", w, k, Activation::Sigmoid);
    if (config_.has_semantic()) sen_ = std::make_unique<CapsuleHead<T>>("sen", w, k * config_.d, Activation::None);
    if (config_.has_probabilistic())
      pin_ = std::make_unique<CapsuleHead<T>>("pin", w, 2 * k * config_.pc_dim, Activation::None);
  }

  const int e = ModelConfig::kFeatureExtent;
  decoder_.template emplace<nn::Linear<T>>("decoder.fc", fc_spec(config_.decoder_input_width(), w * e * e,
                                                                 Activation::None));
  decoder_.template emplace<nn::Reshape<T>>(w, e, e);
  for (int i = 0; i < config_.decoder_upsamples(); ++i) {
    decoder_.template emplace<nn::Upsample2x<T>>();
    decoder_.template emplace<nn::Conv2d<T>>("decoder.up" + std::to_string(i),
                                             conv_spec(w, w, 1, Activation::LeakyRelu));
  }
  decoder_.template emplace<nn::Conv2d<T>>("decoder.conv_out", conv_spec(w, 3, 1, Activation::None));

  initialize(config_.seed);
}

template <typename T>
void Generator<T>::initialize(std::uint64_t seed) {
  pre_sr_.initialize(derive_seed(seed, {kPreSr}));
  encoder_.initialize(derive_seed(seed, {kEncoder}));
  if (sen_) sen_->initialize(derive_seed(seed, {kSen}));
  if (aan_) aan_->initialize(derive_seed(seed, {kAan}));
  if (pin_) pin_->initialize(derive_seed(seed, {kPin}));
  if (routing_) routing_->initialize(derive_seed(seed, {kRouting}));
  decoder_.initialize(derive_seed(seed, {kDecoder}));
}

template <typename T>
Tensor<T> Generator<T>::decode(const Tensor<T>& caps) {
  if (static_cast<int>(caps.shape().sample_size()) != config_.decoder_input_width())
    throw std::invalid_argument("decode: expected " + std::to_string(config_.decoder_input_width()) +
                                " capsule values per sample, got " + std::to_string(caps.shape().sample_size()));
  return decoder_.forward(caps);
}

template <typename T>
GeneratorOutputs<T> Generator<T>::forward(const Tensor<T>& lr, const Tensor<T>* eps) {
  const int s = config_.lr_size();
  if (lr.c() != 3 || lr.h() != s || lr.w() != s)
    throw std::invalid_argument("generator: expected LR input (n,3," + std::to_string(s) + "," + std::to_string(s) +
                                "), got " + lr.shape().str());
  const int k = config_.k;
  const int d = config_.d;
  const int pc = config_.pc_dim;

  GeneratorOutputs<T> out;
  out.lr_upsampled = upsample_bicubic(lr, config_.scale);
  out.coarse = pre_sr_.forward(out.lr_upsampled);
  out.features = encoder_.forward(out.coarse);

  if (routing_) {
    out.caps = routing_->forward(out.features);
  } else {
    out.attributes = aan_->forward(out.features);
    if (sen_) {
      out.primary = sen_->forward(out.features);
      out.semantic = activate_semantic(out.primary, out.attributes, d);
    }
    if (pin_) {
      const Tensor<T> stats = pin_->forward(out.features);
      const int m = k * pc;
      out.mu = leading_features(stats, m);
      out.logvar_raw = Tensor<T>(out.mu.shape());
      for (int n = 0; n < stats.n(); ++n) {
        auto src = stats.sample(n);
        std::copy(src.begin() + m, src.end(), out.logvar_raw.sample(n).begin());
      }
      out.logvar = clamp_logvar(out.logvar_raw);
      out.mu_hat = shift_mean(out.mu, out.attributes, pc);
      if (eps) {
        if (eps->shape() != out.mu.shape())
          throw std::invalid_argument("generator: eps must be " + out.mu.shape().str() + ", got " + eps->shape().str());
        out.eps = *eps;
      } else {
        out.eps = Tensor<T>(out.mu.shape());
      }
      out.probabilistic = reparameterize(out.mu_hat, out.logvar, out.eps);
    }
    switch (config_.variant) {
      case Variant::Full: out.caps = assemble_fac(out.semantic, out.probabilistic, k, d, pc); break;
      case Variant::V1: out.caps = out.semantic; break;
      case Variant::V2: out.caps = out.probabilistic; break;
      case Variant::V3: break;
    }
  }
  out.output = decoder_.forward(out.caps);

  last_ = GeneratorOutputs<T>{};
  last_.features = Tensor<T>(out.features.shape());
  last_.primary = out.primary;
  last_.attributes = out.attributes;
  last_.logvar_raw = out.logvar_raw;
  last_.logvar = out.logvar;
  last_.eps = out.eps;
  last_.caps = Tensor<T>(out.caps.shape());
  last_.output = Tensor<T>(out.output.shape());
  last_.coarse = Tensor<T>(out.coarse.shape());
  return out;
}

template <typename T>
void Generator<T>::backward(const GeneratorGradients<T>& grads) {
  if (last_.output.empty()) throw std::logic_error("generator: backward() without a preceding forward()");
  const int k = config_.k;
  const int d = config_.d;
  const int pc = config_.pc_dim;

  const Tensor<T> g_out = grads.output.empty() ? Tensor<T>(last_.output.shape()) : grads.output;
  const Tensor<T> g_caps = decoder_.backward(g_out);
  Tensor<T> g_features(last_.features.shape());

  if (routing_) {
    g_features += routing_->backward(g_caps);
  } else {
    Tensor<T> g_attr = grads.attributes.empty() ? Tensor<T>(last_.attributes.shape()) : grads.attributes;
    Tensor<T> g_sem, g_prob;
    switch (config_.variant) {
      case Variant::Full: std::tie(g_sem, g_prob) = split_fac(g_caps, k, d, pc); break;
      case Variant::V1: g_sem = g_caps; break;
      case Variant::V2: g_prob = g_caps; break;
      case Variant::V3: break;
    }
    if (sen_) {
      auto [g_primary, g_a] = activate_semantic_backward(last_.primary, last_.attributes, d, g_sem);
      g_attr += g_a;
      g_features += sen_->backward(g_primary);
    }
    if (pin_) {
      auto [g_mu_hat, g_logvar] = reparameterize_backward(last_.logvar, last_.eps, g_prob);
      if (!grads.logvar.empty()) g_logvar += grads.logvar;
      Tensor<T> g_mu = g_mu_hat;
      if (!grads.mu.empty()) g_mu += grads.mu;
      g_attr += shift_mean_backward_attributes(g_mu_hat, pc);
      const Tensor<T> g_raw = clamp_logvar_backward(last_.logvar_raw, g_logvar);
      const int m = k * pc;
      Tensor<T> g_stats({g_mu.n(), 2 * m, 1, 1});
      for (int n = 0; n < g_mu.n(); ++n) {
        auto dst = g_stats.sample(n);
        auto a = g_mu.sample(n);
        auto b = g_raw.sample(n);
        std::copy(a.begin(), a.end(), dst.begin());
        std::copy(b.begin(), b.end(), dst.begin() + m);
      }
      g_features += pin_->backward(g_stats);
    }
    g_features += aan_->backward(g_attr);
  }

  Tensor<T> g_coarse = encoder_.backward(g_features);
  if (!grads.coarse.empty()) g_coarse += grads.coarse;
  pre_sr_.backward(g_coarse);
}

template <typename T>
std::uint64_t Generator<T>::activation_pattern() const {
  std::uint64_t h = 0;
  pre_sr_.fold_activation_pattern(h);
  encoder_.fold_activation_pattern(h);
  if (sen_) sen_->fold_activation_pattern(h);
  if (aan_) aan_->fold_activation_pattern(h);
  if (pin_) pin_->fold_activation_pattern(h);
  decoder_.fold_activation_pattern(h);
  std::vector<T> region;
  region.reserve(last_.logvar_raw.size() * 2);
  for (T v : last_.logvar_raw.values()) {
    region.push_back(v - static_cast<T>(kLogVarianceLimit));
    region.push_back(v + static_cast<T>(kLogVarianceLimit));
  }
  nn::fold_signs<T>(region, h);
  return h;
}

template <typename T>
nn::ParameterList<T> Generator<T>::capsule_block_parameters() {
  nn::ParameterList<T> p;
  auto append = [&p](nn::ParameterList<T> more) { p.insert(p.end(), more.begin(), more.end()); };
  if (sen_) append(sen_->parameters());
  if (aan_) append(aan_->parameters());
  if (pin_) append(pin_->parameters());
  if (routing_) append(routing_->parameters());
  return p;
}

template <typename T>
nn::ParameterList<T> Generator<T>::parameters() {
  nn::ParameterList<T> p = pre_sr_.parameters();
  auto append = [&p](nn::ParameterList<T> more) { p.insert(p.end(), more.begin(), more.end()); };
  append(encoder_.parameters());
  append(capsule_block_parameters());
  append(decoder_.parameters());
  return p;
}

template Tensor<float> upsample_bicubic<float>(const Tensor<float>&, int);
template Tensor<double> upsample_bicubic<double>(const Tensor<double>&, int);
template class CapsuleHead<float>;
template class CapsuleHead<double>;
template class Generator<float>;
template class Generator<double>;

}  // namespace facn::model
