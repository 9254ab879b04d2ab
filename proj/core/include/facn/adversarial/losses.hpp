#pragma once

#include "facn/nn/tensor.hpp"

namespace facn::adversarial {

using nn::Tensor;

inline constexpr double kProbabilityClamp = 1e-7;

struct AdversarialWeights {
  double gamma_d = 0.01;
  double gamma_p = 0.01;
};

/// Batch mean of -[log D(y,x) + log(1 - D(y_hat,x))], probabilities clamped to [1e-7, 1 - 1e-7].
/// Gradients are with respect to the probabilities; zero where clamping is active.
template <typename T>
double loss_discriminator(const Tensor<T>& real_prob, const Tensor<T>& fake_prob, Tensor<T>* grad_real = nullptr,
                          Tensor<T>* grad_fake = nullptr);

/// Batch mean of -log D(y_hat,x).
template <typename T>
double loss_adversarial_generator(const Tensor<T>& fake_prob, Tensor<T>* grad_fake = nullptr);

/// Mean squared distance between feature maps; the gradient is with respect to fake_features.
template <typename T>
double loss_perceptual(const Tensor<T>& real_features, const Tensor<T>& fake_features,
                       Tensor<T>* grad_fake = nullptr, double scale = 1.0);

inline double total_generator_objective(double generator_loss, double adversarial, double perceptual,
                                        const AdversarialWeights& w) noexcept {
  return generator_loss + w.gamma_d * adversarial + w.gamma_p * perceptual;
}

}  // namespace facn::adversarial
