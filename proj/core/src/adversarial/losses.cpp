#include "facn/adversarial/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facn::adversarial {

namespace {

double clamp_probability(double p, bool& clamped) {
  const double c = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  clamped = c != p;
  return c;
}

}  // namespace

template <typename T>
double loss_discriminator(const Tensor<T>& real_prob, const Tensor<T>& fake_prob, Tensor<T>* grad_real,
                          Tensor<T>* grad_fake) {
  if (real_prob.size() != fake_prob.size() || real_prob.empty())
    throw std::invalid_argument("loss_discriminator: real and fake batches must be non-empty and equal in size");
  const double inv = 1.0 / static_cast<double>(real_prob.size());
  if (grad_real) *grad_real = Tensor<T>(real_prob.shape());
  if (grad_fake) *grad_fake = Tensor<T>(fake_prob.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < real_prob.size(); ++i) {
    bool clamped_real = false;
    bool clamped_fake = false;
    const double r = clamp_probability(real_prob[i], clamped_real);
    const double f = clamp_probability(fake_prob[i], clamped_fake);
    loss -= (std::log(r) + std::log(1.0 - f)) * inv;
    if (grad_real && !clamped_real) (*grad_real)[i] = static_cast<T>(-inv / r);
    if (grad_fake && !clamped_fake) (*grad_fake)[i] = static_cast<T>(inv / (1.0 - f));
  }
  return loss;
}

template <typename T>
double loss_adversarial_generator(const Tensor<T>& fake_prob, Tensor<T>* grad_fake) {
  if (fake_prob.empty()) throw std::invalid_argument("loss_adversarial_generator: empty batch");
  const double inv = 1.0 / static_cast<double>(fake_prob.size());
  if (grad_fake) *grad_fake = Tensor<T>(fake_prob.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < fake_prob.size(); ++i) {
    bool clamped = false;
    const double f = clamp_probability(fake_prob[i], clamped);
    loss -= std::log(f) * inv;
    if (grad_fake && !clamped) (*grad_fake)[i] = static_cast<T>(-inv / f);
  }
  return loss;
}

template <typename T>
double loss_perceptual(const Tensor<T>& real_features, const Tensor<T>& fake_features, Tensor<T>* grad_fake,
                       double scale) {
  if (real_features.shape() != fake_features.shape())
    throw std::invalid_argument("loss_perceptual: feature shapes differ");
  const double count = static_cast<double>(real_features.size());
  double sum = 0.0;
  if (grad_fake) *grad_fake = Tensor<T>(fake_features.shape());
  for (std::size_t i = 0; i < real_features.size(); ++i) {
    const double diff = static_cast<double>(fake_features[i]) - real_features[i];
    sum += diff * diff;
    if (grad_fake) (*grad_fake)[i] = static_cast<T>(2.0 * scale * diff / count);
  }
  return sum / count;
}

#define FACN_INSTANTIATE(T)                                                                               \
  template double loss_discriminator<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>*);     \
  template double loss_adversarial_generator<T>(const Tensor<T>&, Tensor<T>*);                           \
  template double loss_perceptual<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*, double);
FACN_INSTANTIATE(float)
FACN_INSTANTIATE(double)
#undef FACN_INSTANTIATE

}  // namespace facn::adversarial
