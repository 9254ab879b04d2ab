#include "facn/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "facn/nn/tensor.hpp"

namespace facn::nn {

Adam::Adam(ParameterList<float> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0))
    throw std::invalid_argument("Adam: betas must lie in [0,1)");
  if (!(options_.weight_decay >= 0.0)) throw std::invalid_argument("Adam: weight decay must be >= 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    m_.emplace_back(p->size(), 0.0f);
    v_.emplace_back(p->size(), 0.0f);
  }
}

void Adam::step(double learning_rate, double schedule_multiplier) {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const float step_size = static_cast<float>(learning_rate / correction1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
  const float eps = static_cast<float>(options_.epsilon);
  const float keep = static_cast<float>(1.0 - options_.weight_decay * schedule_multiplier);
  const float fb1 = static_cast<float>(b1);
  const float fb2 = static_cast<float>(b2);

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float g = p.grad[j];
      m[j] = fb1 * m[j] + (1.0f - fb1) * g;
      v[j] = fb2 * v[j] + (1.0f - fb2) * g * g;
      p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
      p.value[j] *= keep;
    }
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double gradient_norm(const ParameterList<float>& params) {
  double s = 0.0;
  for (auto* p : params) s += squared_norm<float>(p->grad);
  return std::sqrt(s);
}

double parameter_norm(const ParameterList<float>& params) {
  double s = 0.0;
  for (auto* p : params) s += squared_norm<float>(p->value);
  return std::sqrt(s);
}

}  // namespace facn::nn
