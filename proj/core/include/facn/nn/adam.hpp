#pragma once

#include <cstdint>
#include <vector>

#include "facn/nn/parameter.hpp"

namespace facn::nn {

struct AdamOptions {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay. After the adaptive update each parameter
/// is shrunk by weight_decay * schedule_multiplier, where the multiplier is
/// the current learning rate relative to the base rate.
class Adam {
 public:
  Adam(ParameterList<float> params, AdamOptions options);

  void step(double learning_rate, double schedule_multiplier);
  void zero_grad();

  std::int64_t steps() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }
  const ParameterList<float>& parameters() const noexcept { return params_; }

  // Moment buffers, parallel to parameters(); exposed for checkpointing.
  std::vector<std::vector<float>>& first_moments() noexcept { return m_; }
  std::vector<std::vector<float>>& second_moments() noexcept { return v_; }
  void set_steps(std::int64_t steps) noexcept { steps_ = steps; }

 private:
  ParameterList<float> params_;
  AdamOptions options_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t steps_ = 0;
};

double gradient_norm(const ParameterList<float>& params);
double parameter_norm(const ParameterList<float>& params);

}  // namespace facn::nn
