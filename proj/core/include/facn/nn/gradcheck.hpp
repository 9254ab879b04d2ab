#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "facn/nn/layers.hpp"

namespace facn::nn {

struct GradCheckOptions {
  double epsilon = 1e-4;
  /// When neither stencil fits between kinks the step is retried this many times, each time 10x
  /// smaller. Small steps trade kink skips for roundoff, so the default is off.
  int epsilon_refinements = 0;
  /// Tensors larger than this are checked on a random subset of this many coordinates.
  std::size_t max_coordinates = 200;
  std::uint64_t seed = 1;
  /// Gradients smaller than this times max(1, |loss|) are compared in absolute terms; finite
  /// differences of a large loss cannot resolve them any better.
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool finite = true;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Coordinates whose +-epsilon evaluations fell on different linear pieces.
  std::size_t skipped = 0;

  /// Fails when the error is too large or when kinks left too few usable coordinates.
  bool passed(double tolerance) const noexcept {
    return finite && max_relative_error < tolerance && skipped * 4 <= coordinates + skipped;
  }
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor) noexcept;

/// Central-difference check of every parameter in `params`.
///   loss               evaluates the scalar objective (forward only)
///   compute_gradients  runs forward + backward, accumulating into the (pre-zeroed) parameter grads
///   pattern            optional; hash of the piecewise-linear regions visited by the most recent loss()
///                      call. When the two central evaluations differ in pattern, a one-sided
///                      stencil on the unperturbed point's side is used instead;
///                      coordinates left without a usable stencil are counted in `skipped`.
/// Inputs can be checked too by exposing them as Parameters.
GradCheckResult gradient_check(const std::function<double()>& loss,
                               const std::function<void()>& compute_gradients,
                               const ParameterList<double>& params, const GradCheckOptions& options = {},
                               const std::function<std::uint64_t()>& pattern = {});

/// Test fixture: forwards unchanged but scales the input gradient by (1 + error).
template <typename T>
class FaultyBackward final : public Layer<T> {
 public:
  FaultyBackward(LayerPtr<T> inner, double error) : inner_(std::move(inner)), error_(error) {}

  Tensor<T> forward(const Tensor<T>& x) override { return inner_->forward(x); }
  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> g = inner_->backward(grad_out);
    for (T& v : g.values()) v *= static_cast<T>(1.0 + error_);
    return g;
  }
  Shape output_shape(const Shape& in) const override { return inner_->output_shape(in); }
  std::string describe() const override { return "faulty(" + inner_->describe() + ")"; }
  ParameterList<T> parameters() override { return inner_->parameters(); }
  void fold_activation_pattern(std::uint64_t& h) const override { inner_->fold_activation_pattern(h); }
  void initialize(std::uint64_t seed) override { inner_->initialize(seed); }

 private:
  LayerPtr<T> inner_;
  double error_;
};

}  // namespace facn::nn
