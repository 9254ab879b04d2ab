#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facn/nn/layers.hpp"

namespace facn::model {

inline constexpr double kSquashEpsilon = 1e-12;

/// squash(s) = |s|^2 / (1 + |s|^2) * s / |s|, with |s| taken as sqrt(|s|^2 + 1e-12).
std::vector<double> squash(const std::vector<double>& s);
std::vector<double> squash_backward(const std::vector<double>& s, const std::vector<double>& grad_out);

struct RoutingProblem {
  int in_caps = 0;
  int in_dim = 0;
  int out_caps = 0;
  int out_dim = 0;
  int iterations = 3;
};

/// Forward intermediates kept for the backward pass.
struct RoutingTrace {
  std::vector<double> predictions;                ///< u_hat[i][j][:]
  std::vector<std::vector<double>> coupling;      ///< c per iteration, in_caps x out_caps
  std::vector<std::vector<double>> weighted_sum;  ///< s per iteration, out_caps x out_dim
  std::vector<std::vector<double>> outputs;       ///< v per iteration, out_caps x out_dim
};

/// Routing-by-agreement for one sample.
///   u        in_caps x in_dim, row-major
///   weights  in_caps x out_caps x out_dim x in_dim; u_hat[i][j] = W[i][j] * u[i]
/// Logits start at zero; each iteration computes c = softmax over outputs, s_j = sum_i c_ij u_hat[i][j],
/// v_j = squash(s_j), then (except after the last) b_ij += u_hat[i][j] . v_j. Returns out_caps x out_dim.
std::vector<double> dynamic_routing(const RoutingProblem& shape, const std::vector<double>& u,
                                    const std::vector<double>& weights, RoutingTrace* trace = nullptr);

/// Exact reverse pass through every routing iteration. Accumulates into grad_u and grad_weights.
void dynamic_routing_backward(const RoutingProblem& shape, const std::vector<double>& u,
                              const std::vector<double>& weights, const RoutingTrace& trace,
                              const std::vector<double>& grad_out, std::vector<double>& grad_u,
                              std::vector<double>& grad_weights);

/// Classic capsule block: encoded features are regrouped into primary capsules
/// of primary_dim values (squashed), then routed to out_caps capsules of out_dim values.
/// Input (n, C, H, W) with C*H*W = in_features; output (n, out_caps*out_dim, 1, 1).
template <typename T>
class CapsuleRouting final : public nn::Layer<T> {
 public:
  CapsuleRouting(std::string name, int in_features, int primary_dim, int out_caps, int out_dim, int iterations);

  nn::Tensor<T> forward(const nn::Tensor<T>& x) override;
  nn::Tensor<T> backward(const nn::Tensor<T>& grad_out) override;
  nn::Shape output_shape(const nn::Shape& in) const override { return {in.n, problem_.out_caps * problem_.out_dim, 1, 1}; }
  std::string describe() const override;
  nn::ParameterList<T> parameters() override { return {&weight_}; }
  void initialize(std::uint64_t seed) override;

  nn::Parameter<T>& weight() noexcept { return weight_; }
  const RoutingProblem& problem() const noexcept { return problem_; }

 private:
  RoutingProblem problem_;
  nn::Parameter<T> weight_;
  nn::Shape in_shape_;
  std::vector<std::vector<double>> primary_;  // pre-squash, per sample
  std::vector<std::vector<double>> squashed_;
  std::vector<RoutingTrace> traces_;
};

}  // namespace facn::model
