#pragma once

#include <utility>
#include <vector>

#include "facn/nn/tensor.hpp"

// Capsule-block operations on batched vectors stored as (n, features, 1, 1).
// Each forward has a matching *_backward that maps output gradients to input gradients.

namespace facn::model {

using nn::Tensor;

inline constexpr double kNormFloor = 1e-8;
inline constexpr double kLogVarianceLimit = 10.0;

/// C_s,i = a_tt[i] * C_pr,i / max(|C_pr,i|, 1e-8). primary is (n, k*d), attributes (n, k).
template <typename T>
Tensor<T> activate_semantic(const Tensor<T>& primary, const Tensor<T>& attributes, int d);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> activate_semantic_backward(const Tensor<T>& primary, const Tensor<T>& attributes,
                                                           int d, const Tensor<T>& grad_out);

/// Non-negative KL(N(mu, exp(logvar)) || N(0,1)) summed over features, one value per sample.
template <typename T>
std::vector<double> kl_divergence(const Tensor<T>& mu, const Tensor<T>& logvar);

/// Scalar convenience overload for a single sample.
double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar);

/// Gradients of scale * sum_i KL_i with respect to mu and logvar.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> kl_divergence_backward(const Tensor<T>& mu, const Tensor<T>& logvar, double scale);

/// mu_hat = mu + a_tt, with a_tt[i] broadcast over the pc_dim entries of capsule i.
template <typename T>
Tensor<T> shift_mean(const Tensor<T>& mu, const Tensor<T>& attributes, int pc_dim);

/// Gradient for the attributes (the mu gradient passes through unchanged).
template <typename T>
Tensor<T> shift_mean_backward_attributes(const Tensor<T>& grad_out, int pc_dim);

/// C_p = mu_hat + eps * exp(logvar / 2). eps is an input, not a differentiable quantity.
template <typename T>
Tensor<T> reparameterize(const Tensor<T>& mu_hat, const Tensor<T>& logvar, const Tensor<T>& eps);

/// Returns (d/d mu_hat, d/d logvar).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> reparameterize_backward(const Tensor<T>& logvar, const Tensor<T>& eps,
                                                        const Tensor<T>& grad_out);

template <typename T>
Tensor<T> clamp_logvar(const Tensor<T>& raw);

template <typename T>
Tensor<T> clamp_logvar_backward(const Tensor<T>& raw, const Tensor<T>& grad_out);

/// Capsule-major concatenation [SC_i (d) | PC_i (pc_dim)] for i = 0..k-1.
template <typename T>
Tensor<T> assemble_fac(const Tensor<T>& semantic, const Tensor<T>& probabilistic, int k, int d, int pc_dim);

/// Inverse of assemble_fac.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_fac(const Tensor<T>& caps, int k, int d, int pc_dim);

/// First `count` features of each sample.
template <typename T>
Tensor<T> leading_features(const Tensor<T>& t, int count);

}  // namespace facn::model
