#pragma once

#include "facn/model/generator.hpp"

namespace facn::model {

struct GeneratorLossTerms {
  double total = 0.0;
  double reconstruction = 0.0;  ///< MSE(y, y_hat), batch mean
  double coarse = 0.0;          ///< MSE(y, y_p), batch mean
  double kl = 0.0;              ///< batch mean of the per-sample KL sum
  double attribute = 0.0;       ///< batch mean of sum over supervised attributes of (a - a_hat)^2, before lambda
};

/// Mean over the batch of MSE(y, y_hat) + MSE(y, y_p) + KL + lambda * sum_{n<18} (a_n - a_hat_n)^2.
/// Terms a variant lacks (KL without PC, attributes in v3) are zero. `labels` is (n, 18) in {0,1};
/// it may be null only when the variant has no attribute branch. When `grads` is non-null it
/// receives d(total)/d(outputs).
template <typename T>
GeneratorLossTerms generator_loss(const ModelConfig& config, const GeneratorOutputs<T>& out, const Tensor<T>& hr,
                                  const Tensor<T>* labels, double lambda, GeneratorGradients<T>* grads);

/// Mean squared error; optionally writes scale * d(mse)/d(prediction) into grad.
template <typename T>
double mse(const Tensor<T>& target, const Tensor<T>& prediction, Tensor<T>* grad = nullptr, double scale = 1.0);

}  // namespace facn::model
