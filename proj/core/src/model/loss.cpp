#include "facn/model/loss.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "facn/model/capsules.hpp"

namespace facn::model {

template <typename T>
double mse(const Tensor<T>& target, const Tensor<T>& prediction, Tensor<T>* grad, double scale) {
  if (target.shape() != prediction.shape())
    throw std::invalid_argument("mse: shapes differ " + target.shape().str() + " vs " + prediction.shape().str());
  const double count = static_cast<double>(target.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double diff = static_cast<double>(prediction[i]) - target[i];
    sum += diff * diff;
  }
  if (grad) {
    *grad = Tensor<T>(prediction.shape());
    const double g = 2.0 * scale / count;
    for (std::size_t i = 0; i < target.size(); ++i)
      (*grad)[i] = static_cast<T>(g * (static_cast<double>(prediction[i]) - target[i]));
  }
  return sum / count;
}

template <typename T>
GeneratorLossTerms generator_loss(const ModelConfig& config, const GeneratorOutputs<T>& out, const Tensor<T>& hr,
                                  const Tensor<T>* labels, double lambda, GeneratorGradients<T>* grads) {
  GeneratorLossTerms terms;
  const int batch = hr.n();
  const double inv_batch = 1.0 / batch;

  // Images share one size, so the batch mean of per-image MSE is the MSE over the batch.
  terms.reconstruction = mse(hr, out.output, grads ? &grads->output : nullptr);
  terms.coarse = mse(hr, out.coarse, grads ? &grads->coarse : nullptr);

  if (config.has_probabilistic()) {
    const auto kl = kl_divergence(out.mu, out.logvar);
    for (double v : kl) terms.kl += v * inv_batch;
    if (grads) std::tie(grads->mu, grads->logvar) = kl_divergence_backward(out.mu, out.logvar, inv_batch);
  }

  if (config.has_attributes() && config.supervised_attributes > 0) {
    const int supervised = config.supervised_attributes;
    if (!labels) throw std::invalid_argument("generator_loss: attribute labels are required for this variant");
    if (labels->n() != batch || static_cast<int>(labels->shape().sample_size()) < supervised)
      throw std::invalid_argument("generator_loss: labels must be (n, " + std::to_string(supervised) + ")");
    if (grads) grads->attributes = Tensor<T>(out.attributes.shape());
    for (int n = 0; n < batch; ++n) {
      auto a = labels->sample(n);
      auto est = out.attributes.sample(n);
      for (int i = 0; i < supervised; ++i) {
        const double diff = static_cast<double>(est[i]) - a[i];
        terms.attribute += diff * diff * inv_batch;
        if (grads) grads->attributes.sample(n)[i] = static_cast<T>(2.0 * lambda * diff * inv_batch);
      }
    }
  }

  terms.total = terms.reconstruction + terms.coarse + terms.kl + lambda * terms.attribute;
  return terms;
}

template double mse<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*, double);
template double mse<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*, double);
template GeneratorLossTerms generator_loss<float>(const ModelConfig&, const GeneratorOutputs<float>&,
                                                  const Tensor<float>&, const Tensor<float>*, double,
                                                  GeneratorGradients<float>*);
template GeneratorLossTerms generator_loss<double>(const ModelConfig&, const GeneratorOutputs<double>&,
                                                   const Tensor<double>&, const Tensor<double>*, double,
                                                   GeneratorGradients<double>*);

}  // namespace facn::model
