#include "facn/nn/init.hpp"

#include <cmath>
#include <random>

#include "facn/common/rng.hpp"

namespace facn::nn {

template <typename T>
void he_fill(Parameter<T>& weight, Parameter<T>& bias, int fan_in, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (T& v : weight.value) v = static_cast<T>(normal(rng));
  std::fill(bias.value.begin(), bias.value.end(), T{0});
  weight.zero_grad();
  bias.zero_grad();
}

template <typename T>
InitializedParameters<T> he_init(const LayerSpec& spec, std::uint64_t seed, const std::string& name) {
  InitializedParameters<T> p;
  if (spec.kind == LayerKind::FullyConnected) {
    p.weight = Parameter<T>(name + ".weight", {spec.channels_out, spec.channels_in});
  } else {
    p.weight = Parameter<T>(name + ".weight", {spec.channels_out, spec.channels_in, spec.kernel, spec.kernel});
  }
  p.bias = Parameter<T>(name + ".bias", {spec.channels_out});
  he_fill(p.weight, p.bias, spec.fan_in(), seed);
  return p;
}

template void he_fill<float>(Parameter<float>&, Parameter<float>&, int, std::uint64_t);
template void he_fill<double>(Parameter<double>&, Parameter<double>&, int, std::uint64_t);
template InitializedParameters<float> he_init<float>(const LayerSpec&, std::uint64_t, const std::string&);
template InitializedParameters<double> he_init<double>(const LayerSpec&, std::uint64_t, const std::string&);

}  // namespace facn::nn
