#pragma once

#include <cstdint>
#include <string>

#include "facn/nn/layers.hpp"
#include "facn/nn/parameter.hpp"

namespace facn::nn {

template <typename T>
struct InitializedParameters {
  Parameter<T> weight;
  Parameter<T> bias;
};

/// Plain He initialization: weights ~ N(0, 2 / fan_in), zero bias. Deterministic per seed.
template <typename T>
InitializedParameters<T> he_init(const LayerSpec& spec, std::uint64_t seed, const std::string& name = "layer");

/// Fills an existing weight/bias pair in place.
template <typename T>
void he_fill(Parameter<T>& weight, Parameter<T>& bias, int fan_in, std::uint64_t seed);

}  // namespace facn::nn
