#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "facn/nn/aligned.hpp"

namespace facn::nn {

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> dims;
  Buffer<T> value;
  Buffer<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> d) : name(std::move(n)), dims(std::move(d)) {
    std::size_t count = 1;
    for (int v : dims) count *= static_cast<std::size_t>(v);
    value.assign(count, T{0});
    grad.assign(count, T{0});
  }

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

}  // namespace facn::nn
