#include "facn/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "facn/common/rng.hpp"

namespace facn::nn {

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const std::function<double()>& loss, const std::function<void()>& compute_gradients,
                               const ParameterList<double>& params, const GradCheckOptions& options,
                               const std::function<std::uint64_t()>& pattern) {
  GradCheckResult result;
  zero_grads(params);
  compute_gradients();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.emplace_back(p->grad.begin(), p->grad.end());

  const double base = loss();
  if (!std::isfinite(base)) {
    result.finite = false;
    return result;
  }
  const double floor = options.denominator_floor * std::max(1.0, std::abs(base));

  Rng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = *params[pi];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates);
    }
    for (std::size_t idx : coords) {
      const double original = p.value[idx];
      double numeric = 0.0;
      bool usable = false;
      auto eval = [&](double offset) {
        p.value[idx] = original + offset;
        const double f = loss();
        const std::uint64_t h = pattern ? pattern() : 0;
        p.value[idx] = original;
        return std::pair{f, h};
      };
      double step = options.epsilon;
      for (int attempt = 0; attempt <= options.epsilon_refinements && !usable; ++attempt, step *= 0.1) {
        const auto plus = eval(step), minus = eval(-step);
        if (plus.second == minus.second) {
          numeric = (plus.first - minus.first) / (2.0 * step);
          usable = true;
          break;
        }
        // A kink lies within one step: use a one-sided second-order stencil on the side that
        // shares the linear piece of the unperturbed point.
        const auto centre = eval(0.0);
        for (double side : {1.0, -1.0}) {
          const auto& near = side > 0 ? plus : minus;
          if (near.second != centre.second) continue;
          const auto far = eval(2.0 * side * step);
          if (far.second != centre.second) continue;
          numeric = side * (-3.0 * centre.first + 4.0 * near.first - far.first) / (2.0 * step);
          usable = true;
          break;
        }
      }
      if (!usable) {
        ++result.skipped;
        continue;
      }
      const double a = analytic[pi][idx];
      ++result.coordinates;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        result.finite = false;
        result.worst_parameter = p.name;
        result.worst_index = idx;
        return result;
      }
      const double err = relative_error(a, numeric, floor);
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace facn::nn
