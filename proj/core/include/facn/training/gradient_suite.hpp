#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facn/model/config.hpp"
#include "facn/nn/gradcheck.hpp"

namespace facn::training {

struct GradSuiteOptions {
  nn::GradCheckOptions check;
  double tolerance = 1e-4;
  /// Adds a negative-control entry whose backward pass is deliberately wrong.
  bool corrupt = false;
  std::uint64_t seed = 1;
};

struct GradSuiteEntry {
  std::string scope;
  std::string name;
  nn::GradCheckResult result;
  double seconds = 0.0;

  bool passed(double tolerance) const noexcept { return result.passed(tolerance); }
};

/// layers, encoder, cgb, decoder, discriminator, full-loss
const std::vector<std::string>& gradient_scopes();

/// Small double-precision model used by the finite-difference suite.
model::ModelConfig gradcheck_model_config(model::Variant variant);

/// Runs every check of one scope ("all" runs every scope). Throws std::invalid_argument for unknown scopes.
std::vector<GradSuiteEntry> run_gradient_suite(const std::string& scope, const GradSuiteOptions& options = {});

}  // namespace facn::training
