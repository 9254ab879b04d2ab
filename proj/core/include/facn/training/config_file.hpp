#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facn/adversarial/discriminator.hpp"
#include "facn/adversarial/losses.hpp"
#include "facn/imaging/degradation.hpp"
#include "facn/model/config.hpp"
#include "facn/nn/adam.hpp"

namespace facn::training {

/// Every tunable of a training run. Field defaults are the reference settings.
struct TrainConfig {
  std::string dataset_dir;         ///< dataset.dir (required)
  std::string dataset_attributes;  ///< dataset.attributes; empty means <dataset.dir>/attributes.txt
  int dataset_train = 0;           ///< images in the training split; 0 takes all not used for testing
  int dataset_test = 0;

  model::ModelConfig model;
  imaging::DegradationSpec degradation = imaging::DegradationSpec::make(imaging::DegradationKind::BicN);

  int batch_size = 16;
  double learning_rate = 3e-4;
  int halving_epochs = 20;
  nn::AdamOptions adam;
  double lambda = 1.0;
  int epochs = 1;
  std::int64_t max_steps = 0;  ///< 0: no step limit

  bool adversarial = true;
  adversarial::AdversarialWeights gan_weights;
  int disc_width = 64;
  int disc_hidden = 256;

  std::uint64_t seed = 1;

  /// Derived pieces with the shared seed and image size filled in.
  adversarial::DiscriminatorConfig discriminator() const;
  imaging::DegradationSpec degradation_for(std::uint64_t sample_seed) const;
  std::filesystem::path attribute_table() const;

  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// `FACN_` + key uppercased with dots replaced by underscores.
std::string env_name(const std::string& key);

/// All recognised keys, in canonical order.
const std::vector<std::string>& config_keys();

/// Parses flat `key = value` text. Unknown keys, malformed lines and bad values throw ParseError
/// naming the key (and line). Environment overrides from `env` are applied last; dataset.dir must
/// end up set.
TrainConfig parse_train_config(const std::string& text, const EnvLookup& env = {}, const std::string& source = "config");
TrainConfig load_train_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

/// Applies one key; throws ParseError for unknown keys or bad values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
std::map<std::string, std::string> config_values(const TrainConfig& config);
/// Canonical `key = value` text that parses back to the same config.
std::string to_text(const TrainConfig& config);

}  // namespace facn::training
