#include "facn/training/config_file.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "facn/common/error.hpp"

namespace facn::training {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Number>
Number parse_number(const std::string& key, const std::string& value) {
  Number out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) throw ParseError("config key '" + key + "': invalid number '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ParseError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

struct KeyHandler {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename Field>
KeyHandler int_key(std::string key, Field TrainConfig::*field) {
  return {key,
          [key, field](TrainConfig& c, const std::string& v) { c.*field = parse_number<Field>(key, v); },
          [field](const TrainConfig& c) { return std::to_string(c.*field); }};
}

KeyHandler double_key(std::string key, double& (*ref)(TrainConfig&)) {
  return {key, [key, ref](TrainConfig& c, const std::string& v) { ref(c) = parse_number<double>(key, v); },
          [ref](const TrainConfig& c) { return format_double(ref(const_cast<TrainConfig&>(c))); }};
}

KeyHandler model_int_key(std::string key, int model::ModelConfig::*field) {
  return {key, [key, field](TrainConfig& c, const std::string& v) { c.model.*field = parse_number<int>(key, v); },
          [field](const TrainConfig& c) { return std::to_string(c.model.*field); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> h;
    h.push_back({"dataset.dir", [](TrainConfig& c, const std::string& v) { c.dataset_dir = v; },
                 [](const TrainConfig& c) { return c.dataset_dir; }});
    h.push_back({"dataset.attributes", [](TrainConfig& c, const std::string& v) { c.dataset_attributes = v; },
                 [](const TrainConfig& c) { return c.dataset_attributes; }});
    h.push_back(int_key("dataset.train", &TrainConfig::dataset_train));
    h.push_back(int_key("dataset.test", &TrainConfig::dataset_test));

    h.push_back({"model.variant",
                 [](TrainConfig& c, const std::string& v) {
                   try {
                     c.model.variant = model::parse_variant(v);
                   } catch (const std::exception& e) {
                     throw ParseError(std::string("config key 'model.variant': ") + e.what());
                   }
                 },
                 [](const TrainConfig& c) { return std::string(model::to_string(c.model.variant)); }});
    h.push_back(model_int_key("model.hr_size", &model::ModelConfig::hr_size));
    h.push_back(model_int_key("model.width", &model::ModelConfig::width));
    h.push_back(model_int_key("model.k", &model::ModelConfig::k));
    h.push_back(model_int_key("model.d", &model::ModelConfig::d));
    h.push_back(model_int_key("model.pc_dim", &model::ModelConfig::pc_dim));
    h.push_back(model_int_key("model.supervised_attributes", &model::ModelConfig::supervised_attributes));
    h.push_back(model_int_key("model.routing_iterations", &model::ModelConfig::routing_iterations));

    h.push_back({"degradation.kind",
                 [](TrainConfig& c, const std::string& v) {
                   try {
                     const auto kind = imaging::parse_degradation_kind(v);
                     // Switching the model resets the model-specific defaults.
                     c.degradation = imaging::DegradationSpec::make(kind);
                   } catch (const std::exception& e) {
                     throw ParseError(std::string("config key 'degradation.kind': ") + e.what());
                   }
                 },
                 [](const TrainConfig& c) { return std::string(imaging::to_string(c.degradation.kind)); }});
    h.push_back(double_key("degradation.noise_level", [](TrainConfig& c) -> double& { return c.degradation.noise_level; }));
    h.push_back(double_key("degradation.blur_sigma", [](TrainConfig& c) -> double& { return c.degradation.blur_sigma; }));
    h.push_back({"degradation.blur_size",
                 [](TrainConfig& c, const std::string& v) {
                   c.degradation.blur_size = parse_number<int>("degradation.blur_size", v);
                 },
                 [](const TrainConfig& c) { return std::to_string(c.degradation.blur_size); }});

    h.push_back(int_key("train.batch_size", &TrainConfig::batch_size));
    h.push_back(double_key("train.learning_rate", [](TrainConfig& c) -> double& { return c.learning_rate; }));
    h.push_back(int_key("train.halving_epochs", &TrainConfig::halving_epochs));
    h.push_back(double_key("train.beta1", [](TrainConfig& c) -> double& { return c.adam.beta1; }));
    h.push_back(double_key("train.beta2", [](TrainConfig& c) -> double& { return c.adam.beta2; }));
    h.push_back(double_key("train.weight_decay", [](TrainConfig& c) -> double& { return c.adam.weight_decay; }));
    h.push_back(double_key("train.lambda", [](TrainConfig& c) -> double& { return c.lambda; }));
    h.push_back(int_key("train.epochs", &TrainConfig::epochs));
    h.push_back(int_key("train.max_steps", &TrainConfig::max_steps));

    h.push_back({"adversarial.enabled",
                 [](TrainConfig& c, const std::string& v) { c.adversarial = parse_bool("adversarial.enabled", v); },
                 [](const TrainConfig& c) { return std::string(c.adversarial ? "true" : "false"); }});
    h.push_back(double_key("adversarial.gamma_d", [](TrainConfig& c) -> double& { return c.gan_weights.gamma_d; }));
    h.push_back(double_key("adversarial.gamma_p", [](TrainConfig& c) -> double& { return c.gan_weights.gamma_p; }));
    h.push_back(int_key("adversarial.width", &TrainConfig::disc_width));
    h.push_back(int_key("adversarial.hidden", &TrainConfig::disc_hidden));

    h.push_back(int_key("seed", &TrainConfig::seed));
    return h;
  }();
  return table;
}

const KeyHandler* find_handler(const std::string& key) {
  for (const auto& h : handlers())
    if (h.key == key) return &h;
  return nullptr;
}

}  // namespace

adversarial::DiscriminatorConfig TrainConfig::discriminator() const {
  adversarial::DiscriminatorConfig d;
  d.hr_size = model.hr_size;
  d.width = disc_width;
  d.hidden = disc_hidden;
  d.seed = model.seed ^ 0x9e3779b97f4a7c15ULL;
  return d;
}

imaging::DegradationSpec TrainConfig::degradation_for(std::uint64_t sample_seed) const {
  imaging::DegradationSpec spec = degradation;
  spec.hr_size = model.hr_size;
  spec.scale = model.scale;
  spec.seed = sample_seed;
  return spec;
}

std::filesystem::path TrainConfig::attribute_table() const {
  if (!dataset_attributes.empty()) return dataset_attributes;
  return std::filesystem::path(dataset_dir) / "attributes.txt";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ParseError("config key '" + key + "': " + what);
  };
  if (dataset_dir.empty()) fail("dataset.dir", "required key is missing");
  if (dataset_train < 0) fail("dataset.train", "must be >= 0");
  if (dataset_test < 0) fail("dataset.test", "must be >= 0");
  if (batch_size <= 0) fail("train.batch_size", "must be positive");
  if (!(learning_rate > 0)) fail("train.learning_rate", "must be positive");
  if (halving_epochs <= 0) fail("train.halving_epochs", "must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) fail("train.beta1", "must lie in [0,1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) fail("train.beta2", "must lie in [0,1)");
  if (!(adam.weight_decay >= 0)) fail("train.weight_decay", "must be >= 0");
  if (!(lambda >= 0)) fail("train.lambda", "must be >= 0");
  if (epochs <= 0) fail("train.epochs", "must be positive");
  if (max_steps < 0) fail("train.max_steps", "must be >= 0");
  if (!(gan_weights.gamma_d >= 0)) fail("adversarial.gamma_d", "must be >= 0");
  if (!(gan_weights.gamma_p >= 0)) fail("adversarial.gamma_p", "must be >= 0");
  try {
    model.validate();
    degradation_for(0).validate();
    if (adversarial) discriminator().validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

std::string env_name(const std::string& key) {
  std::string out = "FACN_";
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const KeyHandler* h = find_handler(key);
  if (!h) throw ParseError("unknown config key '" + key + "'");
  h->set(config, value);
  if (key == "seed") config.model.seed = config.seed;
}

TrainConfig parse_train_config(const std::string& text, const EnvLookup& env, const std::string& source) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  // degradation.kind resets the noise defaults, so it is applied before the other keys.
  std::vector<std::pair<std::string, std::string>> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!find_handler(key))
      throw ParseError(source + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(value));
  }
  if (env)
    for (const auto& key : config_keys())
      if (auto v = env(env_name(key))) entries.emplace_back(key, trim(*v));

  for (const auto& [key, value] : entries)
    if (key == "degradation.kind") set_config_value(config, key, value);
  for (const auto& [key, value] : entries)
    if (key != "degradation.kind") set_config_value(config, key, value);
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), env, path.string());
}

std::map<std::string, std::string> config_values(const TrainConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& h : handlers()) out[h.key] = h.get(config);
  return out;
}

std::string to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& h : handlers()) out += h.key + " = " + h.get(config) + "\n";
  return out;
}

}  // namespace facn::training
