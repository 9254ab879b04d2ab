#include "facn/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "facn/adversarial/losses.hpp"
#include "facn/common/error.hpp"
#include "facn/common/rng.hpp"
#include "facn/imaging/degradation.hpp"

namespace facn::training {

namespace {

enum Stream : std::uint64_t { kShuffle = 11, kDegrade = 12, kEps = 13 };

constexpr const char* kFormat = "facn-trainer-1";

nn::Tensor<float> stack_batches(const nn::Tensor<float>& a, const nn::Tensor<float>& b) {
  nn::Tensor<float> out({a.n() + b.n(), a.c(), a.h(), a.w()});
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

nn::Tensor<float> batch_range(const nn::Tensor<float>& t, int begin, int count) {
  nn::Tensor<float> out({count, t.c(), t.h(), t.w()});
  const auto per = t.shape().sample_size();
  std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(begin * per), count * per, out.values().begin());
  return out;
}

void add_blobs(nn::Checkpoint& ckpt, const std::string& prefix, const nn::ParameterList<float>& params,
               const nn::Adam* opt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    ckpt.blobs.push_back({prefix + "." + p->name, p->dims, {p->value.begin(), p->value.end()}});
    if (opt) {
      auto& o = const_cast<nn::Adam&>(*opt);
      ckpt.blobs.push_back({prefix + ".m." + p->name, p->dims, o.first_moments()[i]});
      ckpt.blobs.push_back({prefix + ".v." + p->name, p->dims, o.second_moments()[i]});
    }
  }
}

template <typename Vec>
void restore_values(const nn::Checkpoint& ckpt, const std::string& name, Vec& dst) {
  const nn::Blob* blob = ckpt.find(name);
  if (!blob) throw ParseError("checkpoint is missing blob '" + name + "'");
  if (blob->values.size() != dst.size())
    throw ParseError("checkpoint blob '" + name + "' has " + std::to_string(blob->values.size()) + " values, expected " +
                     std::to_string(dst.size()));
  dst.assign(blob->values.begin(), blob->values.end());
}

void restore_blobs(const nn::Checkpoint& ckpt, const std::string& prefix, const nn::ParameterList<float>& params,
                   nn::Adam* opt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    restore_values(ckpt, prefix + "." + p->name, p->value);
    if (opt) {
      restore_values(ckpt, prefix + ".m." + p->name, opt->first_moments()[i]);
      restore_values(ckpt, prefix + ".v." + p->name, opt->second_moments()[i]);
    }
  }
}

TrainConfig config_from_checkpoint(const nn::Checkpoint& ckpt) {
  auto it = ckpt.fields.find("format");
  if (it == ckpt.fields.end() || it->second != kFormat) throw ParseError("not a trainer checkpoint");
  TrainConfig config;
  const std::string prefix = "config.";
  // degradation.kind resets its dependent fields, so it goes first.
  if (auto k = ckpt.fields.find(prefix + "degradation.kind"); k != ckpt.fields.end())
    set_config_value(config, "degradation.kind", k->second);
  for (const auto& [key, value] : ckpt.fields)
    if (key.rfind(prefix, 0) == 0 && key != prefix + "degradation.kind")
      set_config_value(config, key.substr(prefix.size()), value);
  return config;
}

std::string snapshot(const StepMetrics& m) {
  std::ostringstream ss;
  ss.precision(9);
  ss << "step=" << m.step << " epoch=" << m.epoch << " lr=" << m.learning_rate
     << " reconstruction=" << m.generator.reconstruction << " coarse=" << m.generator.coarse
     << " kl=" << m.generator.kl << " attribute=" << m.generator.attribute << " adversarial=" << m.adversarial
     << " perceptual=" << m.perceptual << " discriminator=" << m.discriminator
     << " g_grad_norm=" << m.generator_grad_norm << " d_grad_norm=" << m.discriminator_grad_norm;
  return ss.str();
}

}  // namespace

double lr_schedule(int epoch, double base, int period) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
  if (period <= 0) throw std::invalid_argument("lr_schedule: period must be positive");
  return base * std::ldexp(1.0, -(epoch / period));
}

Batch make_batch(const TrainConfig& config, std::span<const Sample* const> samples, std::int64_t step) {
  std::vector<imaging::Image> hr;
  std::vector<imaging::Image> lr;
  Batch batch;
  const int n = static_cast<int>(samples.size());
  const int labels = config.model.supervised_attributes;
  batch.labels = nn::Tensor<float>({n, labels, 1, 1});
  for (int i = 0; i < n; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    if (s.hr.height() != config.model.hr_size || s.hr.width() != config.model.hr_size || s.hr.channels() != 3)
      throw std::invalid_argument("make_batch: sample '" + s.name + "' is not " + std::to_string(config.model.hr_size) +
                                  "x" + std::to_string(config.model.hr_size) + "x3");
    hr.push_back(s.hr);
    const auto seed = derive_seed(config.seed, {kDegrade, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)});
    lr.push_back(imaging::degrade(s.hr, config.degradation_for(seed)));
    for (int a = 0; a < labels && a < static_cast<int>(s.attributes.size()); ++a)
      batch.labels.sample(i)[static_cast<std::size_t>(a)] = s.attributes[static_cast<std::size_t>(a)];
  }
  batch.hr = nn::to_tensor<float>(hr);
  batch.lr = nn::to_tensor<float>(lr);
  return batch;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.model.seed = config_.seed;
  config_.model.validate();
  generator_ = std::make_unique<model::Generator<float>>(config_.model);
  g_opt_ = std::make_unique<nn::Adam>(generator_->parameters(), config_.adam);
  if (config_.adversarial) {
    discriminator_ = std::make_unique<adversarial::Discriminator<float>>(config_.discriminator());
    d_opt_ = std::make_unique<nn::Adam>(discriminator_->parameters(), config_.adam);
  }
}

int Trainer::steps_per_epoch(std::size_t dataset_size) const {
  if (dataset_size == 0) throw std::invalid_argument("trainer: empty dataset");
  const auto b = static_cast<std::size_t>(config_.batch_size);
  return static_cast<int>((dataset_size + b - 1) / b);
}

int Trainer::epoch_of(std::int64_t step, std::size_t dataset_size) const {
  return static_cast<int>(step / steps_per_epoch(dataset_size));
}

std::vector<std::size_t> Trainer::batch_indices(std::int64_t step, std::size_t dataset_size) const {
  const int spe = steps_per_epoch(dataset_size);
  const auto epoch = static_cast<std::uint64_t>(step / spe);
  const auto slot = static_cast<std::size_t>(step % spe);
  std::vector<std::size_t> perm(dataset_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(config_.seed, {kShuffle, epoch}));
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t b = static_cast<std::size_t>(config_.batch_size);
  const std::size_t begin = slot * b;
  const std::size_t end = std::min(dataset_size, begin + b);
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin), perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

StepMetrics Trainer::train_step(const std::vector<Sample>& data) {
  const auto idx = batch_indices(step_, data.size());
  std::vector<const Sample*> picked;
  for (auto i : idx) picked.push_back(&data[i]);
  return step_impl(make_batch(config_, picked, step_), epoch_of(step_, data.size()));
}

StepMetrics Trainer::train_step(const Batch& batch, int epoch) { return step_impl(batch, epoch); }

StepMetrics Trainer::step_impl(const Batch& batch, int epoch) {
  StepMetrics m;
  m.step = step_ + 1;
  m.epoch = epoch;
  m.learning_rate = lr_schedule(epoch, config_.learning_rate, config_.halving_epochs);
  const double multiplier = m.learning_rate / config_.learning_rate;
  const model::ModelConfig& mc = config_.model;
  const int n = batch.hr.n();

  nn::Tensor<float> eps;
  if (mc.has_probabilistic()) {
    eps = nn::Tensor<float>({n, mc.k * mc.pc_dim, 1, 1});
    Rng rng(derive_seed(config_.seed, {kEps, static_cast<std::uint64_t>(step_)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : eps.values()) v = static_cast<float>(normal(rng));
  }

  auto out = generator_->forward(batch.lr, mc.has_probabilistic() ? &eps : nullptr);

  if (discriminator_) {
    // Discriminator step on the detached generator output, real and fake in one pass.
    discriminator_->set_frozen(false);
    d_opt_->zero_grad();
    const auto cond = stack_batches(out.lr_upsampled, out.lr_upsampled);
    const auto probs = discriminator_->forward(stack_batches(batch.hr, out.output), cond);
    nn::Tensor<float> g_real, g_fake;
    m.discriminator = adversarial::loss_discriminator(batch_range(probs, 0, n), batch_range(probs, n, n), &g_real, &g_fake);
    discriminator_->backward(stack_batches(g_real, g_fake));
    m.discriminator_grad_norm = nn::gradient_norm(d_opt_->parameters());
    d_opt_->step(m.learning_rate, multiplier);
  }

  g_opt_->zero_grad();
  model::GeneratorGradients<float> grads;
  m.generator = model::generator_loss(mc, out, batch.hr, mc.has_attributes() ? &batch.labels : nullptr, config_.lambda,
                                      &grads);
  m.objective = m.generator.total;

  if (discriminator_) {
    discriminator_->set_frozen(true);
    const nn::Tensor<float> real_features = discriminator_->features(batch.hr, out.lr_upsampled);
    const auto probs = discriminator_->forward(out.output, out.lr_upsampled);
    nn::Tensor<float> g_prob, g_features;
    const auto& w = config_.gan_weights;
    m.adversarial = adversarial::loss_adversarial_generator(probs, &g_prob);
    m.perceptual = adversarial::loss_perceptual(real_features, discriminator_->last_features(), &g_features, w.gamma_p);
    for (auto& v : g_prob.values()) v = static_cast<float>(v * w.gamma_d);
    grads.output += discriminator_->backward(g_prob, g_features);
    discriminator_->set_frozen(false);
    m.objective = adversarial::total_generator_objective(m.generator.total, m.adversarial, m.perceptual, w);
  }

  if (!std::isfinite(m.objective) || !std::isfinite(m.discriminator))
    throw TrainingDiverged("training diverged at step " + std::to_string(m.step) + ": non-finite loss", snapshot(m));

  generator_->backward(grads);
  m.generator_grad_norm = nn::gradient_norm(g_opt_->parameters());
  if (!std::isfinite(m.generator_grad_norm))
    throw TrainingDiverged("training diverged at step " + std::to_string(m.step) + ": non-finite gradient", snapshot(m));
  g_opt_->step(m.learning_rate, multiplier);
  ++step_;
  return m;
}

void Trainer::fit(const std::vector<Sample>& data, const StepCallback& on_step,
                  const std::function<void(int)>& on_epoch_end) {
  const int spe = steps_per_epoch(data.size());
  std::int64_t total = static_cast<std::int64_t>(config_.epochs) * spe;
  if (config_.max_steps > 0) total = std::min(total, config_.max_steps);
  while (step_ < total) {
    const StepMetrics m = train_step(data);
    if (on_step) on_step(m);
    if (step_ % spe == 0 && on_epoch_end) on_epoch_end(static_cast<int>(step_ / spe) - 1);
  }
}

nn::Checkpoint Trainer::checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.fields["format"] = kFormat;
  ckpt.fields["step"] = std::to_string(step_);
  ckpt.fields["model.hash"] = std::to_string(config_.model.hash());
  ckpt.fields["g.adam_steps"] = std::to_string(g_opt_->steps());
  for (const auto& [key, value] : config_values(config_)) ckpt.fields["config." + key] = value;
  add_blobs(ckpt, "g", generator_->parameters(), g_opt_.get());
  if (discriminator_) {
    ckpt.fields["d.adam_steps"] = std::to_string(d_opt_->steps());
    add_blobs(ckpt, "d", discriminator_->parameters(), d_opt_.get());
  }
  return ckpt;
}

void Trainer::restore(const nn::Checkpoint& ckpt) {
  const TrainConfig saved = config_from_checkpoint(ckpt);
  if (saved.model.hash() != config_.model.hash())
    throw ParseError("checkpoint model configuration does not match the trainer");
  restore_blobs(ckpt, "g", generator_->parameters(), g_opt_.get());
  g_opt_->set_steps(std::stoll(ckpt.field("g.adam_steps")));
  if (discriminator_) {
    restore_blobs(ckpt, "d", discriminator_->parameters(), d_opt_.get());
    d_opt_->set_steps(std::stoll(ckpt.field("d.adam_steps")));
  }
  step_ = std::stoll(ckpt.field("step"));
}

void Trainer::save(const std::filesystem::path& dir) const { nn::save_checkpoint(dir, checkpoint()); }

Trainer Trainer::resume(const std::filesystem::path& dir) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(dir);
  Trainer t(config_from_checkpoint(ckpt));
  t.restore(ckpt);
  return t;
}

model::Generator<float> load_generator(const std::filesystem::path& checkpoint_dir, TrainConfig* config) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_dir);
  const TrainConfig cfg = config_from_checkpoint(ckpt);
  model::ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  model::Generator<float> g(mc);
  restore_blobs(ckpt, "g", g.parameters(), nullptr);
  if (config) *config = cfg;
  return g;
}

void write_metrics_header(std::ostream& out, const TrainConfig& config) {
  out << "# facn training metrics\n";
  for (const auto& [key, value] : config_values(config)) out << "# " << key << " = " << value << "\n";
  out << "step,epoch,lr,objective,reconstruction,coarse,kl,attribute,adversarial,perceptual,discriminator,"
         "g_grad_norm,d_grad_norm\n";
}

void write_metrics_row(std::ostream& out, const StepMetrics& m) {
  const auto old = out.precision(9);
  out << m.step << ',' << m.epoch << ',' << m.learning_rate << ',' << m.objective << ',' << m.generator.reconstruction
      << ',' << m.generator.coarse << ',' << m.generator.kl << ',' << m.generator.attribute << ',' << m.adversarial << ','
      << m.perceptual << ',' << m.discriminator << ',' << m.generator_grad_norm << ',' << m.discriminator_grad_norm
      << '\n';
  out.precision(old);
}

}  // namespace facn::training
