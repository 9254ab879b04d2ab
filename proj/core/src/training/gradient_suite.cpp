#include "facn/training/gradient_suite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>
#include <stdexcept>

#include "facn/adversarial/discriminator.hpp"
#include "facn/adversarial/losses.hpp"
#include "facn/common/rng.hpp"
#include "facn/model/capsules.hpp"
#include "facn/model/generator.hpp"
#include "facn/model/loss.hpp"
#include "facn/model/routing.hpp"

namespace facn::training {

namespace {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using T = double;

constexpr int kBatch = 2;

Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

Tensor<T> normal_tensor(Shape shape, std::uint64_t seed) {
  Tensor<T> t(shape);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

// Every bias redrawn from U(-0.1, 0.1).
void generic_biases(const nn::ParameterList<T>& params, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto* p : params)
    if (p->name.ends_with(".bias"))
      for (auto& v : p->value) v = u(rng);
}

double dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw std::logic_error("gradient suite: projection shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Parameter<T> as_parameter(const std::string& name, const Tensor<T>& t) {
  Parameter<T> p(name, {t.n(), t.c(), t.h(), t.w()});
  p.value.assign(t.values().begin(), t.values().end());
  return p;
}

Tensor<T> view(const Parameter<T>& p) { return Tensor<T>({p.dims[0], p.dims[1], p.dims[2], p.dims[3]}, p.value); }

void accumulate(Parameter<T>& p, const Tensor<T>& g) {
  for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

class Suite {
 public:
  Suite(std::string scope, const GradSuiteOptions& options) : scope_(std::move(scope)), options_(options) {}

  void check(const std::string& name, const std::function<double()>& loss, const std::function<void()>& grads,
             const nn::ParameterList<T>& params, const std::function<std::uint64_t()>& pattern = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    GradSuiteEntry e;
    e.scope = scope_;
    e.name = name;
    nn::GradCheckOptions opts = options_.check;
    opts.seed = derive_seed(options_.seed, {fnv1a(name)});
    e.result = nn::gradient_check(loss, grads, params, opts, pattern);
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entries_.push_back(std::move(e));
  }

  /// Projects the layer output on a fixed random direction; checks parameters and the input.
  void check_layer(const std::string& name, nn::Layer<T>& layer, Shape in_shape) {
    const std::uint64_t s = derive_seed(options_.seed, {fnv1a(name)});
    Parameter<T> input = as_parameter("input", random_tensor(in_shape, s));
    const Tensor<T> r = normal_tensor(layer.output_shape(in_shape), s + 1);
    auto params = layer.parameters();
    params.push_back(&input);
    check(
        name, [&] { return dot(layer.forward(view(input)), r); },
        [&] {
          layer.forward(view(input));
          accumulate(input, layer.backward(r));
        },
        params,
        [&] {
          std::uint64_t h = 0;
          layer.fold_activation_pattern(h);
          return h;
        });
  }

  std::uint64_t seed(const std::string& tag) const { return derive_seed(options_.seed, {fnv1a(scope_ + tag)}); }
  std::vector<GradSuiteEntry> take() { return std::move(entries_); }

 private:
  std::string scope_;
  GradSuiteOptions options_;
  std::vector<GradSuiteEntry> entries_;
};

void layers_scope(Suite& s) {
  for (auto act : {Activation::None, Activation::LeakyRelu, Activation::Sigmoid})
    for (int stride : {1, 2}) {
      nn::Conv2d<T> conv("conv", LayerSpec{LayerKind::Conv, 3, stride, 3, 4, act});
      conv.initialize(s.seed("conv"));
      s.check_layer("conv3x3_s" + std::to_string(stride) + "_act" + std::to_string(static_cast<int>(act)), conv,
                    {kBatch, 3, 6, 6});
    }
  for (auto act : {Activation::None, Activation::LeakyRelu, Activation::Sigmoid}) {
    nn::Linear<T> fc("fc", LayerSpec{LayerKind::FullyConnected, 1, 1, 12, 5, act});
    fc.initialize(s.seed("fc"));
    s.check_layer("linear_act" + std::to_string(static_cast<int>(act)), fc, {kBatch, 3, 2, 2});
  }
  {
    nn::ActivationLayer<T> a(Activation::LeakyRelu);
    s.check_layer("leaky_relu", a, {kBatch, 2, 3, 3});
    nn::ActivationLayer<T> b(Activation::Sigmoid);
    s.check_layer("sigmoid", b, {kBatch, 2, 3, 3});
  }
  {
    nn::Upsample2x<T> up;
    s.check_layer("upsample2x", up, {kBatch, 2, 3, 3});
    nn::Reshape<T> reshape(2, 2, 3);
    s.check_layer("reshape", reshape, {kBatch, 12, 1, 1});
  }
  {
    nn::ResidualBlock<T> res("res", 3);
    res.initialize(s.seed("res"));
    s.check_layer("residual_block", res, {kBatch, 3, 5, 5});
  }
  {
    auto up_conv = nn::make_layer<T>("upconv", LayerSpec{LayerKind::UpsampleConv, 3, 1, 2, 3, Activation::LeakyRelu});
    up_conv->initialize(s.seed("upconv"));
    s.check_layer("upsample_conv", *up_conv, {kBatch, 2, 3, 3});
  }
  {
    model::CapsuleRouting<T> routing("routing", 16, 4, 3, 2, 3);
    routing.initialize(s.seed("routing"));
    s.check_layer("dynamic_routing", routing, {kBatch, 4, 2, 2});
  }
}

void encoder_scope(Suite& s) {
  model::Generator<T> g(gradcheck_model_config(model::Variant::Full));
  generic_biases(g.parameters(), s.seed("bias"));
  const int hr = g.config().hr_size;
  g.pre_sr_net().set_propagate_input_grad(true);
  s.check_layer("pre_sr", g.pre_sr_net(), {kBatch, 3, hr, hr});
  g.pre_sr_net().set_propagate_input_grad(false);
  s.check_layer("encoder", g.encoder_net(), {kBatch, 3, hr, hr});
  Parameter<T> lr = as_parameter("lr", random_tensor({kBatch, 3, g.config().lr_size(), g.config().lr_size()}, s.seed("lr"), 0, 1));
  const auto probe = g.forward(view(lr));
  const Tensor<T> r = normal_tensor(probe.features.shape(), s.seed("r"));
  s.check(
      "upsample_pre_sr_encoder", [&] { return dot(g.forward(view(lr)).features, r); },
      [&] {
        auto out = g.forward(view(lr));
        Tensor<T> gc = g.encoder_net().backward(r);
        g.pre_sr_net().backward(gc);
      },
      [&] {
        auto p = g.pre_sr_parameters();
        auto e = g.encoder_parameters();
        p.insert(p.end(), e.begin(), e.end());
        return p;
      }(),
      [&] { return g.activation_pattern(); });
}

void decoder_scope(Suite& s) {
  for (auto v : {model::Variant::Full, model::Variant::V1, model::Variant::V2}) {
    model::Generator<T> g(gradcheck_model_config(v));
    generic_biases(g.parameters(), s.seed("bias"));
    s.check_layer("decoder_" + std::string(model::to_string(v)), g.decoder_net(),
                  {kBatch, g.config().decoder_input_width(), 1, 1});
  }
}

void cgb_scope(Suite& s) {
  const auto cfg = gradcheck_model_config(model::Variant::Full);
  model::Generator<T> g(cfg);
  generic_biases(g.parameters(), s.seed("bias"));
  const int w = cfg.width;
  const int k = cfg.k;
  const int d = cfg.d;
  const Shape features{kBatch, w, 2, 2};
  s.check_layer("sen", g.sen()->trunk(), features);
  s.check_layer("aan", g.aan()->trunk(), features);
  s.check_layer("pin", g.pin()->trunk(), features);

  {
    Parameter<T> primary = as_parameter("primary", random_tensor({kBatch, k * d, 1, 1}, s.seed("p")));
    Parameter<T> attr = as_parameter("attributes", random_tensor({kBatch, k, 1, 1}, s.seed("a"), 0, 1));
    const Tensor<T> r = normal_tensor(primary.dims.empty() ? Shape{} : Shape{kBatch, k * d, 1, 1}, s.seed("r1"));
    s.check(
        "attribute_mask", [&] { return dot(model::activate_semantic(view(primary), view(attr), d), r); },
        [&] {
          auto [gp, ga] = model::activate_semantic_backward(view(primary), view(attr), d, r);
          accumulate(primary, gp);
          accumulate(attr, ga);
        },
        {&primary, &attr});
  }
  for (int pc : {1, d}) {
    const std::string tag = pc == 1 ? "" : "_per_dimension";
    Parameter<T> mu = as_parameter("mu", random_tensor({kBatch, k * pc, 1, 1}, s.seed("mu" + tag)));
    Parameter<T> attr = as_parameter("attributes", random_tensor({kBatch, k, 1, 1}, s.seed("at" + tag), 0, 1));
    Parameter<T> logvar = as_parameter("logvar", random_tensor({kBatch, k * pc, 1, 1}, s.seed("lv" + tag), -2, 2));
    const Tensor<T> eps = normal_tensor({kBatch, k * pc, 1, 1}, s.seed("eps" + tag));
    const Tensor<T> r = normal_tensor({kBatch, k * pc, 1, 1}, s.seed("r2" + tag));
    s.check(
        "shift_reparameterize" + tag,
        [&] {
          return dot(model::reparameterize(model::shift_mean(view(mu), view(attr), pc), view(logvar), eps), r);
        },
        [&] {
          auto [g_mu_hat, g_lv] = model::reparameterize_backward(view(logvar), eps, r);
          accumulate(mu, g_mu_hat);
          accumulate(attr, model::shift_mean_backward_attributes(g_mu_hat, pc));
          accumulate(logvar, g_lv);
        },
        {&mu, &attr, &logvar});
    s.check(
        "kl_divergence" + tag,
        [&] {
          double total = 0;
          for (double v : model::kl_divergence(view(mu), view(logvar))) total += v;
          return total;
        },
        [&] {
          auto [gm, gl] = model::kl_divergence_backward(view(mu), view(logvar), 1.0);
          accumulate(mu, gm);
          accumulate(logvar, gl);
        },
        {&mu, &logvar});
  }
  {
    // Raw values kept away from the clamp corners, on both sides of the limits.
    Tensor<T> raw = random_tensor({kBatch, k, 1, 1}, s.seed("raw"), -5, 5);
    for (std::size_t i = 0; i < raw.size(); i += 3) raw[i] += raw[i] > 0 ? 10 : -10;
    Parameter<T> rawp = as_parameter("logvar_raw", raw);
    const Tensor<T> r = normal_tensor(raw.shape(), s.seed("r3"));
    s.check(
        "logvar_clamp", [&] { return dot(model::clamp_logvar(view(rawp)), r); },
        [&] { accumulate(rawp, model::clamp_logvar_backward(view(rawp), r)); }, {&rawp});
  }
  {
    Parameter<T> sem = as_parameter("semantic", random_tensor({kBatch, k * d, 1, 1}, s.seed("sem")));
    Parameter<T> prob = as_parameter("probabilistic", random_tensor({kBatch, k, 1, 1}, s.seed("prob")));
    const Tensor<T> r = normal_tensor({kBatch, k * (d + 1), 1, 1}, s.seed("r4"));
    s.check(
        "fac_assembly", [&] { return dot(model::assemble_fac(view(sem), view(prob), k, d, 1), r); },
        [&] {
          auto [gs, gp] = model::split_fac(r, k, d, 1);
          accumulate(sem, gs);
          accumulate(prob, gp);
        },
        {&sem, &prob});
  }
  // The whole block in place, for every variant, including the gradient flowing into the features.
  for (auto v : {model::Variant::Full, model::Variant::V1, model::Variant::V2, model::Variant::V3}) {
    model::Generator<T> gen(gradcheck_model_config(v));
    generic_biases(gen.parameters(), s.seed("bias"));
    const int lr_size = gen.config().lr_size();
    const Tensor<T> lr = random_tensor({kBatch, 3, lr_size, lr_size}, s.seed("lr"), 0, 1);
    const Tensor<T> eps = normal_tensor({kBatch, gen.config().k * gen.config().pc_dim, 1, 1}, s.seed("eps"));
    const Tensor<T>* e = gen.config().has_probabilistic() ? &eps : nullptr;
    const auto probe = gen.forward(lr, e);
    const Tensor<T> r = normal_tensor(probe.output.shape(), s.seed("ro"));
    const Tensor<T> ra = gen.config().has_attributes() ? normal_tensor(probe.attributes.shape(), s.seed("ra")) : Tensor<T>{};
    auto params = gen.capsule_block_parameters();
    auto enc = gen.encoder_parameters();
    params.insert(params.end(), enc.begin(), enc.end());
    s.check(
        "cgb_in_generator_" + std::string(model::to_string(v)),
        [&] {
          auto out = gen.forward(lr, e);
          return dot(out.output, r) + (ra.empty() ? 0.0 : dot(out.attributes, ra));
        },
        [&] {
          gen.forward(lr, e);
          model::GeneratorGradients<T> gr;
          gr.output = r;
          gr.attributes = ra;
          gen.backward(gr);
        },
        params, [&] { return gen.activation_pattern(); });
  }
}

adversarial::DiscriminatorConfig small_discriminator() {
  adversarial::DiscriminatorConfig d;
  d.hr_size = 32;
  d.width = 4;
  d.hidden = 8;
  d.seed = 5;
  return d;
}

void discriminator_scope(Suite& s) {
  adversarial::Discriminator<T> disc(small_discriminator());
  generic_biases(disc.parameters(), s.seed("bias"));
  const int hr = disc.config().hr_size;
  Parameter<T> cand = as_parameter("candidate", random_tensor({kBatch, 3, hr, hr}, s.seed("cand"), 0, 1));
  const Tensor<T> cond = random_tensor({kBatch, 3, hr, hr}, s.seed("cond"), 0, 1);
  const Tensor<T> r = normal_tensor({kBatch, 1, 1, 1}, s.seed("r"));
  const Tensor<T> rf = normal_tensor(disc.features(view(cand), cond).shape(), s.seed("rf"));
  auto params = disc.parameters();
  params.push_back(&cand);
  s.check(
      "discriminator_probability_and_features",
      [&] {
        const auto p = disc.forward(view(cand), cond);
        return dot(p, r) + dot(disc.last_features(), rf);
      },
      [&] {
        disc.forward(view(cand), cond);
        accumulate(cand, disc.backward(r, rf));
      },
      params, [&] { return disc.activation_pattern(); });
  s.check(
      "perceptual_features", [&] { return dot(disc.features(view(cand), cond), rf); },
      [&] {
        disc.features(view(cand), cond);
        accumulate(cand, disc.backward({}, rf));
      },
      params, [&] { return disc.activation_pattern(); });
  const Tensor<T> real = random_tensor({kBatch, 3, hr, hr}, s.seed("real"), 0, 1);
  // Real and fake pairs go through one pass, as in training.
  auto stacked = [&](const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out({a.n() + b.n(), a.c(), a.h(), a.w()});
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
  };
  auto half = [](const Tensor<T>& t, int which) {
    const int n = t.n() / 2;
    Tensor<T> out({n, t.c(), t.h(), t.w()});
    const auto per = t.shape().sample_size();
    std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(which * n * per), n * per, out.values().begin());
    return out;
  };
  const Tensor<T> cond2 = stacked(cond, cond);
  s.check(
      "discriminator_loss",
      [&] {
        const auto p = disc.forward(stacked(real, view(cand)), cond2);
        return adversarial::loss_discriminator(half(p, 0), half(p, 1));
      },
      [&] {
        Tensor<T> gr, gf;
        const auto p = disc.forward(stacked(real, view(cand)), cond2);
        adversarial::loss_discriminator(half(p, 0), half(p, 1), &gr, &gf);
        accumulate(cand, half(disc.backward(stacked(gr, gf)), 1));
      },
      params, [&] { return disc.activation_pattern(); });
  disc.set_frozen(true);
  s.check(
      "frozen_discriminator_input_gradient",
      [&] { return adversarial::loss_adversarial_generator(disc.forward(view(cand), cond)); },
      [&] {
        Tensor<T> g;
        adversarial::loss_adversarial_generator(disc.forward(view(cand), cond), &g);
        accumulate(cand, disc.backward(g));
      },
      {&cand}, [&] { return disc.activation_pattern(); });
  disc.set_frozen(false);
}

void full_loss_scope(Suite& s) {
  for (auto v : {model::Variant::Full, model::Variant::V1, model::Variant::V2, model::Variant::V3}) {
    const auto cfg = gradcheck_model_config(v);
    model::Generator<T> gen(cfg);
    generic_biases(gen.parameters(), s.seed("bias"));
    const int lr_size = cfg.lr_size();
    const Tensor<T> lr = random_tensor({kBatch, 3, lr_size, lr_size}, s.seed("lr"), 0, 1);
    const Tensor<T> hr = random_tensor({kBatch, 3, cfg.hr_size, cfg.hr_size}, s.seed("hr"), 0, 1);
    Tensor<T> labels({kBatch, cfg.supervised_attributes, 1, 1});
    {
      Rng rng(s.seed("labels"));
      for (auto& x : labels.values()) x = static_cast<double>(rng() & 1U);
    }
    // The reparameterization noise is fixed so the objective is a deterministic function.
    const Tensor<T> eps = normal_tensor({kBatch, cfg.k * cfg.pc_dim, 1, 1}, s.seed("eps"));
    const Tensor<T>* e = cfg.has_probabilistic() ? &eps : nullptr;
    const double lambda = 1.0;
    s.check(
        "generator_loss_" + std::string(model::to_string(v)),
        [&] { return model::generator_loss<T>(cfg, gen.forward(lr, e), hr, &labels, lambda, nullptr).total; },
        [&] {
          model::GeneratorGradients<T> gr;
          model::generator_loss<T>(cfg, gen.forward(lr, e), hr, &labels, lambda, &gr);
          gen.backward(gr);
        },
        gen.parameters(), [&] { return gen.activation_pattern(); });

    if (v != model::Variant::Full) continue;
    adversarial::Discriminator<T> disc(small_discriminator());
    generic_biases(disc.parameters(), s.seed("bias"));
    disc.set_frozen(true);
    const adversarial::AdversarialWeights w{1.0, 1.0};
    auto objective = [&](model::GeneratorGradients<T>* gr) {
      const auto out = gen.forward(lr, e);
      const double lg = model::generator_loss<T>(cfg, out, hr, &labels, lambda, gr).total;
      const Tensor<T> real_features = disc.features(hr, out.lr_upsampled);
      Tensor<T> g_prob, g_feat;
      const auto prob = disc.forward(out.output, out.lr_upsampled);
      const double adv = adversarial::loss_adversarial_generator(prob, gr ? &g_prob : nullptr);
      const double perc = adversarial::loss_perceptual(real_features, disc.last_features(), gr ? &g_feat : nullptr, w.gamma_p);
      if (gr) {
        for (auto& x : g_prob.values()) x *= w.gamma_d;
        gr->output += disc.backward(g_prob, g_feat);
        gen.backward(*gr);
      }
      return adversarial::total_generator_objective(lg, adv, perc, w);
    };
    s.check(
        "adversarial_objective", [&] { return objective(nullptr); },
        [&] {
          model::GeneratorGradients<T> gr;
          objective(&gr);
        },
        gen.parameters(), [&] { return mix_seed(gen.activation_pattern() ^ mix_seed(disc.activation_pattern())); });
  }
}

void corrupt_entry(Suite& s) {
  auto inner = std::make_unique<nn::Conv2d<T>>("faulty", LayerSpec{LayerKind::Conv, 3, 1, 2, 3, Activation::LeakyRelu});
  inner->initialize(s.seed("faulty"));
  nn::FaultyBackward<T> faulty(std::move(inner), 1e-2);
  s.check_layer("corrupted_backward", faulty, {kBatch, 2, 4, 4});
}

}  // namespace

const std::vector<std::string>& gradient_scopes() {
  static const std::vector<std::string> scopes = {"layers", "encoder", "cgb", "decoder", "discriminator", "full-loss"};
  return scopes;
}

model::ModelConfig gradcheck_model_config(model::Variant variant) {
  model::ModelConfig c;
  c.hr_size = 32;
  c.scale = 8;
  c.width = 4;
  c.k = 18;
  c.d = 4;
  c.pc_dim = 1;
  c.supervised_attributes = 18;
  c.variant = variant;
  c.routing_iterations = 3;
  c.primary_capsule_dim = 4;
  c.seed = 3;
  c.validate();
  return c;
}

std::vector<GradSuiteEntry> run_gradient_suite(const std::string& scope, const GradSuiteOptions& options) {
  if (scope == "all") {
    std::vector<GradSuiteEntry> all;
    GradSuiteOptions inner = options;
    inner.corrupt = false;
    for (const auto& sc : gradient_scopes()) {
      auto part = run_gradient_suite(sc, inner);
      all.insert(all.end(), part.begin(), part.end());
    }
    if (options.corrupt) {
      Suite s("all", options);
      corrupt_entry(s);
      auto part = s.take();
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  Suite s(scope, options);
  if (scope == "layers")
    layers_scope(s);
  else if (scope == "encoder")
    encoder_scope(s);
  else if (scope == "cgb")
    cgb_scope(s);
  else if (scope == "decoder")
    decoder_scope(s);
  else if (scope == "discriminator")
    discriminator_scope(s);
  else if (scope == "full-loss")
    full_loss_scope(s);
  else
    throw std::invalid_argument("unknown gradcheck scope '" + scope + "'");
  if (options.corrupt) corrupt_entry(s);
  return s.take();
}

}  // namespace facn::training
