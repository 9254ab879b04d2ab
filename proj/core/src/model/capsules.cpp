#include "facn/model/capsules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace facn::model {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

nn::Shape vector_shape(int n, int features) {
  return {n, features, 1, 1};
}

template <typename T>
int features(const Tensor<T>& t) {
  return static_cast<int>(t.shape().sample_size());
}

}  // namespace

template <typename T>
Tensor<T> activate_semantic(const Tensor<T>& primary, const Tensor<T>& attributes, int d) {
  const int k = features(attributes);
  require(primary.n() == attributes.n() && features(primary) == k * d,
          "activate_semantic: primary capsules must be (n, k*d) for attributes (n, k)");
  Tensor<T> out(primary.shape());
  for (int n = 0; n < primary.n(); ++n) {
    auto p = primary.sample(n);
    auto a = attributes.sample(n);
    auto o = out.sample(n);
    for (int i = 0; i < k; ++i) {
      double sq = 0.0;
      for (int j = 0; j < d; ++j) sq += static_cast<double>(p[i * d + j]) * p[i * d + j];
      const double scale = a[i] / std::max(std::sqrt(sq), kNormFloor);
      for (int j = 0; j < d; ++j) o[i * d + j] = static_cast<T>(scale * p[i * d + j]);
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> activate_semantic_backward(const Tensor<T>& primary, const Tensor<T>& attributes,
                                                           int d, const Tensor<T>& grad_out) {
  const int k = features(attributes);
  require(grad_out.shape() == primary.shape(), "activate_semantic_backward: gradient shape mismatch");
  Tensor<T> g_primary(primary.shape());
  Tensor<T> g_attr(attributes.shape());
  for (int n = 0; n < primary.n(); ++n) {
    auto p = primary.sample(n);
    auto a = attributes.sample(n);
    auto g = grad_out.sample(n);
    auto gp = g_primary.sample(n);
    auto ga = g_attr.sample(n);
    for (int i = 0; i < k; ++i) {
      double sq = 0.0;
      double pg = 0.0;
      for (int j = 0; j < d; ++j) {
        sq += static_cast<double>(p[i * d + j]) * p[i * d + j];
        pg += static_cast<double>(p[i * d + j]) * g[i * d + j];
      }
      const double norm = std::sqrt(sq);
      if (norm > kNormFloor) {
        // out = a * p / |p|
        ga[i] = static_cast<T>(pg / norm);
        const double inv = a[i] / norm;
        for (int j = 0; j < d; ++j) gp[i * d + j] = static_cast<T>(inv * (g[i * d + j] - p[i * d + j] * pg / sq));
      } else {
        // out = a * p / floor
        ga[i] = static_cast<T>(pg / kNormFloor);
        for (int j = 0; j < d; ++j) gp[i * d + j] = static_cast<T>(a[i] / kNormFloor * g[i * d + j]);
      }
    }
  }
  return {std::move(g_primary), std::move(g_attr)};
}

template <typename T>
std::vector<double> kl_divergence(const Tensor<T>& mu, const Tensor<T>& logvar) {
  require(mu.shape() == logvar.shape(), "kl_divergence: mu and logvar shapes differ");
  std::vector<double> out(mu.n(), 0.0);
  for (int n = 0; n < mu.n(); ++n) {
    auto m = mu.sample(n);
    auto lv = logvar.sample(n);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double mi = m[i];
      const double li = lv[i];
      s += -0.5 * (1.0 + li - mi * mi - std::exp(li));
    }
    out[n] = s;
  }
  return out;
}

double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar) {
  require(mu.size() == logvar.size(), "kl_divergence: mu and logvar lengths differ");
  const int k = static_cast<int>(mu.size());
  return kl_divergence(Tensor<double>(vector_shape(1, k), mu), Tensor<double>(vector_shape(1, k), logvar))[0];
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> kl_divergence_backward(const Tensor<T>& mu, const Tensor<T>& logvar, double scale) {
  Tensor<T> g_mu(mu.shape());
  Tensor<T> g_lv(logvar.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    g_mu[i] = static_cast<T>(scale * mu[i]);
    g_lv[i] = static_cast<T>(scale * 0.5 * (std::exp(static_cast<double>(logvar[i])) - 1.0));
  }
  return {std::move(g_mu), std::move(g_lv)};
}

template <typename T>
Tensor<T> shift_mean(const Tensor<T>& mu, const Tensor<T>& attributes, int pc_dim) {
  const int k = features(attributes);
  require(mu.n() == attributes.n() && features(mu) == k * pc_dim, "shift_mean: mu must be (n, k*pc_dim)");
  Tensor<T> out = mu;
  for (int n = 0; n < mu.n(); ++n) {
    auto o = out.sample(n);
    auto a = attributes.sample(n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < pc_dim; ++j) o[i * pc_dim + j] += a[i];
  }
  return out;
}

template <typename T>
Tensor<T> shift_mean_backward_attributes(const Tensor<T>& grad_out, int pc_dim) {
  const int k = features(grad_out) / pc_dim;
  Tensor<T> g(vector_shape(grad_out.n(), k));
  for (int n = 0; n < grad_out.n(); ++n) {
    auto src = grad_out.sample(n);
    auto dst = g.sample(n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < pc_dim; ++j) dst[i] += src[i * pc_dim + j];
  }
  return g;
}

template <typename T>
Tensor<T> reparameterize(const Tensor<T>& mu_hat, const Tensor<T>& logvar, const Tensor<T>& eps) {
  require(mu_hat.shape() == logvar.shape() && eps.shape() == mu_hat.shape(), "reparameterize: shape mismatch");
  Tensor<T> out(mu_hat.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(mu_hat[i] + eps[i] * std::exp(0.5 * static_cast<double>(logvar[i])));
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> reparameterize_backward(const Tensor<T>& logvar, const Tensor<T>& eps,
                                                        const Tensor<T>& grad_out) {
  Tensor<T> g_mu = grad_out;
  Tensor<T> g_lv(logvar.shape());
  for (std::size_t i = 0; i < g_lv.size(); ++i)
    g_lv[i] = static_cast<T>(grad_out[i] * eps[i] * 0.5 * std::exp(0.5 * static_cast<double>(logvar[i])));
  return {std::move(g_mu), std::move(g_lv)};
}

template <typename T>
Tensor<T> clamp_logvar(const Tensor<T>& raw) {
  Tensor<T> out = raw;
  const T lim = static_cast<T>(kLogVarianceLimit);
  for (T& v : out.values()) v = std::clamp(v, -lim, lim);
  return out;
}

template <typename T>
Tensor<T> clamp_logvar_backward(const Tensor<T>& raw, const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  const T lim = static_cast<T>(kLogVarianceLimit);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (raw[i] < -lim || raw[i] > lim) g[i] = T{0};
  return g;
}

template <typename T>
Tensor<T> assemble_fac(const Tensor<T>& semantic, const Tensor<T>& probabilistic, int k, int d, int pc_dim) {
  require(features(semantic) == k * d && features(probabilistic) == k * pc_dim && semantic.n() == probabilistic.n(),
          "assemble_fac: expected semantic (n, k*d) and probabilistic (n, k*pc_dim)");
  const int stride = d + pc_dim;
  Tensor<T> out(vector_shape(semantic.n(), k * stride));
  for (int n = 0; n < semantic.n(); ++n) {
    auto s = semantic.sample(n);
    auto p = probabilistic.sample(n);
    auto o = out.sample(n);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) o[i * stride + j] = s[i * d + j];
      for (int j = 0; j < pc_dim; ++j) o[i * stride + d + j] = p[i * pc_dim + j];
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_fac(const Tensor<T>& caps, int k, int d, int pc_dim) {
  const int stride = d + pc_dim;
  require(features(caps) == k * stride, "split_fac: caps length must be k*(d+pc_dim)");
  Tensor<T> s(vector_shape(caps.n(), k * d));
  Tensor<T> p(vector_shape(caps.n(), k * pc_dim));
  for (int n = 0; n < caps.n(); ++n) {
    auto c = caps.sample(n);
    auto ss = s.sample(n);
    auto pp = p.sample(n);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) ss[i * d + j] = c[i * stride + j];
      for (int j = 0; j < pc_dim; ++j) pp[i * pc_dim + j] = c[i * stride + d + j];
    }
  }
  return {std::move(s), std::move(p)};
}

template <typename T>
Tensor<T> leading_features(const Tensor<T>& t, int count) {
  require(count <= features(t), "leading_features: count exceeds feature length");
  Tensor<T> out(vector_shape(t.n(), count));
  for (int n = 0; n < t.n(); ++n) {
    auto src = t.sample(n);
    std::copy(src.begin(), src.begin() + count, out.sample(n).begin());
  }
  return out;
}

#define FACN_INSTANTIATE(T)                                                                                      \
  template Tensor<T> activate_semantic<T>(const Tensor<T>&, const Tensor<T>&, int);                              \
  template std::pair<Tensor<T>, Tensor<T>> activate_semantic_backward<T>(const Tensor<T>&, const Tensor<T>&, int, \
                                                                         const Tensor<T>&);                      \
  template std::vector<double> kl_divergence<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template std::pair<Tensor<T>, Tensor<T>> kl_divergence_backward<T>(const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> shift_mean<T>(const Tensor<T>&, const Tensor<T>&, int);                                     \
  template Tensor<T> shift_mean_backward_attributes<T>(const Tensor<T>&, int);                                   \
  template Tensor<T> reparameterize<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template std::pair<Tensor<T>, Tensor<T>> reparameterize_backward<T>(const Tensor<T>&, const Tensor<T>&,        \
                                                                      const Tensor<T>&);                         \
  template Tensor<T> clamp_logvar<T>(const Tensor<T>&);                                                          \
  template Tensor<T> clamp_logvar_backward<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> assemble_fac<T>(const Tensor<T>&, const Tensor<T>&, int, int, int);                         \
  template std::pair<Tensor<T>, Tensor<T>> split_fac<T>(const Tensor<T>&, int, int, int);                        \
  template Tensor<T> leading_features<T>(const Tensor<T>&, int);

FACN_INSTANTIATE(float)
FACN_INSTANTIATE(double)
#undef FACN_INSTANTIATE

}  // namespace facn::model
