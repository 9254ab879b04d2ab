#include "facn/model/routing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "facn/common/rng.hpp"

namespace facn::model {

std::vector<double> squash(const std::vector<double>& s) {
  double q = 0.0;
  for (double v : s) q += v * v;
  const double f = q / ((1.0 + q) * std::sqrt(q + kSquashEpsilon));
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = f * s[i];
  return out;
}

std::vector<double> squash_backward(const std::vector<double>& s, const std::vector<double>& grad_out) {
  double q = 0.0;
  double sg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    q += s[i] * s[i];
    sg += s[i] * grad_out[i];
  }
  const double r = std::sqrt(q + kSquashEpsilon);
  const double f = q / ((1.0 + q) * r);
  // v = f(q) s  =>  dv/ds = f I + 2 f'(q) s s^T
  const double df = 1.0 / ((1.0 + q) * r) - f / (1.0 + q) - f / (2.0 * (q + kSquashEpsilon));
  std::vector<double> g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = f * grad_out[i] + 2.0 * df * sg * s[i];
  return g;
}

namespace {

void check_problem(const RoutingProblem& p, std::size_t u_size, std::size_t w_size) {
  if (p.in_caps < 1 || p.in_dim < 1 || p.out_caps < 1 || p.out_dim < 1 || p.iterations < 1)
    throw std::invalid_argument("dynamic_routing: all extents and the iteration count must be >= 1");
  if (u_size != static_cast<std::size_t>(p.in_caps) * p.in_dim)
    throw std::invalid_argument("dynamic_routing: u must be in_caps x in_dim");
  if (w_size != static_cast<std::size_t>(p.in_caps) * p.out_caps * p.out_dim * p.in_dim)
    throw std::invalid_argument("dynamic_routing: weights must be in_caps x out_caps x out_dim x in_dim");
}

void softmax_rows(const std::vector<double>& logits, int rows, int cols, std::vector<double>& out) {
  out.resize(logits.size());
  for (int i = 0; i < rows; ++i) {
    const double* b = &logits[static_cast<std::size_t>(i) * cols];
    double* c = &out[static_cast<std::size_t>(i) * cols];
    const double m = *std::max_element(b, b + cols);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += (c[j] = std::exp(b[j] - m));
    for (int j = 0; j < cols; ++j) c[j] /= sum;
  }
}

}  // namespace

std::vector<double> dynamic_routing(const RoutingProblem& p, const std::vector<double>& u,
                                    const std::vector<double>& weights, RoutingTrace* trace) {
  check_problem(p, u.size(), weights.size());
  const int I = p.in_caps, J = p.out_caps, O = p.out_dim, P = p.in_dim;

  std::vector<double> u_hat(static_cast<std::size_t>(I) * J * O, 0.0);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      for (int o = 0; o < O; ++o) {
        const double* w = &weights[((static_cast<std::size_t>(i) * J + j) * O + o) * P];
        double acc = 0.0;
        for (int q = 0; q < P; ++q) acc += w[q] * u[static_cast<std::size_t>(i) * P + q];
        u_hat[(static_cast<std::size_t>(i) * J + j) * O + o] = acc;
      }

  std::vector<double> logits(static_cast<std::size_t>(I) * J, 0.0);
  std::vector<double> coupling;
  std::vector<double> v(static_cast<std::size_t>(J) * O);
  if (trace) {
    trace->coupling.clear();
    trace->weighted_sum.clear();
    trace->outputs.clear();
  }
  for (int t = 0; t < p.iterations; ++t) {
    softmax_rows(logits, I, J, coupling);
    std::vector<double> s(static_cast<std::size_t>(J) * O, 0.0);
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) {
        const double c = coupling[static_cast<std::size_t>(i) * J + j];
        for (int o = 0; o < O; ++o)
          s[static_cast<std::size_t>(j) * O + o] += c * u_hat[(static_cast<std::size_t>(i) * J + j) * O + o];
      }
    for (int j = 0; j < J; ++j) {
      std::vector<double> sj(s.begin() + j * O, s.begin() + (j + 1) * O);
      const auto vj = squash(sj);
      std::copy(vj.begin(), vj.end(), v.begin() + j * O);
    }
    if (trace) {
      trace->coupling.push_back(coupling);
      trace->weighted_sum.push_back(s);
      trace->outputs.push_back(v);
    }
    if (t + 1 < p.iterations)
      for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) {
          double agree = 0.0;
          for (int o = 0; o < O; ++o)
            agree += u_hat[(static_cast<std::size_t>(i) * J + j) * O + o] * v[static_cast<std::size_t>(j) * O + o];
          logits[static_cast<std::size_t>(i) * J + j] += agree;
        }
  }
  if (trace) trace->predictions = std::move(u_hat);
  return v;
}

void dynamic_routing_backward(const RoutingProblem& p, const std::vector<double>& u, const std::vector<double>& weights,
                              const RoutingTrace& trace, const std::vector<double>& grad_out,
                              std::vector<double>& grad_u, std::vector<double>& grad_weights) {
  check_problem(p, u.size(), weights.size());
  const int I = p.in_caps, J = p.out_caps, O = p.out_dim, P = p.in_dim;
  const auto& u_hat = trace.predictions;
  auto uh = [&](int i, int j, int o) { return u_hat[(static_cast<std::size_t>(i) * J + j) * O + o]; };

  std::vector<double> g_uhat(u_hat.size(), 0.0);
  std::vector<double> g_logits(static_cast<std::size_t>(I) * J, 0.0);  // w.r.t. logits entering iteration t+1

  for (int t = p.iterations - 1; t >= 0; --t) {
    const auto& c = trace.coupling[t];
    const auto& s = trace.weighted_sum[t];
    const auto& v = trace.outputs[t];
    std::vector<double> g_v(static_cast<std::size_t>(J) * O, 0.0);
    if (t == p.iterations - 1) {
      g_v = grad_out;
    } else {
      // logits_{t+1} = logits_t + u_hat . v_t
      for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) {
          const double gb = g_logits[static_cast<std::size_t>(i) * J + j];
          if (gb == 0.0) continue;
          for (int o = 0; o < O; ++o) {
            g_v[static_cast<std::size_t>(j) * O + o] += gb * uh(i, j, o);
            g_uhat[(static_cast<std::size_t>(i) * J + j) * O + o] += gb * v[static_cast<std::size_t>(j) * O + o];
          }
        }
    }
    std::vector<double> g_s(static_cast<std::size_t>(J) * O);
    for (int j = 0; j < J; ++j) {
      std::vector<double> sj(s.begin() + j * O, s.begin() + (j + 1) * O);
      std::vector<double> gj(g_v.begin() + j * O, g_v.begin() + (j + 1) * O);
      const auto gs = squash_backward(sj, gj);
      std::copy(gs.begin(), gs.end(), g_s.begin() + j * O);
    }
    for (int i = 0; i < I; ++i) {
      std::vector<double> g_c(J);
      for (int j = 0; j < J; ++j) {
        const double cij = c[static_cast<std::size_t>(i) * J + j];
        double acc = 0.0;
        for (int o = 0; o < O; ++o) {
          const double gso = g_s[static_cast<std::size_t>(j) * O + o];
          acc += gso * uh(i, j, o);
          g_uhat[(static_cast<std::size_t>(i) * J + j) * O + o] += cij * gso;
        }
        g_c[j] = acc;
      }
      double dot = 0.0;
      for (int j = 0; j < J; ++j) dot += c[static_cast<std::size_t>(i) * J + j] * g_c[j];
      for (int j = 0; j < J; ++j)
        g_logits[static_cast<std::size_t>(i) * J + j] += c[static_cast<std::size_t>(i) * J + j] * (g_c[j] - dot);
    }
  }

  grad_u.resize(u.size(), 0.0);
  grad_weights.resize(weights.size(), 0.0);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      for (int o = 0; o < O; ++o) {
        const double g = g_uhat[(static_cast<std::size_t>(i) * J + j) * O + o];
        const std::size_t base = ((static_cast<std::size_t>(i) * J + j) * O + o) * P;
        for (int q = 0; q < P; ++q) {
          grad_weights[base + q] += g * u[static_cast<std::size_t>(i) * P + q];
          grad_u[static_cast<std::size_t>(i) * P + q] += g * weights[base + q];
        }
      }
}

// ---------------------------------------------------------------- CapsuleRouting

template <typename T>
CapsuleRouting<T>::CapsuleRouting(std::string name, int in_features, int primary_dim, int out_caps, int out_dim,
                                  int iterations)
    : problem_{in_features / std::max(primary_dim, 1), primary_dim, out_caps, out_dim, iterations},
      weight_(name + ".weight", {in_features / std::max(primary_dim, 1), out_caps, out_dim, primary_dim}) {
  if (primary_dim < 1 || in_features % primary_dim != 0)
    throw std::invalid_argument(name + ": feature count must be divisible by the primary capsule dimension");
}

template <typename T>
std::string CapsuleRouting<T>::describe() const {
  return "routing " + std::to_string(problem_.in_caps) + "x" + std::to_string(problem_.in_dim) + " -> " +
         std::to_string(problem_.out_caps) + "x" + std::to_string(problem_.out_dim) + " (" +
         std::to_string(problem_.iterations) + " iterations)";
}

template <typename T>
void CapsuleRouting<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / problem_.in_dim));
  for (T& v : weight_.value) v = static_cast<T>(normal(rng));
  weight_.zero_grad();
}

template <typename T>
nn::Tensor<T> CapsuleRouting<T>::forward(const nn::Tensor<T>& x) {
  const std::size_t features = static_cast<std::size_t>(problem_.in_caps) * problem_.in_dim;
  if (x.shape().sample_size() != features)
    throw std::invalid_argument("routing: expected " + std::to_string(features) + " input features");
  in_shape_ = x.shape();
  const std::vector<double> w(weight_.value.begin(), weight_.value.end());
  primary_.assign(x.n(), {});
  squashed_.assign(x.n(), {});
  traces_.assign(x.n(), {});
  nn::Tensor<T> out(output_shape(x.shape()));
  for (int n = 0; n < x.n(); ++n) {
    auto src = x.sample(n);
    primary_[n].assign(src.begin(), src.end());
    auto& u = squashed_[n];
    u.resize(features);
    for (int i = 0; i < problem_.in_caps; ++i) {
      std::vector<double> pi(primary_[n].begin() + i * problem_.in_dim, primary_[n].begin() + (i + 1) * problem_.in_dim);
      const auto ui = squash(pi);
      std::copy(ui.begin(), ui.end(), u.begin() + i * problem_.in_dim);
    }
    const auto v = dynamic_routing(problem_, u, w, &traces_[n]);
    auto dst = out.sample(n);
    for (std::size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<T>(v[i]);
  }
  return out;
}

template <typename T>
nn::Tensor<T> CapsuleRouting<T>::backward(const nn::Tensor<T>& grad_out) {
  const std::vector<double> w(weight_.value.begin(), weight_.value.end());
  std::vector<double> g_w(w.size(), 0.0);
  nn::Tensor<T> grad_in(in_shape_);
  for (int n = 0; n < in_shape_.n; ++n) {
    auto g = grad_out.sample(n);
    const std::vector<double> g_v(g.begin(), g.end());
    std::vector<double> g_u;
    dynamic_routing_backward(problem_, squashed_[n], w, traces_[n], g_v, g_u, g_w);
    auto dst = grad_in.sample(n);
    for (int i = 0; i < problem_.in_caps; ++i) {
      const auto first = static_cast<std::ptrdiff_t>(i) * problem_.in_dim;
      std::vector<double> pi(primary_[n].begin() + first, primary_[n].begin() + first + problem_.in_dim);
      std::vector<double> gi(g_u.begin() + first, g_u.begin() + first + problem_.in_dim);
      const auto gp = squash_backward(pi, gi);
      for (int q = 0; q < problem_.in_dim; ++q) dst[first + q] = static_cast<T>(gp[q]);
    }
  }
  if (this->accumulate_params_)
    for (std::size_t i = 0; i < g_w.size(); ++i) weight_.grad[i] += static_cast<T>(g_w[i]);
  return grad_in;
}

template class CapsuleRouting<float>;
template class CapsuleRouting<double>;

}  // namespace facn::model
