#ifndef IBFLOW_CRITIC_HPP
#define IBFLOW_CRITIC_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "ibflow/error.hpp"
#include "ibflow/matrix.hpp"
#include "ibflow/rng.hpp"

namespace ibflow {

enum class Activation {
  Softplus,  // ln(1 + e^x); smooth, default
  Relu,
};

inline double activate(double x, Activation a) {
  if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
  // overflow-safe softplus
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double activate_grad(double x, Activation a) {
  if (a == Activation::Relu) return x > 0.0 ? 1.0 : 0.0;
  // softplus' = sigmoid
  if (x > 30.0) return 1.0;
  if (x < -30.0) return std::exp(x);
  return 1.0 / (1.0 + std::exp(-x));
}

/// Two-layer scalar critic: score = w2 . act(W1^T x + b1) + b2.
/// Houses T_xz and T_zy; one trainer owns a critic at a time.
struct MLPCritic {
  std::size_t d_in = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // d_in x hidden, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
  Activation activation = Activation::Softplus;

  std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  bool all_finite() const {
    for (double v : w1)
      if (!std::isfinite(v)) return false;
    for (double v : b1)
      if (!std::isfinite(v)) return false;
    for (double v : w2)
      if (!std::isfinite(v)) return false;
    return std::isfinite(b2);
  }
};

/// Gradients with the same shapes as the critic parameters.
struct CriticGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  explicit CriticGradients(const MLPCritic& c)
      : w1(c.w1.size(), 0.0), b1(c.b1.size(), 0.0), w2(c.w2.size(), 0.0) {}

  void accumulate(const CriticGradients& o) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += o.w1[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += o.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += o.w2[i];
    b2 += o.b2;
  }
};

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam accumulators, flattened over all parameters.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(std::size_t n_params, AdamHyper h = {})
      : m(n_params, 0.0), v(n_params, 0.0), hyper(h) {}
};

/// One Adam descent step over a flat parameter block. Throws on
/// non-finite gradients.
inline void adam_apply(std::vector<double*>& params,
                       const std::vector<const double*>& grads,
                       std::size_t n, AdamState& state) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(*grads[i])) throw Error("diverged");
  state.t += 1;
  const auto& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = *grads[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    *params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

/// Convenience overload for a flat vector of parameters.
inline void adam_apply(std::vector<double>& params,
                       const std::vector<double>& grads, AdamState& state) {
  std::vector<double*> p(params.size());
  std::vector<const double*> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    p[i] = &params[i];
    g[i] = &grads[i];
  }
  adam_apply(p, g, params.size(), state);
}

/// He-style init: weights N(0, 2/fan_in), biases zero. Deterministic per seed.
inline MLPCritic critic_init(std::size_t d_in, std::size_t hidden,
                             std::uint64_t seed,
                             Activation act = Activation::Softplus) {
  if (d_in < 1 || hidden < 1) throw Error("critic_init: bad dimensions");
  MLPCritic c;
  c.d_in = d_in;
  c.hidden = hidden;
  c.activation = act;
  c.w1.resize(d_in * hidden);
  c.b1.assign(hidden, 0.0);
  c.w2.resize(hidden);
  RandomSource rng(seed);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d_in));
  for (auto& w : c.w1) w = rng.gaussian(s1);
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
  for (auto& w : c.w2) w = rng.gaussian(s2);
  c.b2 = 0.0;
  return c;
}

/// Scores for every row of `pairs` (n_cols must equal d_in).
inline std::vector<double> critic_forward(const MLPCritic& c,
                                          const SampleMatrix& pairs) {
  if (pairs.n_cols != c.d_in) throw Error("critic_forward: dimension mismatch");
  std::vector<double> scores(pairs.n_rows);
  std::vector<double> pre(c.hidden);
  for (std::size_t r = 0; r < pairs.n_rows; ++r) {
    const double* x = pairs.data.data() + r * pairs.n_cols;
    for (std::size_t j = 0; j < c.hidden; ++j) pre[j] = c.b1[j];
    for (std::size_t i = 0; i < c.d_in; ++i) {
      const double xi = x[i];
      const double* wrow = c.w1.data() + i * c.hidden;
      for (std::size_t j = 0; j < c.hidden; ++j) pre[j] += xi * wrow[j];
    }
    double s = c.b2;
    for (std::size_t j = 0; j < c.hidden; ++j)
      s += c.w2[j] * activate(pre[j], c.activation);
    scores[r] = s;
  }
  return scores;
}

/// Exact gradients of sum_i upstream_i * score_i with respect to all
/// parameters. When input_grad is non-null it receives the same weighted
/// gradient with respect to the input rows (used by the trainable encoder).
inline CriticGradients critic_backward(const MLPCritic& c,
                                       const SampleMatrix& pairs,
                                       const std::vector<double>& upstream,
                                       SampleMatrix* input_grad = nullptr) {
  if (pairs.n_cols != c.d_in) throw Error("critic_backward: dimension mismatch");
  if (upstream.size() != pairs.n_rows)
    throw Error("critic_backward: upstream length mismatch");
  CriticGradients g(c);
  if (input_grad) *input_grad = SampleMatrix(pairs.n_rows, pairs.n_cols);
  std::vector<double> pre(c.hidden);
  std::vector<double> dpre(c.hidden);
  for (std::size_t r = 0; r < pairs.n_rows; ++r) {
    const double u = upstream[r];
    if (u == 0.0 && !input_grad) continue;
    const double* x = pairs.data.data() + r * pairs.n_cols;
    for (std::size_t j = 0; j < c.hidden; ++j) pre[j] = c.b1[j];
    for (std::size_t i = 0; i < c.d_in; ++i) {
      const double xi = x[i];
      const double* wrow = c.w1.data() + i * c.hidden;
      for (std::size_t j = 0; j < c.hidden; ++j) pre[j] += xi * wrow[j];
    }
    g.b2 += u;
    for (std::size_t j = 0; j < c.hidden; ++j) {
      const double a = activate(pre[j], c.activation);
      g.w2[j] += u * a;
      dpre[j] = u * c.w2[j] * activate_grad(pre[j], c.activation);
      g.b1[j] += dpre[j];
    }
    for (std::size_t i = 0; i < c.d_in; ++i) {
      const double xi = x[i];
      double* grow = g.w1.data() + i * c.hidden;
      const double* wrow = c.w1.data() + i * c.hidden;
      double dx = 0.0;
      for (std::size_t j = 0; j < c.hidden; ++j) {
        grow[j] += dpre[j] * xi;
        dx += dpre[j] * wrow[j];
      }
      if (input_grad) input_grad->at(r, i) = dx;
    }
  }
  return g;
}

/// Adam descent step on critic parameters. t is incremented; throws
/// "diverged" on non-finite gradients.
inline void adam_step(MLPCritic& c, const CriticGradients& g, AdamState& state) {
  if (state.m.empty()) state = AdamState(c.param_count(), state.hyper);
  std::vector<double*> p;
  std::vector<const double*> gr;
  p.reserve(c.param_count());
  gr.reserve(c.param_count());
  for (std::size_t i = 0; i < c.w1.size(); ++i) {
    p.push_back(&c.w1[i]);
    gr.push_back(&g.w1[i]);
  }
  for (std::size_t i = 0; i < c.b1.size(); ++i) {
    p.push_back(&c.b1[i]);
    gr.push_back(&g.b1[i]);
  }
  for (std::size_t i = 0; i < c.w2.size(); ++i) {
    p.push_back(&c.w2[i]);
    gr.push_back(&g.w2[i]);
  }
  p.push_back(&c.b2);
  gr.push_back(&g.b2);
  adam_apply(p, gr, p.size(), state);
  if (!c.all_finite()) throw Error("diverged");
}

}  // namespace ibflow

#endif  // IBFLOW_CRITIC_HPP
