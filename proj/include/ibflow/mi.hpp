#ifndef IBFLOW_MI_HPP
#define IBFLOW_MI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ibflow/critic.hpp"
#include "ibflow/error.hpp"
#include "ibflow/matrix.hpp"
#include "ibflow/rng.hpp"

namespace ibflow {

/// Row-aligned joint samples (a_i, b_i) ~ p(a, b).
struct MIPairBatch {
  SampleMatrix a;
  SampleMatrix b;
  /// Closed-form MI when the generator knows it; NaN otherwise.
  double true_mi = std::numeric_limits<double>::quiet_NaN();
};

inline void validate(const MIPairBatch& batch) {
  if (batch.a.n_rows != batch.b.n_rows) throw Error("pair batch: row mismatch");
  if (batch.a.n_rows < 2) throw Error("pair batch: need at least 2 rows");
}

inline MIPairBatch make_pair_batch(SampleMatrix a, SampleMatrix b) {
  MIPairBatch batch{std::move(a), std::move(b)};
  validate(batch);
  return batch;
}

/// Donsker-Varadhan lower bound: mean(joint) - log-mean-exp(marginal).
/// The log-mean-exp is max-shifted for stability.
inline double dv_lower_bound(const std::vector<double>& scores_joint,
                             const std::vector<double>& scores_marginal) {
  if (scores_joint.empty() || scores_marginal.empty())
    throw Error("dv_lower_bound: empty score list");
  double mean_joint = 0.0;
  for (double s : scores_joint) {
    if (!std::isfinite(s)) throw Error("dv_lower_bound: non-finite score");
    mean_joint += s;
  }
  mean_joint /= static_cast<double>(scores_joint.size());

  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores_marginal) {
    if (!std::isfinite(s)) throw Error("dv_lower_bound: non-finite score");
    mx = std::max(mx, s);
  }
  double acc = 0.0;
  for (double s : scores_marginal) acc += std::exp(s - mx);
  const double lme =
      mx + std::log(acc / static_cast<double>(scores_marginal.size()));
  return mean_joint - lme;
}

/// Product-of-marginals sample: b rows permuted uniformly at random.
inline MIPairBatch shuffle_marginals(const MIPairBatch& batch,
                                     std::uint64_t seed) {
  validate(batch);
  RandomSource rng(seed);
  const auto perm = rng.permutation(batch.b.n_rows);
  MIPairBatch out;
  out.a = batch.a;
  out.b = take_rows(batch.b, perm);
  out.true_mi = batch.true_mi;
  return out;
}

/// DV estimate with sample counts attached.
struct DVEstimate {
  double value_nats = 0.0;
  std::size_t n_joint = 0;
  std::size_t n_marginal = 0;
};

struct MICriticConfig {
  std::size_t hidden = 128;
  double lr = 1e-4;
  std::size_t steps = 2000;
  std::size_t batch_size = 512;
  double ema_rate = 0.99;
  std::uint64_t seed = 0;
  Activation activation = Activation::Softplus;
  double score_clip = 50.0;  // clamp before exponentiation in the DV log term
};

struct MITrainResult {
  DVEstimate estimate;
  std::vector<double> step_estimates;  // plug-in DV per training step
};

namespace detail {

/// Gradient ascent step for one critic on one joint/marginal score pair.
/// Returns the plug-in DV value of the batch. `weight` scales the update
/// (alpha-weighted objectives in the dynamic loss); `ema` carries the
/// running denominator used for the log-term gradient only.
struct DVStepWorkspace {
  std::vector<double> up_joint;
  std::vector<double> up_marg;
};

inline double dv_ascent_step(MLPCritic& critic, AdamState& adam,
                             const SampleMatrix& joint_pairs,
                             const SampleMatrix& marg_pairs, double weight,
                             double clip, double ema_rate, double& ema,
                             DVStepWorkspace& ws,
                             SampleMatrix* joint_input_grad = nullptr,
                             SampleMatrix* marg_input_grad = nullptr) {
  const auto s_joint = critic_forward(critic, joint_pairs);
  const auto s_marg = critic_forward(critic, marg_pairs);
  const double batch_value = dv_lower_bound(s_joint, s_marg);
  if (!std::isfinite(batch_value)) throw Error("diverged");

  const std::size_t bj = s_joint.size();
  const std::size_t bm = s_marg.size();

  // denominator of the log-term gradient, stabilized by EMA
  double mean_exp = 0.0;
  for (double s : s_marg) mean_exp += std::exp(std::clamp(s, -clip, clip));
  mean_exp /= static_cast<double>(bm);
  ema = (ema < 0.0) ? mean_exp : ema_rate * ema + (1.0 - ema_rate) * mean_exp;

  // loss = -DV; descent on it is ascent on the bound
  ws.up_joint.assign(bj, -weight / static_cast<double>(bj));
  ws.up_marg.resize(bm);
  for (std::size_t i = 0; i < bm; ++i) {
    const double s = s_marg[i];
    const double clipped = std::clamp(s, -clip, clip);
    const double pass = (s > -clip && s < clip) ? 1.0 : 0.0;  // clamp grad
    ws.up_marg[i] =
        weight * pass * std::exp(clipped) / (static_cast<double>(bm) * ema);
  }

  CriticGradients g = critic_backward(critic, joint_pairs, ws.up_joint,
                                      joint_input_grad);
  CriticGradients gm =
      critic_backward(critic, marg_pairs, ws.up_marg, marg_input_grad);
  g.accumulate(gm);
  adam_step(critic, g, adam);
  return batch_value;
}

}  // namespace detail

/// MINE-style training of a fresh critic on the batch: gradient ascent on
/// the DV bound with an EMA-corrected denominator gradient. The returned
/// estimate is the plug-in DV value over the full dataset with a fresh
/// marginal shuffle; per-step plug-in values are traced.
inline MITrainResult train_mi_critic(const MIPairBatch& batch,
                                     const MICriticConfig& cfg) {
  validate(batch);
  if (cfg.steps < 1) throw Error("train_mi_critic: steps must be >= 1");
  const std::size_t n = batch.a.n_rows;
  const std::size_t d_in = batch.a.n_cols + batch.b.n_cols;

  RandomSource rng(cfg.seed);
  MLPCritic critic =
      critic_init(d_in, cfg.hidden, rng.next_seed(), cfg.activation);
  AdamState adam(critic.param_count(), AdamHyper{cfg.lr, 0.9, 0.999, 1e-8});

  const std::size_t bsz = std::min(cfg.batch_size, n);
  double ema = -1.0;
  detail::DVStepWorkspace ws;
  MITrainResult result;
  result.step_estimates.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto idx = rng.sample_indices(n, bsz);
    const auto perm = rng.permutation(bsz);
    SampleMatrix a_b = take_rows(batch.a, idx);
    SampleMatrix b_b = take_rows(batch.b, idx);
    std::vector<std::size_t> shuffled(bsz);
    for (std::size_t k = 0; k < bsz; ++k) shuffled[k] = idx[perm[k]];
    SampleMatrix b_m = take_rows(batch.b, shuffled);

    const SampleMatrix joint = hconcat(a_b, b_b);
    const SampleMatrix marg = hconcat(a_b, b_m);
    const double value =
        detail::dv_ascent_step(critic, adam, joint, marg, 1.0, cfg.score_clip,
                               cfg.ema_rate, ema, ws);
    result.step_estimates.push_back(value);
  }

  // final estimate over the full dataset, fresh shuffle, plug-in form
  const MIPairBatch shuffled = shuffle_marginals(batch, rng.next_seed());
  const auto s_joint = critic_forward(critic, hconcat(batch.a, batch.b));
  const auto s_marg = critic_forward(critic, hconcat(shuffled.a, shuffled.b));
  result.estimate.value_nats = dv_lower_bound(s_joint, s_marg);
  result.estimate.n_joint = n;
  result.estimate.n_marginal = n;
  if (!std::isfinite(result.estimate.value_nats)) throw Error("diverged");
  return result;
}

/// Discrete joint distribution over |A| x |B| outcomes; entries sum to 1.
struct DiscreteJoint {
  std::vector<double> table;  // row-major, n_a x n_b
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  DiscreteJoint() = default;
  DiscreteJoint(std::size_t a, std::size_t b)
      : table(a * b, 0.0), n_a(a), n_b(b) {}

  double& at(std::size_t i, std::size_t j) { return table[i * n_b + j]; }
  double at(std::size_t i, std::size_t j) const { return table[i * n_b + j]; }

  std::vector<double> marginal_a() const {
    std::vector<double> pa(n_a, 0.0);
    for (std::size_t i = 0; i < n_a; ++i)
      for (std::size_t j = 0; j < n_b; ++j) pa[i] += at(i, j);
    return pa;
  }
  std::vector<double> marginal_b() const {
    std::vector<double> pb(n_b, 0.0);
    for (std::size_t i = 0; i < n_a; ++i)
      for (std::size_t j = 0; j < n_b; ++j) pb[j] += at(i, j);
    return pb;
  }
};

inline void validate(const DiscreteJoint& j) {
  double sum = 0.0;
  for (double p : j.table) {
    if (p < 0.0) throw Error("discrete joint: negative mass");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("discrete joint: mass not 1");
}

/// Exact MI by full enumeration; zero-mass cells contribute nothing.
inline double exact_mi_discrete(const DiscreteJoint& j) {
  validate(j);
  const auto pa = j.marginal_a();
  const auto pb = j.marginal_b();
  double mi = 0.0;
  for (std::size_t a = 0; a < j.n_a; ++a)
    for (std::size_t b = 0; b < j.n_b; ++b) {
      const double p = j.at(a, b);
      if (p > 0.0) mi += p * std::log(p / (pa[a] * pb[b]));
    }
  return mi;
}

/// DV bound evaluated exactly (weighted sums, not samples) at the optimal
/// critic T* = log p(a,b) / (p(a) p(b)). Equals exact_mi_discrete because
/// the marginal expectation of e^{T*} is exactly 1.
inline double dv_with_optimal_critic(const DiscreteJoint& j) {
  validate(j);
  const auto pa = j.marginal_a();
  const auto pb = j.marginal_b();
  for (double p : pa)
    if (p <= 0.0) throw Error("zero marginal");
  for (double p : pb)
    if (p <= 0.0) throw Error("zero marginal");
  double e_joint = 0.0;
  double e_marg = 0.0;
  for (std::size_t a = 0; a < j.n_a; ++a)
    for (std::size_t b = 0; b < j.n_b; ++b) {
      const double p = j.at(a, b);
      const double prod = pa[a] * pb[b];
      if (p > 0.0) {
        const double t_star = std::log(p / prod);
        e_joint += p * t_star;
        e_marg += prod * std::exp(t_star);
      }
      // p == 0: T* = -inf, e^{T*} = 0; both terms vanish
    }
  return e_joint - std::log(e_marg);
}

/// Divide a raw DV estimate by the squared effective dimension.
inline double normalized_mi(double dv, double d_eff_value) {
  if (d_eff_value < 1.0)
    throw Error("normalized_mi: d_eff below 1 violates the spectrum bound");
  return dv / (d_eff_value * d_eff_value);
}

/// Random full-support joint: uniform draws plus a support floor,
/// renormalized.
inline DiscreteJoint random_full_support_joint(std::size_t n_a, std::size_t n_b,
                                               RandomSource& rng) {
  DiscreteJoint j(n_a, n_b);
  const double floor = 0.05 / static_cast<double>(n_a * n_b);
  double sum = 0.0;
  for (auto& p : j.table) {
    p = rng.uniform() + floor;
    sum += p;
  }
  for (auto& p : j.table) p /= sum;
  // exact renormalization of the residual round-off
  double s2 = 0.0;
  for (double p : j.table) s2 += p;
  j.table.back() += 1.0 - s2;
  return j;
}

/// n samples from the joint, one-hot encoded per side.
inline MIPairBatch sample_one_hot(const DiscreteJoint& j, std::size_t n,
                                  std::uint64_t seed) {
  validate(j);
  RandomSource rng(seed);
  SampleMatrix a(n, j.n_a);
  SampleMatrix b(n, j.n_b);
  for (std::size_t r = 0; r < n; ++r) {
    double u = rng.uniform();
    std::size_t cell = j.table.size() - 1;
    for (std::size_t k = 0; k < j.table.size(); ++k) {
      u -= j.table[k];
      if (u <= 0.0) {
        cell = k;
        break;
      }
    }
    a.at(r, cell / j.n_b) = 1.0;
    b.at(r, cell % j.n_b) = 1.0;
  }
  MIPairBatch batch{std::move(a), std::move(b)};
  batch.true_mi = exact_mi_discrete(j);
  return batch;
}

}  // namespace ibflow

#endif  // IBFLOW_MI_HPP
