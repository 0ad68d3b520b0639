#ifndef IBFLOW_FLOWNIB_HPP
#define IBFLOW_FLOWNIB_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ibflow/critic.hpp"
#include "ibflow/effdim.hpp"
#include "ibflow/error.hpp"
#include "ibflow/matrix.hpp"
#include "ibflow/mi.hpp"
#include "ibflow/parallel.hpp"
#include "ibflow/reps.hpp"
#include "ibflow/rng.hpp"
#include "ibflow/schedule.hpp"

namespace ibflow {

struct FlowNIBConfig {
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 256;
  std::size_t hidden = 128;
  double lr = 1e-4;
  AlphaSchedule schedule;
  bool alpha_per_epoch = false;  // default: decrement per optimization step
  SpectralMeasure measure = SpectralMeasure::L2Participation;
  std::uint64_t seed = 0;
  double ema_rate = 0.99;
  double score_clip = 50.0;
  Activation activation = Activation::Softplus;

  /// Train each critic on its unweighted DV objective instead of the
  /// alpha-weighted combined loss (diagnostics; the optimum is the same).
  bool decoupled = false;

  /// Replace each fixed layer with a trainable linear map of it,
  /// Z = L W + noise, trace-normalized after every update, so the
  /// representation itself can move and compress.
  bool train_encoder = false;
  std::size_t encoder_dim = 0;  // required > 0 in encoder mode
  double encoder_lr = 1e-2;
  double encoder_noise = 0.5;
};

/// One information-plane record: end-of-epoch full-set estimates under the
/// alpha in effect at the start of the epoch.
struct TraceRecord {
  std::size_t epoch = 0;
  double alpha = 1.0;
  double i_xz_raw = 0.0;
  double i_zy_raw = 0.0;
  double i_xz_norm = 0.0;
  double i_zy_norm = 0.0;
  double d_eff_z = 1.0;
  double d_eff_y = 1.0;
  double loss = 0.0;
};

struct LayerTrace {
  std::size_t layer = 0;
  std::vector<TraceRecord> records;
};

/// Dynamic loss: -(alpha * i_xz_norm + (1 - alpha) * i_zy_norm).
inline double flownib_loss(double i_xz_norm, double i_zy_norm, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw Error("flownib_loss: alpha outside [0, 1]");
  return -(alpha * i_xz_norm + (1.0 - alpha) * i_zy_norm);
}

/// Slack of the compression upper bound
///   I(X;Z) <= (d_eff(Z)^2 / alpha) * (-loss + (1 - alpha) * i_zy_norm);
/// returns RHS - i_xz_raw, which is algebraically
/// 2 (1 - alpha) i_zy_norm d_eff^2 / alpha and hence non-negative whenever
/// the Z-Y estimate is non-negative.
inline double check_compression_bound(const TraceRecord& rec) {
  if (rec.alpha <= 0.0) throw Error("bound undefined at alpha=0");
  const double d2 = rec.d_eff_z * rec.d_eff_z;
  const double rhs = d2 / rec.alpha * (-rec.loss + (1.0 - rec.alpha) * rec.i_zy_norm);
  return rhs - rec.i_xz_raw;
}

namespace detail {

/// Effective dimension of the target per its encoding: one column gives 1
/// exactly; vector targets and one-hot classification labels go through
/// the PCA spectrum.
inline double target_d_eff(const SampleMatrix& y, SpectralMeasure m) {
  return d_eff_of_data(y, m);
}

struct LinearEncoder {
  SampleMatrix input;    // fixed source features, n x d_in
  SampleMatrix noise;    // fixed observation noise, n x d_out
  std::vector<double> w; // d_in x d_out
  CovMatrix input_cov;   // covariance of the source, for trace normalization
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  AdamState adam;

  LinearEncoder(const SampleMatrix& src, std::size_t out_dim, double noise_sd,
                double lr, RandomSource& rng)
      : input(src),
        d_in(src.n_cols),
        d_out(out_dim) {
    if (out_dim == 0) throw Error("encoder_dim must be >= 1 in encoder mode");
    w.resize(d_in * d_out);
    const double s = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (auto& v : w) v = rng.gaussian(s);
    noise = SampleMatrix(src.n_rows, d_out);
    for (auto& v : noise.data) v = rng.gaussian(noise_sd);
    input_cov = covariance(src);
    adam = AdamState(w.size(), AdamHyper{lr, 0.9, 0.999, 1e-8});
    renormalize();
  }

  /// Scale w so that tr Cov(input w) = d_out; keeps total projected
  /// variance fixed while training reallocates it across directions.
  void renormalize() {
    double tr = 0.0;
    for (std::size_t c = 0; c < d_out; ++c) {
      // tr contribution: w_c^T Sigma w_c
      for (std::size_t i = 0; i < d_in; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d_in; ++j)
          acc += input_cov.at(i, j) * w[j * d_out + c];
        tr += w[i * d_out + c] * acc;
      }
    }
    if (tr > 1e-30) {
      const double scale = std::sqrt(static_cast<double>(d_out) / tr);
      for (auto& v : w) v *= scale;
    }
  }

  /// Encoded rows for the given sample indices.
  SampleMatrix encode_rows(const std::vector<std::size_t>& idx) const {
    SampleMatrix z(idx.size(), d_out);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double* x = input.data.data() + idx[k] * d_in;
      double* out = z.data.data() + k * d_out;
      for (std::size_t c = 0; c < d_out; ++c) out[c] = noise.at(idx[k], c);
      for (std::size_t i = 0; i < d_in; ++i) {
        const double xi = x[i];
        const double* wrow = w.data() + i * d_out;
        for (std::size_t c = 0; c < d_out; ++c) out[c] += xi * wrow[c];
      }
    }
    return z;
  }

  SampleMatrix encode_all() const {
    std::vector<std::size_t> idx(input.n_rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return encode_rows(idx);
  }

  /// Descent step from accumulated dLoss/dZ over a batch.
  void apply_gradient(const std::vector<std::size_t>& idx,
                      const SampleMatrix& dz) {
    std::vector<double> gw(w.size(), 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double* x = input.data.data() + idx[k] * d_in;
      const double* g = dz.data.data() + k * d_out;
      for (std::size_t i = 0; i < d_in; ++i) {
        const double xi = x[i];
        double* grow = gw.data() + i * d_out;
        for (std::size_t c = 0; c < d_out; ++c) grow[c] += xi * g[c];
      }
    }
    adam_apply(w, gw, adam);
    renormalize();
  }
};

inline double full_set_dv(const MLPCritic& critic, const SampleMatrix& a,
                          const SampleMatrix& b, RandomSource& rng) {
  const auto perm = rng.permutation(b.n_rows);
  const auto s_joint = critic_forward(critic, hconcat(a, b));
  const auto s_marg = critic_forward(critic, hconcat(a, take_rows(b, perm)));
  return dv_lower_bound(s_joint, s_marg);
}

inline LayerTrace run_flownib_layer(const RepresentationSet& reps,
                                    const FlowNIBConfig& cfg,
                                    std::size_t layer) {
  const SampleMatrix& x = reps.x;
  const SampleMatrix& y = reps.y;
  const std::size_t n = x.n_rows;
  RandomSource rng(derive_seed(cfg.seed, layer));

  std::unique_ptr<LinearEncoder> encoder;
  SampleMatrix z_full;
  if (cfg.train_encoder) {
    encoder = std::make_unique<LinearEncoder>(reps.layers[layer],
                                              cfg.encoder_dim,
                                              cfg.encoder_noise,
                                              cfg.encoder_lr, rng);
    z_full = encoder->encode_all();
  } else {
    z_full = reps.layers[layer];
  }
  const std::size_t dz = z_full.n_cols;

  MLPCritic critic_xz =
      critic_init(x.n_cols + dz, cfg.hidden, rng.next_seed(), cfg.activation);
  MLPCritic critic_zy =
      critic_init(dz + y.n_cols, cfg.hidden, rng.next_seed(), cfg.activation);
  AdamState adam_xz(critic_xz.param_count(), AdamHyper{cfg.lr, 0.9, 0.999, 1e-8});
  AdamState adam_zy(critic_zy.param_count(), AdamHyper{cfg.lr, 0.9, 0.999, 1e-8});
  double ema_xz = -1.0;
  double ema_zy = -1.0;
  detail::DVStepWorkspace ws;

  auto layer_err = [layer](std::size_t epoch, const std::string& what) {
    return Error("layer " + std::to_string(layer) + " epoch " +
                 std::to_string(epoch) + ": " + what);
  };

  auto compute_d_eff = [&](const SampleMatrix& m,
                           std::size_t epoch) -> double {
    try {
      return std::max(1.0, d_eff_of_data(m, cfg.measure));
    } catch (const Error& e) {
      throw layer_err(epoch, e.what());
    }
  };

  double d_eff_y = 0.0;
  try {
    d_eff_y = std::max(1.0, detail::target_d_eff(y, cfg.measure));
  } catch (const Error& e) {
    throw Error("layer " + std::to_string(layer) + " target: " +
                std::string(e.what()));
  }

  const std::size_t bsz = std::min(cfg.batch_size, n);
  LayerTrace trace;
  trace.layer = layer;
  trace.records.reserve(cfg.epochs);
  double d_eff_z = 0.0;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch == 0 || cfg.train_encoder) d_eff_z = compute_d_eff(z_full, epoch);
    const double alpha_rec =
        alpha_at(cfg.schedule,
                 cfg.alpha_per_epoch ? epoch : epoch * cfg.steps_per_epoch);

    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      const double alpha = alpha_at(
          cfg.schedule, cfg.alpha_per_epoch ? epoch : global_step);
      const double w_xz_enc = alpha / (d_eff_z * d_eff_z);
      const double w_zy_enc = (1.0 - alpha) / (d_eff_y * d_eff_y);
      const double w_xz = cfg.decoupled ? 1.0 : w_xz_enc;
      const double w_zy = cfg.decoupled ? 1.0 : w_zy_enc;

      const auto idx = rng.sample_indices(n, bsz);
      const auto perm_xz = rng.permutation(bsz);
      const auto perm_zy = rng.permutation(bsz);

      SampleMatrix x_b = take_rows(x, idx);
      SampleMatrix z_b = cfg.train_encoder ? encoder->encode_rows(idx)
                                           : take_rows(z_full, idx);
      SampleMatrix y_b = take_rows(y, idx);
      SampleMatrix z_perm = take_rows(z_b, perm_xz);
      SampleMatrix y_perm = take_rows(y_b, perm_zy);

      try {
        if (cfg.train_encoder) {
          SampleMatrix gj_xz, gm_xz, gj_zy, gm_zy;
          detail::dv_ascent_step(critic_xz, adam_xz, hconcat(x_b, z_b),
                                 hconcat(x_b, z_perm), w_xz, cfg.score_clip,
                                 cfg.ema_rate, ema_xz, ws, &gj_xz, &gm_xz);
          detail::dv_ascent_step(critic_zy, adam_zy, hconcat(z_b, y_b),
                                 hconcat(z_b, y_perm), w_zy, cfg.score_clip,
                                 cfg.ema_rate, ema_zy, ws, &gj_zy, &gm_zy);
          // route critic input gradients back to the encoder output,
          // rescaled from the critic's objective weight to the
          // alpha-weighted one the encoder follows
          SampleMatrix z_grad(bsz, z_b.n_cols);
          const double s_xz = w_xz > 0.0 ? w_xz_enc / w_xz : 0.0;
          const double s_zy = w_zy > 0.0 ? w_zy_enc / w_zy : 0.0;
          const std::size_t dx = x.n_cols;
          for (std::size_t k = 0; k < bsz; ++k)
            for (std::size_t c = 0; c < z_b.n_cols; ++c) {
              z_grad.at(k, c) += s_xz * gj_xz.at(k, dx + c);
              z_grad.at(perm_xz[k], c) += s_xz * gm_xz.at(k, dx + c);
              z_grad.at(k, c) += s_zy * (gj_zy.at(k, c) + gm_zy.at(k, c));
            }
          encoder->apply_gradient(idx, z_grad);
        } else {
          detail::dv_ascent_step(critic_xz, adam_xz, hconcat(x_b, z_b),
                                 hconcat(x_b, z_perm), w_xz, cfg.score_clip,
                                 cfg.ema_rate, ema_xz, ws);
          detail::dv_ascent_step(critic_zy, adam_zy, hconcat(z_b, y_b),
                                 hconcat(z_b, y_perm), w_zy, cfg.score_clip,
                                 cfg.ema_rate, ema_zy, ws);
        }
      } catch (const Error& e) {
        throw layer_err(epoch, e.what());
      }
      ++global_step;
    }

    if (cfg.train_encoder) z_full = encoder->encode_all();

    TraceRecord rec;
    rec.epoch = epoch;
    rec.alpha = alpha_rec;
    rec.d_eff_z = d_eff_z;
    rec.d_eff_y = d_eff_y;
    try {
      rec.i_xz_raw = detail::full_set_dv(critic_xz, x, z_full, rng);
      rec.i_zy_raw = detail::full_set_dv(critic_zy, z_full, y, rng);
    } catch (const Error& e) {
      throw layer_err(epoch, e.what());
    }
    rec.i_xz_norm = rec.i_xz_raw / (rec.d_eff_z * rec.d_eff_z);
    rec.i_zy_norm = rec.i_zy_raw / (rec.d_eff_y * rec.d_eff_y);
    rec.loss = flownib_loss(rec.i_xz_norm, rec.i_zy_norm, rec.alpha);
    trace.records.push_back(rec);
  }
  return trace;
}

}  // namespace detail

/// Algorithm: per layer, two critics trained by gradient ascent on their
/// alpha-weighted DV terms, with end-of-epoch full-set estimates recorded
/// as one TraceRecord per epoch. Deterministic given cfg.seed; layers are
/// independent units and may run on up to `threads` workers.
inline std::vector<LayerTrace> run_flownib(const RepresentationSet& reps,
                                           const FlowNIBConfig& cfg,
                                           std::size_t threads = 1) {
  validate(reps);
  validate(cfg.schedule);
  if (cfg.epochs < 1) throw Error("flownib: epochs must be >= 1");
  if (cfg.batch_size < 2) throw Error("flownib: batch_size must be >= 2");
  if (cfg.train_encoder && cfg.encoder_dim == 0)
    throw Error("flownib: encoder_dim must be >= 1 in encoder mode");
  std::vector<LayerTrace> traces(reps.layers.size());
  parallel_for(reps.layers.size(), threads, [&](std::size_t l) {
    traces[l] = detail::run_flownib_layer(reps, cfg, l);
  });
  return traces;
}

/// One run per delta with a shared seed; everything else fixed.
inline std::vector<std::vector<LayerTrace>> delta_ablation(
    const RepresentationSet& reps, const FlowNIBConfig& cfg,
    const std::vector<double>& deltas) {
  if (deltas.size() < 2) throw Error("delta_ablation: need at least 2 deltas");
  std::vector<std::vector<LayerTrace>> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    FlowNIBConfig c = cfg;
    c.schedule.delta = d;
    out.push_back(run_flownib(reps, c));
  }
  return out;
}

/// Synthetic regression family for the output-dimension ablation:
/// X ~ N(0, I), Y = X B + noise (Y = X exactly when d_y == d_x).
struct YdimAblationConfig {
  std::size_t n = 3000;
  std::size_t d_x = 8;
  std::vector<std::size_t> layer_dims = {6, 4};  // encoder output dims
  double target_noise = 0.1;
  std::uint64_t seed = 0;
  FlowNIBConfig run;  // train_encoder is forced on
};

struct YdimLayerSummary {
  std::size_t layer = 0;
  double final_i_xz_raw = 0.0;
  double final_i_zy_raw = 0.0;
  double final_d_eff_z = 0.0;
};

struct YdimResult {
  std::size_t d_y = 0;
  std::vector<LayerTrace> traces;
  std::vector<YdimLayerSummary> per_layer;
};

inline std::vector<YdimResult> ydim_ablation(const YdimAblationConfig& cfg,
                                             const std::vector<std::size_t>& y_dims) {
  if (cfg.layer_dims.empty()) throw Error("ydim_ablation: no layers");
  if (y_dims.size() < 3)
    throw Error("ydim_ablation: need at least 3 output dimensions");
  std::size_t lo = y_dims[0], hi = y_dims[0];
  for (auto d : y_dims) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (!(lo < cfg.d_x && hi >= cfg.d_x))
    throw Error("ydim_ablation: dimensions must span below and above d_x");

  RandomSource rng(cfg.seed);
  SampleMatrix x(cfg.n, cfg.d_x);
  for (auto& v : x.data) v = rng.gaussian();

  std::vector<YdimResult> results;
  for (std::size_t d_y : y_dims) {
    if (d_y == 0) throw Error("ydim_ablation: zero output dimension");
    RandomSource task_rng(derive_seed(cfg.seed, 1000 + d_y));
    SampleMatrix y(cfg.n, d_y);
    if (d_y == cfg.d_x) {
      y = x;  // identity target
    } else {
      std::vector<double> b(cfg.d_x * d_y);
      for (auto& v : b) v = task_rng.gaussian(1.0 / std::sqrt(double(cfg.d_x)));
      for (std::size_t i = 0; i < cfg.n; ++i)
        for (std::size_t c = 0; c < d_y; ++c) {
          double acc = task_rng.gaussian(cfg.target_noise);
          for (std::size_t j = 0; j < cfg.d_x; ++j)
            acc += x.at(i, j) * b[j * d_y + c];
          y.at(i, c) = acc;
        }
    }

    RepresentationSet reps;
    reps.x = x;
    reps.y = std::move(y);
    for (std::size_t l = 0; l < cfg.layer_dims.size(); ++l) reps.layers.push_back(x);

    YdimResult r;
    r.d_y = d_y;
    for (std::size_t l = 0; l < cfg.layer_dims.size(); ++l) {
      FlowNIBConfig run = cfg.run;
      run.train_encoder = true;
      run.encoder_dim = cfg.layer_dims[l];
      run.seed = derive_seed(cfg.seed, 7000 + d_y * 31 + l);
      RepresentationSet single;
      single.x = reps.x;
      single.y = reps.y;
      single.layers = {reps.layers[l]};
      auto traces = run_flownib(single, run);
      traces[0].layer = l;
      r.traces.push_back(std::move(traces[0]));
      const auto& last = r.traces.back().records.back();
      r.per_layer.push_back(
          YdimLayerSummary{l, last.i_xz_raw, last.i_zy_raw, last.d_eff_z});
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace ibflow

#endif  // IBFLOW_FLOWNIB_HPP
