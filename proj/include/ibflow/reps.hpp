#ifndef IBFLOW_REPS_HPP
#define IBFLOW_REPS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibflow/effdim.hpp"
#include "ibflow/error.hpp"
#include "ibflow/io.hpp"
#include "ibflow/matrix.hpp"
#include "ibflow/mi.hpp"
#include "ibflow/rng.hpp"

namespace ibflow {

/// Input X plus per-layer representations Z_1..Z_L and target Y, all
/// row-aligned. Classification targets are stored one-hot expanded.
struct RepresentationSet {
  SampleMatrix x;
  std::vector<SampleMatrix> layers;
  SampleMatrix y;
  bool y_classification = false;
};

inline void validate(const RepresentationSet& reps) {
  if (reps.layers.empty()) throw Error("representation set: no layers");
  const std::size_t n = reps.x.n_rows;
  if (n < 2) throw Error("representation set: need at least 2 rows");
  if (reps.y.n_rows != n) throw Error("representation set: y row mismatch");
  for (std::size_t l = 0; l < reps.layers.size(); ++l)
    if (reps.layers[l].n_rows != n)
      throw Error("representation set: layer " + std::to_string(l) +
                  " row mismatch");
}

/// d independent coordinate pairs, each bivariate normal with correlation
/// rho. True MI = -(d/2) ln(1 - rho^2), attached as metadata.
inline MIPairBatch gen_gaussian_pair(std::size_t n, std::size_t d, double rho,
                                     std::uint64_t seed) {
  if (std::abs(rho) >= 1.0) throw Error("gen_gaussian_pair: |rho| must be < 1");
  if (d < 1) throw Error("gen_gaussian_pair: d must be >= 1");
  RandomSource rng(seed);
  SampleMatrix a(n, d);
  SampleMatrix b(n, d);
  const double noise = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double u = rng.gaussian();
      a.at(i, j) = u;
      b.at(i, j) = rho * u + noise * rng.gaussian();
    }
  MIPairBatch batch{std::move(a), std::move(b)};
  batch.true_mi = -0.5 * static_cast<double>(d) * std::log(1.0 - rho * rho);
  return batch;
}

/// Token sequences with labels depending on both ends: y = 1 iff the first
/// and last token fall in the same half of the vocabulary.
struct SequenceDataset {
  std::vector<int> tokens;  // n x len, row-major
  std::size_t n = 0;
  std::size_t len = 0;
  int vocab = 0;
  SampleMatrix labels;  // n x 1, values in {0, 1}

  int token(std::size_t i, std::size_t t) const { return tokens[i * len + t]; }
};

inline SequenceDataset gen_sequence_task(std::size_t n, std::size_t len,
                                         int vocab, std::uint64_t seed) {
  if (len < 2) throw Error("gen_sequence_task: len must be >= 2");
  if (vocab < 2) throw Error("gen_sequence_task: vocab must be >= 2");
  RandomSource rng(seed);
  SequenceDataset ds;
  ds.n = n;
  ds.len = len;
  ds.vocab = vocab;
  ds.tokens.resize(n * len);
  ds.labels = SampleMatrix(n, 1);
  auto half = [vocab](int t) { return 2 * t < vocab; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < len; ++t)
      ds.tokens[i * len + t] = static_cast<int>(rng.index(vocab));
    ds.labels.at(i, 0) =
        half(ds.token(i, 0)) == half(ds.token(i, len - 1)) ? 1.0 : 0.0;
  }
  return ds;
}

/// One-hot expansion of the token matrix: n x (len * vocab).
inline SampleMatrix one_hot_tokens(const SequenceDataset& ds) {
  SampleMatrix m(ds.n, ds.len * static_cast<std::size_t>(ds.vocab));
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t t = 0; t < ds.len; ++t)
      m.at(i, t * ds.vocab + ds.token(i, t)) = 1.0;
  return m;
}

/// One-hot expansion of a single integer label column.
inline SampleMatrix one_hot_labels(const SampleMatrix& labels,
                                   std::size_t n_classes) {
  SampleMatrix m(labels.n_rows, n_classes);
  for (std::size_t i = 0; i < labels.n_rows; ++i) {
    const auto k = static_cast<long>(std::llround(labels.at(i, 0)));
    if (k < 0 || static_cast<std::size_t>(k) >= n_classes)
      throw Error("label out of range at row " + std::to_string(i));
    m.at(i, static_cast<std::size_t>(k)) = 1.0;
  }
  return m;
}

/// Frozen random sequence encoder. Each direction pools token embeddings
/// with position weights gamma^k decaying from its own end of the sequence,
/// so the forward code is first-token heavy and the backward code is
/// last-token heavy. `symmetric` shares one projection between directions
/// (then palindromic inputs give identical forward/backward codes).
struct EncoderSpec {
  std::size_t embed_dim = 16;
  std::size_t rep_dim = 8;
  std::uint64_t seed = 0;
  double gamma = 0.7;
  bool symmetric = false;
};

namespace detail {

struct EncoderWeights {
  std::vector<double> embed;   // vocab x embed_dim
  std::vector<double> a_fwd;   // embed_dim x rep_dim
  std::vector<double> a_bwd;   // embed_dim x rep_dim
};

inline EncoderWeights build_encoder(const EncoderSpec& spec, int vocab) {
  if (spec.embed_dim < 1 || spec.rep_dim < 1)
    throw Error("encoder spec: dimensions must be >= 1");
  if (vocab < 1) throw Error("encoder spec: empty vocabulary");
  EncoderWeights w;
  RandomSource rng(spec.seed);
  w.embed.resize(static_cast<std::size_t>(vocab) * spec.embed_dim);
  for (auto& v : w.embed) v = rng.gaussian();
  w.a_fwd.resize(spec.embed_dim * spec.rep_dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(spec.embed_dim));
  for (auto& v : w.a_fwd) v = rng.gaussian(s);
  if (spec.symmetric) {
    w.a_bwd = w.a_fwd;
  } else {
    w.a_bwd.resize(spec.embed_dim * spec.rep_dim);
    for (auto& v : w.a_bwd) v = rng.gaussian(s);
  }
  return w;
}

inline void encode_rows(const SequenceDataset& ds, const EncoderSpec& spec,
                        const EncoderWeights& w, bool backward,
                        SampleMatrix& out, std::size_t col_offset) {
  for (int t : ds.tokens)
    if (t < 0 || t >= ds.vocab)
      throw Error("token outside vocabulary: " + std::to_string(t));
  std::vector<double> pooled(spec.embed_dim);
  const auto& proj = backward ? w.a_bwd : w.a_fwd;
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::fill(pooled.begin(), pooled.end(), 0.0);
    double wsum = 0.0;
    double wk = 1.0;
    for (std::size_t k = 0; k < ds.len; ++k) {
      const std::size_t t = backward ? ds.len - 1 - k : k;
      const double* e =
          w.embed.data() + static_cast<std::size_t>(ds.token(i, t)) * spec.embed_dim;
      for (std::size_t j = 0; j < spec.embed_dim; ++j) pooled[j] += wk * e[j];
      wsum += wk;
      wk *= spec.gamma;
    }
    for (std::size_t j = 0; j < spec.embed_dim; ++j) pooled[j] /= wsum;
    for (std::size_t r = 0; r < spec.rep_dim; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < spec.embed_dim; ++j)
        acc += pooled[j] * proj[j * spec.rep_dim + r];
      out.at(i, col_offset + r) = std::tanh(acc);
    }
  }
}

}  // namespace detail

/// Forward code z from the full prefix (first-token heavy pooling).
inline SampleMatrix encode_unidir(const SequenceDataset& ds,
                                  const EncoderSpec& spec) {
  const auto w = detail::build_encoder(spec, ds.vocab);
  SampleMatrix out(ds.n, spec.rep_dim);
  detail::encode_rows(ds, spec, w, false, out, 0);
  return out;
}

/// Concatenated forward and backward codes, dimension 2D. The forward
/// block equals encode_unidir for the same spec.
inline SampleMatrix encode_bidir(const SequenceDataset& ds,
                                 const EncoderSpec& spec) {
  const auto w = detail::build_encoder(spec, ds.vocab);
  SampleMatrix out(ds.n, 2 * spec.rep_dim);
  detail::encode_rows(ds, spec, w, false, out, 0);
  detail::encode_rows(ds, spec, w, true, out, spec.rep_dim);
  return out;
}

/// Anisotropic regression benchmark: independent Gaussian columns with the
/// given stddevs, scalar target carried by the lowest-variance column.
/// Input-preserving and target-preserving projections disagree, which is
/// what the trainable-encoder runs need.
inline RepresentationSet gen_anisotropic_regression(std::size_t n,
                                                    std::vector<double> sigma,
                                                    double target_noise,
                                                    std::uint64_t seed) {
  if (sigma.empty()) throw Error("gen_anisotropic_regression: no columns");
  RandomSource rng(seed);
  RepresentationSet reps;
  reps.x = SampleMatrix(n, sigma.size());
  reps.y = SampleMatrix(n, 1);
  const std::size_t last = sigma.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < sigma.size(); ++j)
      reps.x.at(i, j) = rng.gaussian(sigma[j]);
    reps.y.at(i, 0) =
        reps.x.at(i, last) / sigma[last] + rng.gaussian(target_noise);
  }
  reps.layers = {reps.x};
  return reps;
}

/// Fixed-representation benchmark: Z correlated with X coordinatewise,
/// scalar target carried by Z's first coordinate.
inline RepresentationSet gen_correlated_benchmark(std::size_t n, std::size_t d,
                                                  double rho,
                                                  double target_noise,
                                                  std::uint64_t seed) {
  const auto pair = gen_gaussian_pair(n, d, rho, seed);
  RandomSource rng(derive_seed(seed, 17));
  RepresentationSet reps;
  reps.x = pair.a;
  reps.layers = {pair.b};
  reps.y = SampleMatrix(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    reps.y.at(i, 0) = pair.b.at(i, 0) + rng.gaussian(target_noise);
  return reps;
}

/// One seed of the unidirectional-vs-bidirectional comparison: four
/// trained MI estimates plus the two deterministic spectral dimensions.
struct BidirCompareConfig {
  std::size_t n = 5000;
  std::size_t len = 4;
  int vocab = 4;
  std::size_t embed_dim = 8;
  std::size_t rep_dim = 4;
  double gamma = 0.5;
  std::size_t hidden = 64;
  double lr = 3e-3;
  std::size_t steps = 900;
  std::size_t batch_size = 256;
  double mi_tolerance = 0.05;
};

struct BidirSeedResult {
  std::uint64_t seed = 0;
  double i_x_uni = 0.0;
  double i_x_bi = 0.0;
  double i_zy_uni = 0.0;
  double i_zy_bi = 0.0;
  double d_eff_uni = 0.0;
  double d_eff_bi = 0.0;
  bool mi_x_ok = false;
  bool mi_y_ok = false;
  bool d_eff_ok = false;
};

inline BidirSeedResult compare_bidir_seed(const BidirCompareConfig& cfg,
                                          std::uint64_t seed) {
  const auto ds = gen_sequence_task(cfg.n, cfg.len, cfg.vocab,
                                    derive_seed(seed, 1));
  EncoderSpec spec;
  spec.embed_dim = cfg.embed_dim;
  spec.rep_dim = cfg.rep_dim;
  spec.gamma = cfg.gamma;
  spec.seed = derive_seed(seed, 2);

  const SampleMatrix x = one_hot_tokens(ds);
  const SampleMatrix y = one_hot_labels(ds.labels, 2);
  const SampleMatrix z_uni = encode_unidir(ds, spec);
  const SampleMatrix z_bi = encode_bidir(ds, spec);

  MICriticConfig mi;
  mi.hidden = cfg.hidden;
  mi.lr = cfg.lr;
  mi.steps = cfg.steps;
  mi.batch_size = cfg.batch_size;

  auto estimate = [&mi](const SampleMatrix& a, const SampleMatrix& b,
                        std::uint64_t s) {
    MICriticConfig c = mi;
    c.seed = s;
    return train_mi_critic(MIPairBatch{a, b}, c).estimate.value_nats;
  };

  BidirSeedResult r;
  r.seed = seed;
  r.i_x_uni = estimate(x, z_uni, derive_seed(seed, 3));
  r.i_x_bi = estimate(x, z_bi, derive_seed(seed, 4));
  r.i_zy_uni = estimate(z_uni, y, derive_seed(seed, 5));
  r.i_zy_bi = estimate(z_bi, y, derive_seed(seed, 6));
  r.d_eff_uni = d_eff_of_data(z_uni);
  r.d_eff_bi = d_eff_of_data(z_bi);
  r.mi_x_ok = r.i_x_bi >= r.i_x_uni - cfg.mi_tolerance;
  r.mi_y_ok = r.i_zy_bi >= r.i_zy_uni - cfg.mi_tolerance;
  r.d_eff_ok = r.d_eff_bi >= r.d_eff_uni - 1e-12;
  return r;
}

/// Empirical pieces of the representation-difference identity
///   E||z1 - z2||^2 = tr Cov(z1) + tr Cov(z2) - 2 tr Cov(z1, z2) + ||E[z1 - z2]||^2
/// plus the identity residual for assertion.
struct ReprDiffStats {
  double mean_sq_diff = 0.0;
  double tr_cov1 = 0.0;
  double tr_cov2 = 0.0;
  double tr_crosscov = 0.0;
  double mean_diff_norm_sq = 0.0;
  double identity_residual = 0.0;
};

inline ReprDiffStats repr_diff_stats(const SampleMatrix& z1,
                                     const SampleMatrix& z2) {
  if (z1.n_rows != z2.n_rows || z1.n_cols != z2.n_cols)
    throw Error("repr_diff_stats: shape mismatch");
  const std::size_t n = z1.n_rows;
  const std::size_t d = z1.n_cols;
  ReprDiffStats st;
  std::vector<double> m1(d, 0.0), m2(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      m1[j] += z1.at(i, j);
      m2[j] += z2.at(i, j);
      const double diff = z1.at(i, j) - z2.at(i, j);
      st.mean_sq_diff += diff * diff;
    }
  st.mean_sq_diff /= static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    m1[j] /= static_cast<double>(n);
    m2[j] /= static_cast<double>(n);
    const double dm = m1[j] - m2[j];
    st.mean_diff_norm_sq += dm * dm;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c1 = z1.at(i, j) - m1[j];
      const double c2 = z2.at(i, j) - m2[j];
      st.tr_cov1 += c1 * c1;
      st.tr_cov2 += c2 * c2;
      st.tr_crosscov += c1 * c2;
    }
  st.tr_cov1 /= static_cast<double>(n);
  st.tr_cov2 /= static_cast<double>(n);
  st.tr_crosscov /= static_cast<double>(n);
  st.identity_residual =
      std::abs(st.mean_sq_diff - (st.tr_cov1 + st.tr_cov2 -
                                  2.0 * st.tr_crosscov + st.mean_diff_norm_sq));
  return st;
}

/// Manifest format: {"x": path, "y": path, "layers": [path, ...],
/// "y_kind": "regression" | "classification"}. Paths are resolved
/// relative to the manifest location. Classification y is a single
/// integer column, one-hot expanded on load.
inline RepresentationSet load_representation_dump(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open manifest: " + manifest_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid manifest " + manifest_path + ": " + e.what());
  }
  for (const char* key : {"x", "y", "layers"})
    if (!doc.contains(key))
      throw Error("manifest " + manifest_path + " missing key '" + key + "'");

  const auto base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  RepresentationSet reps;
  reps.x = read_csv(resolve(doc["x"].get<std::string>()));
  const std::string y_path = resolve(doc["y"].get<std::string>());
  SampleMatrix y_raw = read_csv(y_path);
  for (const auto& layer : doc["layers"])
    reps.layers.push_back(read_csv(resolve(layer.get<std::string>())));

  reps.y_classification =
      doc.value("y_kind", std::string("regression")) == "classification";
  if (reps.y_classification) {
    if (y_raw.n_cols != 1)
      throw Error("classification y must be a single column: " + y_path);
    long max_label = 0;
    for (std::size_t i = 0; i < y_raw.n_rows; ++i)
      max_label = std::max(max_label,
                           static_cast<long>(std::llround(y_raw.at(i, 0))));
    reps.y = one_hot_labels(y_raw, static_cast<std::size_t>(max_label) + 1);
  } else {
    reps.y = std::move(y_raw);
  }

  const std::size_t n = reps.x.n_rows;
  if (reps.y.n_rows != n)
    throw Error("row count mismatch: " + y_path + " has " +
                std::to_string(reps.y.n_rows) + " rows, x has " +
                std::to_string(n));
  for (std::size_t l = 0; l < reps.layers.size(); ++l)
    if (reps.layers[l].n_rows != n)
      throw Error("row count mismatch: " +
                  resolve(doc["layers"][l].get<std::string>()) + " has " +
                  std::to_string(reps.layers[l].n_rows) + " rows, x has " +
                  std::to_string(n));
  validate(reps);
  return reps;
}

/// Write a set as CSV files plus manifest.json under dir; returns the
/// manifest path. Inverse of load_representation_dump for regression sets.
inline std::string save_representation_dump(const RepresentationSet& reps,
                                            const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_csv((base / "x.csv").string(), reps.x);
  if (reps.y_classification) {
    // stored as a single integer label column; re-expanded on load
    SampleMatrix labels(reps.y.n_rows, 1);
    for (std::size_t i = 0; i < reps.y.n_rows; ++i) {
      std::size_t argmax = 0;
      for (std::size_t j = 1; j < reps.y.n_cols; ++j)
        if (reps.y.at(i, j) > reps.y.at(i, argmax)) argmax = j;
      labels.at(i, 0) = static_cast<double>(argmax);
    }
    write_csv((base / "y.csv").string(), labels);
  } else {
    write_csv((base / "y.csv").string(), reps.y);
  }
  nlohmann::json doc;
  doc["x"] = "x.csv";
  doc["y"] = "y.csv";
  doc["y_kind"] = reps.y_classification ? "classification" : "regression";
  doc["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < reps.layers.size(); ++l) {
    const std::string name = "layer_" + std::to_string(l) + ".csv";
    write_csv((base / name).string(), reps.layers[l]);
    doc["layers"].push_back(name);
  }
  const std::string manifest = (base / "manifest.json").string();
  std::ofstream out(manifest);
  if (!out) throw Error("cannot open manifest for writing: " + manifest);
  out << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace ibflow

#endif  // IBFLOW_REPS_HPP
