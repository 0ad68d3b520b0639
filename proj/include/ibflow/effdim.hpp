#ifndef IBFLOW_EFFDIM_HPP
#define IBFLOW_EFFDIM_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "ibflow/error.hpp"
#include "ibflow/matrix.hpp"

namespace ibflow {

/// Spectral concentration measure over a normalized eigenvalue distribution.
/// Both choices are Schur-concave, non-negative and bounded by log n.
enum class SpectralMeasure {
  ShannonEntropy,
  L2Participation,
};

/// Probability-normalized covariance spectrum: p_i > 0, sum 1, descending.
struct NormalizedSpectrum {
  std::vector<double> p;
};

/// Drop numerically-zero eigenvalues and normalize the rest to sum 1.
/// An eigenvalue counts as zero when it falls below rel_floor relative to
/// the largest one, or below rel_floor in absolute terms (round-off scale
/// for unit-scale data). Negative round-off eigenvalues are clamped to 0.
inline NormalizedSpectrum normalize_spectrum(const Spectrum& s,
                                             double rel_floor = 1e-10) {
  double max_eig = 0.0;
  for (double v : s.eigenvalues) max_eig = std::max(max_eig, v);
  if (max_eig <= rel_floor) throw Error("degenerate spectrum");

  const double cut = rel_floor * max_eig;
  std::vector<double> kept;
  kept.reserve(s.eigenvalues.size());
  for (double v : s.eigenvalues) {
    const double clamped = std::max(v, 0.0);
    if (clamped > cut && clamped > rel_floor) kept.push_back(clamped);
  }
  if (kept.empty()) throw Error("degenerate spectrum");

  double sum = 0.0;
  for (double v : kept) sum += v;
  NormalizedSpectrum out;
  out.p.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) out.p[i] = kept[i] / sum;
  std::sort(out.p.begin(), out.p.end(), std::greater<>());
  return out;
}

/// M(p): Shannon entropy -sum p ln p, or ln(1 / sum p^2). Nats.
inline double measure(const NormalizedSpectrum& spec, SpectralMeasure m) {
  switch (m) {
    case SpectralMeasure::ShannonEntropy: {
      double h = 0.0;
      for (double p : spec.p)
        if (p > 0.0) h -= p * std::log(p);
      return h;
    }
    case SpectralMeasure::L2Participation: {
      double s2 = 0.0;
      for (double p : spec.p) s2 += p * p;
      return std::log(1.0 / s2);
    }
  }
  throw Error("unknown spectral measure");
}

/// Effective dimensionality exp(M(p)). For the L2 measure this equals
/// (sum lambda)^2 / sum lambda^2 over the retained eigenvalues.
inline double d_eff(const Spectrum& s,
                    SpectralMeasure m = SpectralMeasure::L2Participation) {
  return std::exp(measure(normalize_spectrum(s), m));
}

/// Effective dimensionality of a data matrix via its PCA spectrum.
inline double d_eff_of_data(const SampleMatrix& x,
                            SpectralMeasure m = SpectralMeasure::L2Participation) {
  return d_eff(pca_spectrum(x), m);
}

inline const char* measure_name(SpectralMeasure m) {
  return m == SpectralMeasure::ShannonEntropy ? "shannon" : "l2";
}

}  // namespace ibflow

#endif  // IBFLOW_EFFDIM_HPP
