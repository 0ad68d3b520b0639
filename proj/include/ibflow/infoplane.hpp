#ifndef IBFLOW_INFOPLANE_HPP
#define IBFLOW_INFOPLANE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ibflow/error.hpp"
#include "ibflow/flownib.hpp"

namespace ibflow {

/// One point on the information plane: x = I(X;Z), y = I(Z;Y).
struct PlanePoint {
  std::size_t layer = 0;
  std::size_t epoch = 0;
  double x = 0.0;
  double y = 0.0;
  double alpha = 1.0;
};

enum class Phase { Fitting, Compression, Unlabeled };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Fitting: return "fitting";
    case Phase::Compression: return "compression";
    case Phase::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

/// Half-open epoch range [begin, end) with one label; ranges partition
/// the trace.
struct PhaseLabel {
  std::size_t begin = 0;
  std::size_t end = 0;
  Phase label = Phase::Unlabeled;
};

/// Flatten traces to plane points. With a non-zero offset, layer l's
/// x-coordinates shift by l * offset (visual separation; export only,
/// traces are untouched). `normalized` picks the dimension-normalized
/// estimates over the raw ones.
inline std::vector<PlanePoint> export_plane(const std::vector<LayerTrace>& traces,
                                            double layer_offset,
                                            bool normalized) {
  if (traces.empty()) throw Error("no traces");
  std::vector<PlanePoint> points;
  for (const auto& trace : traces)
    for (const auto& rec : trace.records) {
      PlanePoint p;
      p.layer = trace.layer;
      p.epoch = rec.epoch;
      p.x = (normalized ? rec.i_xz_norm : rec.i_xz_raw) +
            static_cast<double>(trace.layer) * layer_offset;
      p.y = normalized ? rec.i_zy_norm : rec.i_zy_raw;
      p.alpha = rec.alpha;
      points.push_back(p);
    }
  return points;
}

namespace detail {

/// Least-squares slope of values[lo..hi] against the epoch index.
inline double ls_slope(const std::vector<double>& values, std::size_t lo,
                       std::size_t hi) {
  const double n = static_cast<double>(hi - lo + 1);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const double xi = static_cast<double>(i);
    sx += xi;
    sy += values[i];
    sxx += xi * xi;
    sxy += xi * values[i];
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

}  // namespace detail

/// Label each epoch by the local trend of the two raw MI series: both
/// rising -> fitting; I(X;Z) falling while I(Z;Y) holds or rises ->
/// compression; otherwise unlabeled. Slopes come from least-squares fits
/// over a window centered at the epoch.
inline std::vector<PhaseLabel> detect_phases(const LayerTrace& trace,
                                             std::size_t window,
                                             double tol = 1e-4) {
  if (window < 1) throw Error("detect_phases: window must be >= 1");
  const std::size_t epochs = trace.records.size();
  if (epochs < 2 * window) throw Error("detect_phases: trace too short");

  std::vector<double> xz(epochs), zy(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    xz[e] = trace.records[e].i_xz_raw;
    zy[e] = trace.records[e].i_zy_raw;
  }

  const std::size_t half = window / 2;
  std::vector<Phase> labels(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t lo = e > half ? e - half : 0;
    const std::size_t hi = std::min(e + half, epochs - 1);
    const double sx = detail::ls_slope(xz, lo, hi);
    const double sy = detail::ls_slope(zy, lo, hi);
    if (sx > tol && sy > tol)
      labels[e] = Phase::Fitting;
    else if (sx < -tol && sy >= -tol)
      labels[e] = Phase::Compression;
    else
      labels[e] = Phase::Unlabeled;
  }

  std::vector<PhaseLabel> ranges;
  std::size_t begin = 0;
  for (std::size_t e = 1; e <= epochs; ++e) {
    if (e == epochs || labels[e] != labels[begin]) {
      ranges.push_back(PhaseLabel{begin, e, labels[begin]});
      begin = e;
    }
  }
  return ranges;
}

/// Final-epoch coordinate pair per layer with a scalar quality score.
/// min() is the conservative reading of "both simultaneously large";
/// the harmonic mean is available as an alternative.
struct MicRecord {
  std::size_t layer = 0;
  double final_i_xz_norm = 0.0;
  double final_i_zy_norm = 0.0;
  double mic_score = 0.0;
};

inline std::vector<MicRecord> mic_summary(const std::vector<LayerTrace>& traces,
                                          bool harmonic_mean = false) {
  if (traces.empty()) throw Error("no traces");
  std::vector<MicRecord> out;
  for (const auto& trace : traces) {
    if (trace.records.empty()) throw Error("no traces");
    const auto& last = trace.records.back();
    MicRecord r;
    r.layer = trace.layer;
    r.final_i_xz_norm = last.i_xz_norm;
    r.final_i_zy_norm = last.i_zy_norm;
    const double a = last.i_xz_norm;
    const double b = last.i_zy_norm;
    if (harmonic_mean)
      r.mic_score = (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
    else
      r.mic_score = std::min(a, b);
    out.push_back(r);
  }
  return out;
}

}  // namespace ibflow

#endif  // IBFLOW_INFOPLANE_HPP
