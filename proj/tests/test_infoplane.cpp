#include <doctest.h>

#include <cmath>

#include "ibflow/infoplane.hpp"

using namespace ibflow;

namespace {

LayerTrace synthetic_trace(std::size_t layer, std::size_t epochs,
                           double (*xz)(std::size_t), double (*zy)(std::size_t)) {
  LayerTrace t;
  t.layer = layer;
  for (std::size_t e = 0; e < epochs; ++e) {
    TraceRecord r;
    r.epoch = e;
    r.i_xz_raw = xz(e);
    r.i_zy_raw = zy(e);
    r.i_xz_norm = r.i_xz_raw;
    r.i_zy_norm = r.i_zy_raw;
    r.alpha = 1.0 - 0.01 * static_cast<double>(e);
    r.loss = flownib_loss(r.i_xz_norm, r.i_zy_norm, r.alpha);
    t.records.push_back(r);
  }
  return t;
}

std::size_t labeled_epochs(const std::vector<PhaseLabel>& labels, Phase want) {
  std::size_t count = 0;
  for (const auto& range : labels)
    if (range.label == want) count += range.end - range.begin;
  return count;
}

}  // namespace

TEST_CASE("export_plane: offsets shift x by layer index only") {
  std::vector<LayerTrace> traces;
  traces.push_back(synthetic_trace(
      0, 4, [](std::size_t e) { return 1.0 + 0.1 * e; },
      [](std::size_t e) { return 0.5 + 0.05 * e; }));
  traces.push_back(synthetic_trace(
      3, 4, [](std::size_t e) { return 1.0 + 0.1 * e; },
      [](std::size_t e) { return 0.5 + 0.05 * e; }));

  const auto points = export_plane(traces, 0.05, false);
  REQUIRE(points.size() == 8);
  // layer 0: x unchanged
  CHECK(points[0].x == doctest::Approx(1.0));
  // layer 3 with offset 0.05 and i_xz = 1.0 -> 1.15
  CHECK(points[4].x == doctest::Approx(1.15));
  // y untouched by the offset
  CHECK(points[4].y == points[0].y);

  // offset linearity across the whole export
  const auto raw = export_plane(traces, 0.0, false);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].x == doctest::Approx(
        raw[i].x + 0.05 * static_cast<double>(points[i].layer)).epsilon(1e-12));
    CHECK(points[i].y == raw[i].y);
  }

  CHECK_THROWS_WITH_AS(export_plane({}, 0.05, false), "no traces", Error);
}

TEST_CASE("export_plane: normalized flag picks the normalized series") {
  auto trace = synthetic_trace(
      0, 3, [](std::size_t e) { return 2.0 + double(e); },
      [](std::size_t) { return 1.0; });
  for (auto& r : trace.records) r.i_xz_norm = r.i_xz_raw / 4.0;
  const auto norm = export_plane({trace}, 0.0, true);
  const auto raw = export_plane({trace}, 0.0, false);
  CHECK(norm[0].x == doctest::Approx(raw[0].x / 4.0));
}

TEST_CASE("detect_phases: constructed monotone traces") {
  const std::size_t epochs = 40;
  const auto fitting = synthetic_trace(
      0, epochs, [](std::size_t e) { return 0.02 * e; },
      [](std::size_t e) { return 0.01 * e; });
  auto labels = detect_phases(fitting, 5);
  CHECK(labeled_epochs(labels, Phase::Fitting) >=
        static_cast<std::size_t>(0.95 * epochs));

  const auto compression = synthetic_trace(
      0, epochs, [](std::size_t e) { return 1.0 - 0.01 * e; },
      [](std::size_t e) { return 0.01 * e; });
  labels = detect_phases(compression, 5);
  CHECK(labeled_epochs(labels, Phase::Compression) >=
        static_cast<std::size_t>(0.95 * epochs));

  const auto flat = synthetic_trace(
      0, epochs, [](std::size_t) { return 0.5; },
      [](std::size_t) { return 0.25; });
  labels = detect_phases(flat, 5);
  CHECK(labeled_epochs(labels, Phase::Unlabeled) == epochs);
}

TEST_CASE("detect_phases: ranges partition the epochs exactly once") {
  const auto trace = synthetic_trace(
      0, 30, [](std::size_t e) { return e < 15 ? 0.05 * e : 0.75 - 0.03 * (e - 15); },
      [](std::size_t e) { return 0.01 * e; });
  const auto labels = detect_phases(trace, 5);
  std::size_t covered = 0;
  std::size_t expected_begin = 0;
  for (const auto& range : labels) {
    CHECK(range.begin == expected_begin);
    CHECK(range.end > range.begin);
    covered += range.end - range.begin;
    expected_begin = range.end;
  }
  CHECK(covered == trace.records.size());

  // mixed trace contains both phases
  CHECK(labeled_epochs(labels, Phase::Fitting) > 0);
  CHECK(labeled_epochs(labels, Phase::Compression) > 0);
}

TEST_CASE("detect_phases: guards") {
  const auto trace = synthetic_trace(
      0, 6, [](std::size_t e) { return double(e); },
      [](std::size_t e) { return double(e); });
  CHECK_THROWS_WITH_AS(detect_phases(trace, 5), "detect_phases: trace too short",
                       Error);
  CHECK_THROWS_AS(detect_phases(trace, 0), Error);
}

TEST_CASE("mic_summary: min scoring and harmonic option") {
  auto t0 = synthetic_trace(
      0, 3, [](std::size_t) { return 0.0; }, [](std::size_t) { return 0.0; });
  t0.records.back().i_xz_norm = 0.2;
  t0.records.back().i_zy_norm = 0.4;
  auto t1 = t0;
  t1.layer = 1;
  t1.records.back().i_xz_norm = 0.0;
  t1.records.back().i_zy_norm = 0.9;
  auto t2 = t0;
  t2.layer = 2;
  t2.records.back().i_xz_norm = 0.31;
  t2.records.back().i_zy_norm = 0.31;

  const auto summary = mic_summary({t0, t1, t2});
  REQUIRE(summary.size() == 3);
  CHECK(summary[0].mic_score == doctest::Approx(0.2));
  CHECK(summary[1].mic_score == doctest::Approx(0.0));
  CHECK(summary[2].mic_score == doctest::Approx(0.31));
  CHECK(summary[0].final_i_xz_norm == doctest::Approx(0.2));
  CHECK(summary[0].final_i_zy_norm == doctest::Approx(0.4));

  const auto harmonic = mic_summary({t0}, true);
  CHECK(harmonic[0].mic_score ==
        doctest::Approx(2.0 * 0.2 * 0.4 / 0.6).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(mic_summary({}), "no traces", Error);
}
