#include <doctest.h>

#include <cmath>

#include "ibflow/effdim.hpp"
#include "ibflow/rng.hpp"

using namespace ibflow;

namespace {

NormalizedSpectrum random_normalized(std::size_t n, RandomSource& rng) {
  NormalizedSpectrum p;
  p.p.resize(n);
  double sum = 0.0;
  for (auto& v : p.p) {
    v = rng.uniform() + 1e-3;
    sum += v;
  }
  for (auto& v : p.p) v /= sum;
  std::sort(p.p.begin(), p.p.end(), std::greater<>());
  return p;
}

}  // namespace

TEST_CASE("normalize_spectrum: examples") {
  auto p = normalize_spectrum(Spectrum{{2.0, 2.0}});
  REQUIRE(p.p.size() == 2);
  CHECK(p.p[0] == doctest::Approx(0.5));
  CHECK(p.p[1] == doctest::Approx(0.5));

  p = normalize_spectrum(Spectrum{{3.0, 1.0, 0.0}});
  REQUIRE(p.p.size() == 2);
  CHECK(p.p[0] == doctest::Approx(0.75));
  CHECK(p.p[1] == doctest::Approx(0.25));

  CHECK_THROWS_WITH_AS(normalize_spectrum(Spectrum{{1e-30, 0.0}}),
                       "degenerate spectrum", Error);
  CHECK_THROWS_WITH_AS(normalize_spectrum(Spectrum{{0.0, 0.0}}),
                       "degenerate spectrum", Error);
}

TEST_CASE("measure: examples") {
  NormalizedSpectrum uniform4{{0.25, 0.25, 0.25, 0.25}};
  CHECK(measure(uniform4, SpectralMeasure::ShannonEntropy) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  NormalizedSpectrum point{{1.0}};
  CHECK(measure(point, SpectralMeasure::ShannonEntropy) == doctest::Approx(0.0));
  CHECK(measure(point, SpectralMeasure::L2Participation) == doctest::Approx(0.0));

  NormalizedSpectrum p{{0.75, 0.25}};
  CHECK(measure(p, SpectralMeasure::ShannonEntropy) ==
        doctest::Approx(0.562335).epsilon(1e-5));
}

TEST_CASE("d_eff: L2 examples and closed form") {
  CHECK(d_eff(Spectrum{{1.0, 1.0, 1.0, 1.0}}) == doctest::Approx(4.0));
  CHECK(d_eff(Spectrum{{1.0, 0.0, 0.0}}) == doctest::Approx(1.0));
  CHECK(d_eff(Spectrum{{3.0, 1.0}}) == doctest::Approx(1.6).epsilon(1e-12));

  RandomSource rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Spectrum s;
    const std::size_t n = 1 + rng.index(16);
    s.eigenvalues.resize(n);
    for (auto& v : s.eigenvalues) v = rng.uniform() + 0.01;
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());
    double sum = 0.0, sum2 = 0.0;
    for (double v : s.eigenvalues) {
      sum += v;
      sum2 += v * v;
    }
    const double closed = sum * sum / sum2;
    const double value = d_eff(s);
    CHECK(std::abs(value - closed) <= 1e-9 * closed);
    CHECK(value >= 1.0 - 1e-12);
    CHECK(value <= static_cast<double>(n) + 1e-12);
  }
}

TEST_CASE("d_eff_of_data: isotropic, rank-1, scalar column") {
  RandomSource rng(21);
  SampleMatrix iso(20000, 8);
  for (auto& v : iso.data) v = rng.gaussian();
  const double d = d_eff_of_data(iso);
  CHECK(d >= 7.5);
  CHECK(d <= 8.0);

  SampleMatrix rank1(500, 3);
  for (std::size_t i = 0; i < 500; ++i) {
    const double t = rng.gaussian();
    rank1.at(i, 0) = t;
    rank1.at(i, 1) = 2.0 * t;
    rank1.at(i, 2) = -t;
  }
  const double d1 = d_eff_of_data(rank1);
  CHECK(d1 >= 1.0);
  CHECK(d1 <= 1.01);

  SampleMatrix scalar(100, 1);
  for (auto& v : scalar.data) v = rng.gaussian();
  CHECK(d_eff_of_data(scalar) == 1.0);
}

TEST_CASE("d_eff_of_data: balanced one-hot labels give k-1") {
  // K balanced one-hot columns have K-1 equal nonzero eigenvalues
  for (std::size_t k : {2u, 3u, 5u}) {
    SampleMatrix onehot(6 * k, k);
    for (std::size_t i = 0; i < onehot.n_rows; ++i) onehot.at(i, i % k) = 1.0;
    CHECK(d_eff_of_data(onehot) ==
          doctest::Approx(double(k - 1)).epsilon(1e-9));
    CHECK(d_eff_of_data(onehot, SpectralMeasure::ShannonEntropy) ==
          doctest::Approx(double(k - 1)).epsilon(1e-9));
  }
}

TEST_CASE("d_eff_of_data: constant data is degenerate") {
  SampleMatrix x(10, 2);
  for (auto& v : x.data) v = 3.0;
  CHECK_THROWS_WITH_AS(d_eff_of_data(x), "degenerate spectrum", Error);
}

TEST_CASE("property: bounds and maximality at the uniform spectrum") {
  RandomSource rng(77);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 1 + rng.index(32);
    const auto p = random_normalized(n, rng);
    for (auto m : {SpectralMeasure::ShannonEntropy, SpectralMeasure::L2Participation}) {
      const double v = measure(p, m);
      CHECK(v >= -1e-12);
      CHECK(v <= std::log(static_cast<double>(n)) + 1e-12);
    }
    // equality iff uniform: a visibly non-uniform spectrum stays below the cap
    if (n >= 2 && p.p.front() > p.p.back() + 1e-6) {
      CHECK(measure(p, SpectralMeasure::ShannonEntropy) <
            std::log(static_cast<double>(n)) - 1e-12);
      CHECK(measure(p, SpectralMeasure::L2Participation) <
            std::log(static_cast<double>(n)) - 1e-12);
    }
  }
  for (std::size_t n : {1u, 2u, 7u, 32u}) {
    NormalizedSpectrum uniform;
    uniform.p.assign(n, 1.0 / static_cast<double>(n));
    CHECK(measure(uniform, SpectralMeasure::ShannonEntropy) ==
          doctest::Approx(std::log(double(n))).epsilon(1e-12));
    CHECK(std::exp(measure(uniform, SpectralMeasure::ShannonEntropy)) ==
          doctest::Approx(double(n)).epsilon(1e-12));
  }
}

TEST_CASE("property: Robin-Hood-inverse transfers never increase the measure") {
  RandomSource rng(123);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 2 + rng.index(31);
    const auto p = random_normalized(n, rng);
    // move mass from a smaller entry to a larger one: p' majorizes p
    NormalizedSpectrum q = p;
    std::size_t hi = rng.index(n);
    std::size_t lo = rng.index(n);
    if (q.p[lo] > q.p[hi]) std::swap(lo, hi);
    if (lo == hi) continue;
    const double eps = 0.9 * rng.uniform() * q.p[lo];
    q.p[hi] += eps;
    q.p[lo] -= eps;
    std::sort(q.p.begin(), q.p.end(), std::greater<>());
    for (auto m : {SpectralMeasure::ShannonEntropy, SpectralMeasure::L2Participation})
      CHECK(measure(q, m) <= measure(p, m) + 1e-12);
  }
}

TEST_CASE("property: measures agree in trend (logged)") {
  RandomSource rng(2024);
  int comparable = 0;
  int agree = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(15);
    Spectrum s1, s2;
    s1.eigenvalues.resize(n);
    s2.eigenvalues.resize(n);
    for (auto& v : s1.eigenvalues) v = rng.uniform() + 0.01;
    for (auto& v : s2.eigenvalues) v = rng.uniform() + 0.01;
    std::sort(s1.eigenvalues.begin(), s1.eigenvalues.end(), std::greater<>());
    std::sort(s2.eigenvalues.begin(), s2.eigenvalues.end(), std::greater<>());
    const double sh1 = d_eff(s1, SpectralMeasure::ShannonEntropy);
    const double sh2 = d_eff(s2, SpectralMeasure::ShannonEntropy);
    const double l21 = d_eff(s1, SpectralMeasure::L2Participation);
    const double l22 = d_eff(s2, SpectralMeasure::L2Participation);
    if (sh1 > sh2) {
      ++comparable;
      if (l21 >= l22) ++agree;
    } else if (sh2 > sh1) {
      ++comparable;
      if (l22 >= l21) ++agree;
    }
  }
  const double rate =
      comparable ? static_cast<double>(agree) / comparable : 1.0;
  MESSAGE("shannon/l2 trend agreement rate: " << rate << " over " << comparable
                                              << " comparable pairs");
  CHECK(comparable > 0);
}

TEST_CASE("property: d_eff is scale invariant") {
  RandomSource rng(31337);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng.index(12);
    Spectrum s;
    s.eigenvalues.resize(n);
    for (auto& v : s.eigenvalues) v = rng.uniform() + 0.01;
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());

    for (double c : {0.5, 4.0, 1024.0}) {  // powers of two scale exactly
      Spectrum scaled = s;
      for (auto& v : scaled.eigenvalues) v *= c;
      CHECK(d_eff(scaled) == d_eff(s));
      CHECK(d_eff(scaled, SpectralMeasure::ShannonEntropy) ==
            d_eff(s, SpectralMeasure::ShannonEntropy));
    }
    Spectrum scaled = s;
    for (auto& v : scaled.eigenvalues) v *= 3.7;
    CHECK(d_eff(scaled) == doctest::Approx(d_eff(s)).epsilon(1e-13));
  }
}
