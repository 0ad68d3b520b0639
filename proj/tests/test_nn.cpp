#include <doctest.h>

#include <cmath>
#include <vector>

#include "ibflow/critic.hpp"
#include "ibflow/rng.hpp"

using namespace ibflow;

namespace {

double weighted_score_sum(const MLPCritic& c, const SampleMatrix& pairs,
                          const std::vector<double>& upstream) {
  const auto scores = critic_forward(c, pairs);
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) acc += upstream[i] * scores[i];
  return acc;
}

/// Central finite differences over every parameter of the critic.
CriticGradients finite_difference_gradients(MLPCritic c,
                                            const SampleMatrix& pairs,
                                            const std::vector<double>& upstream,
                                            double h = 1e-5) {
  CriticGradients g(c);
  auto probe = [&](double& param) {
    const double saved = param;
    param = saved + h;
    const double up = weighted_score_sum(c, pairs, upstream);
    param = saved - h;
    const double down = weighted_score_sum(c, pairs, upstream);
    param = saved;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < c.w1.size(); ++i) g.w1[i] = probe(c.w1[i]);
  for (std::size_t i = 0; i < c.b1.size(); ++i) g.b1[i] = probe(c.b1[i]);
  for (std::size_t i = 0; i < c.w2.size(); ++i) g.w2[i] = probe(c.w2[i]);
  g.b2 = probe(c.b2);
  return g;
}

void check_gradients_close(const CriticGradients& a, const CriticGradients& b,
                           double rel) {
  auto close = [rel](double x, double y) {
    return std::abs(x - y) <= rel * std::max({std::abs(x), std::abs(y), 1e-6});
  };
  for (std::size_t i = 0; i < a.w1.size(); ++i) CHECK(close(a.w1[i], b.w1[i]));
  for (std::size_t i = 0; i < a.b1.size(); ++i) CHECK(close(a.b1[i], b.b1[i]));
  for (std::size_t i = 0; i < a.w2.size(); ++i) CHECK(close(a.w2[i], b.w2[i]));
  CHECK(close(a.b2, b.b2));
}

}  // namespace

TEST_CASE("critic_init: determinism and shape count") {
  const auto a = critic_init(3, 5, 42);
  const auto b = critic_init(3, 5, 42);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);

  const auto tiny = critic_init(1, 1, 0);
  CHECK(tiny.param_count() == 4);
}

TEST_CASE("critic_init: empirical weight variance matches 2/fan_in") {
  const std::size_t d_in = 100, hidden = 100;
  const auto c = critic_init(d_in, hidden, 7);
  double mean = 0.0;
  for (double w : c.w1) mean += w;
  mean /= static_cast<double>(c.w1.size());
  double var = 0.0;
  for (double w : c.w1) var += (w - mean) * (w - mean);
  var /= static_cast<double>(c.w1.size());
  const double expected = 2.0 / static_cast<double>(d_in);
  CHECK(var >= 0.9 * expected);
  CHECK(var <= 1.1 * expected);
}

TEST_CASE("critic_forward: zero network, hand value, batching") {
  MLPCritic zero;
  zero.d_in = 2;
  zero.hidden = 3;
  zero.w1.assign(6, 0.0);
  zero.b1.assign(3, 0.0);
  zero.w2.assign(3, 0.0);
  SampleMatrix in(4, 2);
  in.data = {1.0, -2.0, 0.5, 3.0, 0.0, 0.0, 9.0, -9.0};
  for (double s : critic_forward(zero, in)) CHECK(s == 0.0);

  MLPCritic c;
  c.d_in = 1;
  c.hidden = 1;
  c.w1 = {1.0};
  c.b1 = {0.0};
  c.w2 = {1.0};
  c.b2 = 0.5;
  SampleMatrix x(1, 1);
  x.at(0, 0) = 2.0;
  const double expected = std::log1p(std::exp(2.0)) + 0.5;
  CHECK(critic_forward(c, x)[0] == doctest::Approx(expected).epsilon(1e-12));

  const auto full = critic_init(2, 8, 3);
  const auto batched = critic_forward(full, in);
  for (std::size_t i = 0; i < in.n_rows; ++i) {
    SampleMatrix row(1, 2);
    row.at(0, 0) = in.at(i, 0);
    row.at(0, 1) = in.at(i, 1);
    CHECK(critic_forward(full, row)[0] == batched[i]);
  }

  SampleMatrix wrong(2, 3);
  CHECK_THROWS_AS(critic_forward(full, wrong), Error);
}

TEST_CASE("critic_backward: zero upstream, finite differences, linearity") {
  RandomSource rng(11);
  SampleMatrix in(6, 3);
  for (auto& v : in.data) v = rng.gaussian();
  const auto c = critic_init(3, 4, 5);

  const std::vector<double> zeros(6, 0.0);
  const auto gz = critic_backward(c, in, zeros);
  for (double v : gz.w1) CHECK(v == 0.0);
  for (double v : gz.w2) CHECK(v == 0.0);
  CHECK(gz.b2 == 0.0);

  std::vector<double> upstream(6);
  for (auto& u : upstream) u = rng.gaussian();
  const auto analytic = critic_backward(c, in, upstream);
  const auto fd = finite_difference_gradients(c, in, upstream);
  check_gradients_close(analytic, fd, 1e-4);

  std::vector<double> doubled(6);
  for (std::size_t i = 0; i < 6; ++i) doubled[i] = 2.0 * upstream[i];
  const auto g2 = critic_backward(c, in, doubled);
  for (std::size_t i = 0; i < analytic.w1.size(); ++i)
    CHECK(g2.w1[i] == 2.0 * analytic.w1[i]);
  CHECK(g2.b2 == 2.0 * analytic.b2);
}

TEST_CASE("critic_backward: relu variant also matches finite differences") {
  RandomSource rng(17);
  SampleMatrix in(5, 2);
  for (auto& v : in.data) v = rng.gaussian();
  auto c = critic_init(2, 6, 23, Activation::Relu);
  std::vector<double> upstream(5);
  for (auto& u : upstream) u = rng.gaussian();
  const auto analytic = critic_backward(c, in, upstream);
  const auto fd = finite_difference_gradients(c, in, upstream);
  // relu kinks can straddle the probe; tolerance stays adequate away from 0
  check_gradients_close(analytic, fd, 5e-3);
}

TEST_CASE("critic_backward: input gradients match finite differences") {
  RandomSource rng(29);
  SampleMatrix in(4, 3);
  for (auto& v : in.data) v = rng.gaussian();
  const auto c = critic_init(3, 5, 31);
  std::vector<double> upstream(4);
  for (auto& u : upstream) u = rng.gaussian();

  SampleMatrix input_grad;
  critic_backward(c, in, upstream, &input_grad);
  const double h = 1e-5;
  for (std::size_t i = 0; i < in.n_rows; ++i)
    for (std::size_t j = 0; j < in.n_cols; ++j) {
      SampleMatrix probe = in;
      probe.at(i, j) += h;
      const double up = weighted_score_sum(c, probe, upstream);
      probe.at(i, j) -= 2.0 * h;
      const double down = weighted_score_sum(c, probe, upstream);
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(input_grad.at(i, j) - fd) <=
            1e-4 * std::max({std::abs(fd), std::abs(input_grad.at(i, j)), 1e-6}));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto c = critic_init(2, 3, 1);
  const auto before = c;
  AdamState st(c.param_count());
  CriticGradients g(c);
  adam_step(c, g, st);
  CHECK(c.w1 == before.w1);
  CHECK(c.b1 == before.b1);
  CHECK(c.w2 == before.w2);
  CHECK(c.b2 == before.b2);
  CHECK(st.t == 1);
}

TEST_CASE("adam: bias-corrected first step moves by about lr") {
  std::vector<double> param{3.0};
  std::vector<double> grad{1.0};
  AdamState st(1, AdamHyper{0.1, 0.9, 0.999, 1e-8});
  adam_apply(param, grad, st);
  CHECK(param[0] == doctest::Approx(2.9).epsilon(1e-6));
}

TEST_CASE("adam: minimizes x^2 from x=3 within 500 steps") {
  std::vector<double> x{3.0};
  AdamState st(1, AdamHyper{0.05, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 500; ++step) {
    std::vector<double> g{2.0 * x[0]};
    adam_apply(x, g, st);
  }
  CHECK(std::abs(x[0]) < 0.01);
}

TEST_CASE("adam: non-finite gradient raises diverged") {
  auto c = critic_init(2, 2, 9);
  AdamState st(c.param_count());
  CriticGradients g(c);
  g.w1[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(c, g, st), "diverged", Error);
}

TEST_CASE("determinism: identical seeds give identical trajectories") {
  RandomSource data_rng(55);
  SampleMatrix in(32, 4);
  for (auto& v : in.data) v = data_rng.gaussian();
  std::vector<double> upstream(32);
  for (auto& u : upstream) u = data_rng.gaussian(0.1);

  auto run = [&]() {
    auto c = critic_init(4, 8, 1001);
    AdamState st(c.param_count(), AdamHyper{1e-3, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 50; ++step) {
      const auto g = critic_backward(c, in, upstream);
      adam_step(c, g, st);
    }
    return c;
  };
  const auto c1 = run();
  const auto c2 = run();
  CHECK(c1.w1 == c2.w1);
  CHECK(c1.b1 == c2.b1);
  CHECK(c1.w2 == c2.w2);
  CHECK(c1.b2 == c2.b2);
}
