#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "polyhaz/errors.hpp"
#include "polyhaz/model.hpp"
#include "test_helpers.hpp"

using namespace polyhaz;
using doctest::Approx;

namespace {

Dataset five_rows() {
  return make_dataset({0.5, 1.2, 2.0, 3.1, 0.8}, {1, 0, 1, 1, 0},
                      {0.3, -1.0, 1.1, 0.5, -0.7, 0.2, 0.0, 1.4, -0.7, -1.1}, 2);
}

ModelState five_row_state() {
  ModelState s;
  s.p = 2;
  s.insert_subhazard(0, Subhazard{DistKind::Weibull, 0.3, -0.4, {1, 0}, {0.6, 0.0}, 1, 1, {1, 0}});
  s.insert_subhazard(1, Subhazard{DistKind::LogLogistic, -0.2, 0.9, {1, 1}, {-0.3, 0.25}, 1, -1,
                                  {-1, 1}});
  s.omega = 0.4;
  s.z1 = -0.8;
  s.z2 = 1.5;
  return s;
}

ModelState single(DistKind kind, double nu, double mu) {
  ModelState s = zero_state(kind, 0);
  s.theta[0] = std::log(nu);
  s.theta[1] = std::log(mu);
  return s;
}

}  // namespace

TEST_CASE("linear predictor") {
  ModelState s = zero_state(DistKind::Weibull, 1);
  const double x[] = {3.7};
  CHECK(linear_predictor(s, 0, x) == Approx(1.0));
  s.theta[1] = std::log(2.0);
  CHECK(linear_predictor(s, 0, x) == Approx(2.0));
  s.theta[1] = 0.0;
  s.gamma[0] = 1;
  s.velocity[2] = 1;
  s.theta[2] = 0.5;
  const double x2[] = {2.0};
  CHECK(linear_predictor(s, 0, x2) == Approx(std::numbers::e));
}

TEST_CASE("log likelihood examples") {
  const auto censored = make_dataset({1.0}, {0}, {}, 0);
  const auto observed = make_dataset({1.0}, {1}, {}, 0);
  const auto s = single(DistKind::Weibull, 1.0, 1.0);
  CHECK(log_likelihood(s, censored) == Approx(-1.0));
  CHECK(log_likelihood(s, observed) == Approx(-1.0));
}

TEST_CASE("likelihood and potential match an independent high-precision evaluation") {
  // Reference values computed with 30-digit arithmetic from the printed
  // hazard formulas (scripted outside this code base).
  const auto data = five_rows();
  const auto s = five_row_state();
  PriorConfig prior;
  CHECK(std::abs(log_likelihood(s, data) - (-8.2833906923102981317)) < 1e-10);
  CHECK(std::abs(potential(s, data, prior) - 19.562474702284049452) < 1e-10);
}

TEST_CASE("potential of the empty dataset is the Gaussian normalising constants") {
  const Dataset empty = make_dataset({}, {}, {}, 0);
  PriorConfig prior;
  const auto s = zero_state(DistKind::LogLogistic, 0);
  const double expected = 0.5 * std::log(2 * std::numbers::pi) * 2 + std::log(2.0) + std::log(5.0);
  CHECK(potential(s, empty, prior) == Approx(expected).epsilon(1e-14));
}

TEST_CASE("potential is finite on random states") {
  std::mt19937_64 rng(17);
  PriorConfig prior;
  const auto data = testing::random_dataset(60, 3, rng);
  for (int r = 0; r < 100; ++r) {
    const auto s = testing::random_state(1 + r % 4, 3, rng);
    CHECK(std::isfinite(potential(s, data, prior)));
  }
}

TEST_CASE("gradient of the prior-only potential") {
  const Dataset empty = make_dataset({}, {}, {}, 0);
  PriorConfig prior;
  auto s = zero_state(DistKind::Weibull, 0);
  s.theta[0] = 0.7;
  const std::size_t coords[] = {0, 1};
  const auto g = grad_potential(s, empty, prior, coords);
  CHECK(g[0] == Approx(0.7 / 4.0));
  CHECK(g[1] == Approx(0.0));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(23);
  PriorConfig prior;
  const auto data = testing::random_dataset(40, 2, rng);
  int bad = 0;
  for (int r = 0; r < 100; ++r) {
    auto s = testing::random_state(1 + r % 3, 2, rng);
    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < s.dim(); ++i)
      if (s.velocity[i] != 0) coords.push_back(i);
    const auto g = grad_potential(s, data, prior, coords);
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const double h = 1e-6;
      auto plus = s, minus = s;
      plus.theta[coords[c]] += h;
      minus.theta[coords[c]] -= h;
      const double fd = (potential(plus, data, prior) - potential(minus, data, prior)) / (2 * h);
      if (std::abs(fd - g[c]) > 1e-5 * std::max(1.0, std::abs(g[c]))) ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("requesting the gradient of an excluded coefficient is a contract violation") {
  auto s = zero_state(DistKind::Weibull, 1);
  const Dataset empty = make_dataset({}, {}, {}, 1);
  const std::size_t coords[] = {2};
  CHECK_THROWS_AS(grad_potential(s, empty, PriorConfig{}, coords), std::logic_error);
}

TEST_CASE("birth prior ratio") {
  PriorConfig prior;
  auto s = zero_state(DistKind::Weibull, 0);
  Subhazard born{DistKind::Weibull, 0.0, 0.0, {}, {}, 1, 1, {}};
  const double component = log_subhazard_prior(born, s.omega, s.sigma_beta(), prior);
  CHECK(log_prior_ratio_birth(s, born, prior) - component == Approx(0.0));
  s.insert_subhazard(1, born);
  CHECK(log_prior_ratio_birth(s, born, prior) - component == Approx(std::log(2.0 / 3.0)));
  while (s.K() < 4) s.insert_subhazard(0, born);
  CHECK_THROWS_AS(log_prior_ratio_birth(s, born, prior), CapacityError);
}

TEST_CASE("zero-truncated Poisson(2) tail") {
  // Direct summation of the Poisson mass function.
  double head = 0.0, term = std::exp(-2.0);
  for (int k = 0; k <= 4; ++k) {
    head += term;
    term *= 2.0 / (k + 1);
  }
  const double untruncated = 1.0 - head;
  const double truncated = untruncated / (1.0 - std::exp(-2.0));
  CHECK(untruncated == Approx(0.0527).epsilon(1e-3));
  CHECK(truncated == Approx(0.061).epsilon(1e-2));
  // The prior ratio used by births reproduces the same law.
  PriorConfig prior;
  double mass[40] = {};
  mass[1] = 1.0;
  for (int k = 1; k < 39; ++k) mass[k + 1] = mass[k] * prior.xi / (k + 1);
  double total = 0.0, tail = 0.0;
  for (int k = 1; k < 40; ++k) {
    total += mass[k];
    if (k > 4) tail += mass[k];
  }
  CHECK(tail / total == Approx(truncated).epsilon(1e-6));
}

TEST_CASE("model invariants") {
  std::mt19937_64 rng(31);
  PriorConfig prior;
  const auto data = testing::random_dataset(30, 2, rng);

  SUBCASE("without included covariates U does not depend on z1, z2") {
    auto s = testing::random_state(2, 2, rng);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < 2; ++j) {
        s.gamma[k * 2 + j] = 0;
        s.theta[s.beta_index(k, j)] = 0.0;
        s.velocity[s.beta_index(k, j)] = 0;
      }
    const double u = potential(s, data, prior);
    s.z1 = -3.0;
    s.z2 = 0.01;
    CHECK(potential(s, data, prior) == Approx(u).epsilon(1e-14));
  }

  SUBCASE("a vanishing Weibull subhazard drops out of the likelihood") {
    auto s = testing::random_state(1, 2, rng);
    const double base = log_likelihood(s, data);
    Subhazard ghost{DistKind::Weibull, 0.2, std::log(1e-12), {0, 0}, {0.0, 0.0}, 1, 1, {0, 0}};
    s.insert_subhazard(1, ghost);
    CHECK(std::abs(log_likelihood(s, data) - base) < 1e-9);
  }

  SUBCASE("a censored observation near zero leaves U unchanged") {
    auto s = testing::random_state(2, 2, rng);
    const double u = potential(s, data, prior);
    auto t = data.time;
    auto c = data.event;
    auto x = data.x;
    t.push_back(1e-12);
    c.push_back(0);
    x.push_back(0.1);
    x.push_back(-0.2);
    const auto more = make_dataset(t, c, x, 2);
    CHECK(std::abs(potential(s, more, prior) - u) < 1e-5);
  }
}

TEST_CASE("likelihood cache agrees with direct evaluation") {
  std::mt19937_64 rng(37);
  const auto data = testing::random_dataset(50, 2, rng);
  const auto s = testing::random_state(3, 2, rng);
  LikelihoodCache cache(s, data);
  CHECK(cache.log_likelihood() == Approx(log_likelihood(s, data)).epsilon(1e-12));

  auto removed = s;
  removed.remove_subhazard(1);
  CHECK(cache.log_likelihood_replacing(1, nullptr) ==
        Approx(log_likelihood(removed, data)).epsilon(1e-12));

  auto added = s;
  const auto extra = testing::random_state(1, 2, rng).subhazard(0);
  added.insert_subhazard(3, extra);
  CHECK(cache.log_likelihood_adding(evaluate_subhazard(extra, data)) ==
        Approx(log_likelihood(added, data)).epsilon(1e-12));
}

TEST_CASE("standardisation centres all columns and scales only continuous ones") {
  const auto d = standardize({1, 2, 3, 4}, {1, 0, 1, 1}, {0, 10, 1, 20, 1, 30, 0, 40}, 2);
  CHECK(d.binary[0]);
  CHECK_FALSE(d.binary[1]);
  CHECK(d.scale[0] == 1.0);
  CHECK(d.centre[0] == Approx(0.5));
  CHECK(d.x[0] == Approx(-0.5));
  double ss = 0.0;
  for (std::size_t i = 0; i < 4; ++i) ss += d.x[i * 2 + 1] * d.x[i * 2 + 1];
  CHECK(ss / 3.0 == Approx(1.0));
  const double orig[] = {1.0, 25.0};
  const auto m = d.to_model_scale(orig);
  CHECK(m[0] == Approx(0.5));
  CHECK(m[1] == Approx(0.0));
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(make_dataset({1.0, -2.0}, {1, 0}, {}, 0), InputError);
  CHECK_THROWS_AS(make_dataset({1.0, 2.0}, {1, 2}, {}, 0), InputError);
}

TEST_CASE("state invariants and subhazard round trip") {
  std::mt19937_64 rng(41);
  PriorConfig prior;
  auto s = testing::random_state(3, 2, rng);
  CHECK_NOTHROW(s.check_invariants(prior));
  auto copy = s;
  const auto sh = copy.subhazard(1);
  copy.remove_subhazard(1);
  copy.insert_subhazard(1, sh);
  CHECK(copy == s);
  s.theta[s.beta_index(0, 0)] = s.included(0, 0) ? s.theta[s.beta_index(0, 0)] : 1.0;
  if (!s.included(0, 0)) CHECK_THROWS_AS(s.check_invariants(prior), std::logic_error);
}
