#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "polyhaz/errors.hpp"
#include "polyhaz/zigzag.hpp"

using namespace polyhaz;

namespace {

// U(theta) = theta' P theta / 2.
class GaussianTarget : public PotentialTarget {
 public:
  explicit GaussianTarget(std::vector<double> precision, std::vector<double> mean = {})
      : p_(std::move(precision)), d_(static_cast<std::size_t>(std::sqrt(p_.size()))), m_(mean) {
    if (m_.empty()) m_.assign(d_, 0.0);
  }
  std::size_t dimension() const override { return d_; }
  void gradient(std::span<const double> theta, std::span<const Velocity> v,
                std::span<double> grad) const override {
    for (std::size_t i = 0; i < d_; ++i) {
      grad[i] = 0.0;
      if (v[i] == 0) continue;
      for (std::size_t j = 0; j < d_; ++j) grad[i] += p_[i * d_ + j] * (theta[j] - m_[j]);
    }
  }

 private:
  std::vector<double> p_;
  std::size_t d_;
  std::vector<double> m_;
};

// One-dimensional target given by its derivative.
class ScalarTarget : public PotentialTarget {
 public:
  explicit ScalarTarget(std::function<double(double)> du) : du_(std::move(du)) {}
  std::size_t dimension() const override { return 1; }
  void gradient(std::span<const double> theta, std::span<const Velocity> v,
                std::span<double> grad) const override {
    grad[0] = v[0] == 0 ? 0.0 : du_(theta[0]);
  }

 private:
  std::function<double(double)> du_;
};

// Exact time integrals of theta_i and theta_i theta_j over linear pieces.
struct Moments {
  std::size_t d;
  double time = 0.0;
  std::vector<double> first, second;
  explicit Moments(std::size_t dim) : d(dim), first(dim), second(dim * dim) {}
  void add(double dt, std::span<const double> x, std::span<const Velocity> v) {
    time += dt;
    for (std::size_t i = 0; i < d; ++i) {
      first[i] += x[i] * dt + v[i] * dt * dt / 2.0;
      for (std::size_t j = 0; j < d; ++j)
        second[i * d + j] += x[i] * x[j] * dt + (x[i] * v[j] + x[j] * v[i]) * dt * dt / 2.0 +
                             v[i] * v[j] * dt * dt * dt / 3.0;
    }
  }
  double mean(std::size_t i) const { return first[i] / time; }
  double cov(std::size_t i, std::size_t j) const {
    return second[i * d + j] / time - mean(i) * mean(j);
  }
};

}  // namespace

TEST_CASE("flip rates for a standard Gaussian") {
  GaussianTarget target({1.0});
  FlipRate rate(target);
  std::vector<double> theta{0.5};
  std::vector<Velocity> v{1};
  Trajectory traj{theta, v, 0.0};
  CHECK(rate(traj, 0.0) == doctest::Approx(0.5));
  CHECK(rate(traj, 1.0) == doctest::Approx(1.5));
  CHECK(rate(traj, 0.0) == doctest::Approx(0.5));
  v[0] = -1;
  CHECK(rate(traj, 0.0) == 0.0);
  CHECK(rate(traj, 2.0) == doctest::Approx(1.5));
  CHECK(rate.evaluations() == 5);
}

TEST_CASE("adaptive horizon uses the 80th percentile after warm-up") {
  AdaptState a(512, 1.0, 16);
  for (int i = 1; i <= 15; ++i) a.record(i);
  CHECK(a.t_star() == 1.0);
  a.record(16);
  CHECK(a.t_star() == 13.0);
  a.record(0.0);  // ignored
  CHECK(a.observations() == 16);
  AdaptState small(4, 1.0, 1);
  for (double x : {10.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0}) small.record(x);
  CHECK(small.t_star() == 1.0);  // window forgets old values
}

TEST_CASE("bound horizon is min(t*, 1 / rate)") {
  ScalarTarget target([](double) { return 4.0; });
  FlipRate rate(target);
  std::vector<double> theta{0.0};
  std::vector<Velocity> v{1};
  BoundStats stats;
  const auto seg = build_bound(rate, Trajectory{theta, v, 0.0}, 0.0, AdaptState(512, 0.5), {},
                               &stats);
  CHECK(seg.length == doctest::Approx(0.25));
  CHECK(seg.kind == BoundKind::Linear);
  CHECK(seg.slope == doctest::Approx(0.0));
  CHECK(seg.rate(0.1) == doctest::Approx(4.1));
  CHECK(stats.linear == 1);

  const auto longer = build_bound(rate, Trajectory{theta, v, 0.0}, 0.0, AdaptState(512, 0.1), {});
  CHECK(longer.length == doctest::Approx(0.1));
  ScalarTarget zero([](double) { return 0.0; });
  FlipRate zrate(zero);
  const auto flat = build_bound(zrate, Trajectory{theta, v, 0.0}, 0.0, AdaptState(512, 3.0), {});
  CHECK(flat.length == doctest::Approx(3.0));
  const auto tiny = build_bound(rate, Trajectory{theta, v, 0.0}, 0.0, AdaptState(512, 1e-9), {});
  CHECK(tiny.length == doctest::Approx(1e-4));
}

TEST_CASE("bound shapes follow the three-point check") {
  std::vector<double> theta{0.0};
  std::vector<Velocity> v{1};
  const Trajectory traj{theta, v, 0.0};

  SUBCASE("linear rate gives an exact chord") {
    ScalarTarget t([](double x) { return 1.0 + x; });
    FlipRate r(t);
    const auto seg = build_bound(r, traj, 0.0, AdaptState(512, 1.0), {});
    CHECK(seg.kind == BoundKind::Linear);
    CHECK(seg.intercept == doctest::Approx(1.0));
    CHECK(seg.slope == doctest::Approx(1.0));
  }
  SUBCASE("concave increasing rate gives a constant at the right end") {
    ScalarTarget t([](double x) { return 0.2 + std::log1p(x); });
    FlipRate r(t);
    const auto seg = build_bound(r, traj, 0.0, AdaptState(512, 1.0), {});
    CHECK(seg.kind == BoundKind::Constant);
    CHECK(seg.intercept == doctest::Approx(0.2 + std::log1p(seg.length)));
  }
  SUBCASE("a hump uses Brent") {
    ScalarTarget t([](double x) { return std::exp(-(x - 1.0) * (x - 1.0)); });
    FlipRate r(t);
    BoundStats stats;
    const auto seg = build_bound(r, traj, 0.0, AdaptState(512, 2.0), {}, &stats);
    CHECK(seg.kind == BoundKind::Brent);
    CHECK(seg.length == doctest::Approx(2.0));
    CHECK(seg.intercept >= 1.0 - 1e-3);
    CHECK(seg.intercept <= 2.0);
    CHECK(stats.brent == 1);
  }
  SUBCASE("convex decreasing rate gives a chord") {
    ScalarTarget t([](double x) { return std::exp(-x); });
    FlipRate r(t);
    const auto seg = build_bound(r, traj, 0.0, AdaptState(512, 0.5), {});
    CHECK(seg.kind == BoundKind::Linear);
    CHECK(seg.slope < 0.0);
    for (double s = 0.0; s <= seg.length; s += 0.01) CHECK(seg.bound(s) >= std::exp(-s) - 1e-12);
  }
}

TEST_CASE("event times from a constant and a linear rate") {
  std::mt19937_64 rng(1);
  const double a = 1.5, b = 2.0;
  for (double slope : {0.0, b}) {
    BoundSegment seg{0.0, 1e9, a, slope, BoundKind::Linear, 0.0};
    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i) xs.push_back(*sample_event_time(seg, rng));
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double s = xs[i];
      const double f = 1.0 - std::exp(-(a * s + slope * s * s / 2.0));
      d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    CHECK(d < 0.006);
  }
  // Truncation: P(no event in [0, L)) = exp(-a L).
  BoundSegment seg{0.0, 0.4, a, 0.0, BoundKind::Constant, 0.1};
  int none = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) none += !sample_event_time(seg, rng).has_value();
  CHECK(none / double(n) == doctest::Approx(std::exp(-1.6 * 0.4)).epsilon(0.01));
  CHECK_FALSE(sample_event_time(seg, 0.4, rng).has_value());
}

TEST_CASE("thinning accepts with probability rate / bound and records exceedances") {
  ScalarTarget target([](double) { return 1.0; });
  FlipRate rate(target);
  std::vector<double> theta{0.0};
  std::vector<Velocity> v{1};
  const Trajectory traj{theta, v, 0.0};
  std::mt19937_64 rng(2);
  ThinningStats stats;
  BoundSegment seg{0.0, 1.0, 3.9, 0.0, BoundKind::Constant, 0.1};
  const int n = 200000;
  for (int i = 0; i < n; ++i) thin_and_flip(rate, traj, 0.5, seg, rng, stats);
  CHECK(stats.accepted / double(n) == doctest::Approx(0.25).epsilon(0.02));
  CHECK(stats.exceedances == 0);

  BoundSegment low{0.0, 1.0, 0.4, 0.0, BoundKind::Constant, 0.1};
  const auto hit = thin_and_flip(rate, traj, 0.5, low, rng, stats);
  REQUIRE(hit.has_value());
  CHECK(*hit == 0);
  CHECK(stats.exceedances == 1);
  CHECK(stats.max_exceedance_ratio == doctest::Approx(2.0));
}

TEST_CASE("sticking times") {
  std::vector<double> theta{-0.5, 0.3, 2.0, -0.1};
  std::vector<Velocity> v{1, 1, -1, 1};
  std::vector<std::uint8_t> sticky{1, 1, 1, 0};
  const auto e = next_sticking_time(Trajectory{theta, v, 3.0}, sticky);
  REQUIRE(e.has_value());
  CHECK(e->coordinate == 0);
  CHECK(e->time == doctest::Approx(3.5));
  v[0] = 0;
  const auto e2 = next_sticking_time(Trajectory{theta, v, 3.0}, sticky);
  REQUIRE(e2.has_value());
  CHECK(e2->coordinate == 2);
  CHECK(e2->time == doctest::Approx(5.0));
  v[2] = 1;
  CHECK_FALSE(next_sticking_time(Trajectory{theta, v, 3.0}, sticky).has_value());
}

TEST_CASE("unsticking rates") {
  CHECK(unstick_rate(0.5, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  CHECK(unstick_rate(0.2, 2.0) == doctest::Approx(0.25 / (2.0 * std::sqrt(2.0 * std::numbers::pi))));
  CHECK(unstick_rate(0.2, 2.0, UnstickConvention::PriorOdds) == doctest::Approx(0.25));
  CHECK(unstick_rate(0.2, 2.0, UnstickConvention::InverseOdds) == doctest::Approx(4.0));
  CHECK_THROWS_AS(unstick_rate(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(unstick_rate(1.0, 1.0), ConfigError);
}

TEST_CASE("Zig-Zag process leaves a 1-D Gaussian invariant") {
  GaussianTarget target({1.0 / 4.0}, {1.0});  // N(1, 4)
  ZigZagProcess zz(target, {0.0}, {1}, {});
  std::mt19937_64 rng(7);
  Moments m(1);
  zz.run(50000.0, rng, [&](double a, double b, auto x, auto v) { m.add(b - a, x, v); });
  CHECK(m.time == doctest::Approx(50000.0));
  CHECK(m.mean(0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(m.cov(0, 0) == doctest::Approx(4.0).epsilon(0.04));
  CHECK(zz.thinning().exceedances == 0);
  CHECK(zz.clock() == doctest::Approx(50000.0));
}

TEST_CASE("Zig-Zag process on a correlated 2-D Gaussian") {
  // Covariance [[1, 0.8], [0.8, 1]].
  const double r = 0.8, det = 1.0 - r * r;
  GaussianTarget target({1.0 / det, -r / det, -r / det, 1.0 / det});
  ZigZagProcess zz(target, {0.0, 0.0}, {1, -1}, {});
  std::mt19937_64 rng(9);
  Moments m(2);
  zz.run(100000.0, rng, [&](double a, double b, auto x, auto v) { m.add(b - a, x, v); });
  CHECK(std::abs(m.mean(0)) < 0.05);
  CHECK(std::abs(m.mean(1)) < 0.05);
  CHECK(m.cov(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(m.cov(1, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(m.cov(0, 1) == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("sticky Zig-Zag recovers spike-and-slab posterior odds") {
  // y ~ N(beta, s^2), beta ~ omega N(0, sigma^2) + (1 - omega) delta_0.
  const double y = 1.0, s = 0.5, sigma = 1.0, omega = 0.3;
  const double prec = 1.0 / (s * s) + 1.0 / (sigma * sigma);
  GaussianTarget target({prec}, {y / (s * s) / prec});
  ZigZagProcess::Options opt;
  opt.sticky = {1};
  opt.unstick_rate = unstick_rate(omega, sigma);
  ZigZagProcess zz(target, {0.5}, {1}, opt);
  std::mt19937_64 rng(13);
  double stuck = 0.0, total = 0.0, slab_mean = 0.0;
  zz.run(200000.0, rng, [&](double a, double b, auto x, auto v) {
    total += b - a;
    if (v[0] == 0)
      stuck += b - a;
    else
      slab_mean += x[0] * (b - a) + v[0] * (b - a) * (b - a) / 2.0;
  });
  auto normal_pdf = [](double x, double sd) {
    return std::exp(-0.5 * x * x / (sd * sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  const double m1 = normal_pdf(y, std::sqrt(s * s + sigma * sigma));
  const double m0 = normal_pdf(y, s);
  const double p_slab = omega * m1 / (omega * m1 + (1.0 - omega) * m0);
  CHECK(1.0 - stuck / total == doctest::Approx(p_slab).epsilon(0.03));
  CHECK(slab_mean / (total - stuck) == doctest::Approx(0.8).epsilon(0.03));
}
