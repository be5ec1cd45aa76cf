#include "polyhaz/zigzag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void Trajectory::position(double t, std::span<double> out) const {
  const double dt = t - anchor_time;
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] + velocity[i] * dt;
}

// ---- FlipRate --------------------------------------------------------------

FlipRate::FlipRate(const PotentialTarget& target)
    : target_(&target),
      position_(target.dimension()),
      grad_(target.dimension()),
      rates_(target.dimension()) {}

double FlipRate::operator()(const Trajectory& traj, double t) {
  ++evaluations_;
  traj.position(t, position_);
  target_->gradient(position_, traj.velocity, grad_);
  double total = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    rates_[i] = std::max(0.0, traj.velocity[i] * grad_[i]);
    total += rates_[i];
  }
  return total;
}

// ---- AdaptState ------------------------------------------------------------

AdaptState::AdaptState(std::size_t window, double initial_t_star, std::size_t warmup)
    : window_(window), warmup_(warmup), t_star_(initial_t_star) {
  buffer_.reserve(window_);
}

void AdaptState::record(double inter_event_time) {
  if (!(inter_event_time > 0.0) || !std::isfinite(inter_event_time)) return;
  if (buffer_.size() < window_) {
    buffer_.push_back(inter_event_time);
  } else {
    buffer_[next_] = inter_event_time;
    next_ = (next_ + 1) % window_;
  }
  ++seen_;
  if (seen_ < warmup_) return;
  thread_local std::vector<double> scratch;
  scratch.assign(buffer_.begin(), buffer_.end());
  const auto rank = static_cast<std::size_t>(0.8 * static_cast<double>(scratch.size() - 1));
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(rank),
                   scratch.end());
  t_star_ = scratch[rank];
}

// ---- Bounds ----------------------------------------------------------------

BoundSegment build_bound(FlipRate& rate, const Trajectory& traj, double t0, const AdaptState& adapt,
                         const BoundOptions& options, BoundStats* stats) {
  const double lam0 = rate(traj, t0);
  const double t_star = adapt.t_star();
  double tb = lam0 > 0.0 ? std::min(t_star, 1.0 / lam0) : t_star;
  tb = std::clamp(tb, options.min_length,
                  std::max(options.min_length, options.max_length_factor * t_star));
  const double lam_mid = rate(traj, t0 + 0.5 * tb);
  const double lam_end = rate(traj, t0 + tb);

  BoundSegment seg;
  seg.t0 = t0;
  seg.length = tb;
  seg.offset = options.offset;

  const bool increasing = lam0 <= lam_mid && lam_mid <= lam_end;
  const bool decreasing = lam0 >= lam_mid && lam_mid >= lam_end;
  const bool convex = lam_mid <= 0.5 * (lam0 + lam_end);
  if ((increasing || decreasing) && convex) {
    seg.kind = BoundKind::Linear;
    seg.intercept = lam0;
    seg.slope = (lam_end - lam0) / tb;
    if (stats) ++stats->linear;
  } else if (increasing || decreasing) {
    seg.kind = BoundKind::Constant;
    seg.intercept = std::max(lam0, lam_end);
    if (stats) ++stats->constant;
  } else {
    seg.kind = BoundKind::Brent;
    const double three_max = std::max({lam0, lam_mid, lam_end});
    const int bits =
        static_cast<int>(std::ceil(-std::log2(options.brent_relative_tolerance))) + 1;
    std::uintmax_t iterations = static_cast<std::uintmax_t>(options.brent_max_iterations);
    const auto neg_rate = [&](double s) { return -rate(traj, t0 + s); };
    const auto [s_best, neg_best] =
        boost::math::tools::brent_find_minima(neg_rate, 0.0, tb, bits, iterations);
    (void)s_best;
    if (iterations >= static_cast<std::uintmax_t>(options.brent_max_iterations)) {
      seg.intercept = 2.0 * three_max;
      if (stats) ++stats->brent_fallbacks;
    } else {
      seg.intercept = std::max(three_max, -neg_best);
    }
    if (stats) ++stats->brent;
  }
  if (stats) stats->total_length += tb;
  return seg;
}

std::optional<double> sample_event_time(const BoundSegment& seg, double from, Rng& rng) {
  if (from >= seg.end()) return std::nullopt;
  const double a = std::max(0.0, seg.rate(from));
  const double b = seg.slope;
  const double e = std::exponential_distribution<double>(1.0)(rng);
  // Solve a s + b s^2 / 2 = e in the cancellation-free form s = 2e / (a + sqrt(a^2 + 2 b e)).
  const double disc = a * a + 2.0 * b * e;
  if (disc < 0.0) return std::nullopt;
  const double denom = a + std::sqrt(disc);
  if (!(denom > 0.0)) return std::nullopt;
  const double t = from + 2.0 * e / denom;
  if (!(t < seg.end())) return std::nullopt;
  return t;
}

std::optional<std::size_t> thin_and_flip(FlipRate& rate, const Trajectory& traj, double tau,
                                         const BoundSegment& seg, Rng& rng,
                                         ThinningStats& stats) {
  const double lam = rate(traj, tau);
  const double bound = seg.rate(tau);
  ++stats.proposals;
  if (lam > bound) {
    ++stats.exceedances;
    if (bound > 0.0) stats.max_exceedance_ratio = std::max(stats.max_exceedance_ratio, lam / bound);
  }
  if (!(lam > 0.0)) return std::nullopt;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) * bound >= lam) return std::nullopt;
  ++stats.accepted;
  const auto& per = rate.per_coordinate();
  const double target = unif(rng) * lam;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < per.size(); ++i) {
    if (per[i] <= 0.0) continue;
    last_positive = i;
    acc += per[i];
    if (target < acc) return i;
  }
  return last_positive;
}

std::optional<StickEvent> next_sticking_time(const Trajectory& traj,
                                             std::span<const std::uint8_t> sticky) {
  std::optional<StickEvent> best;
  for (std::size_t i = 0; i < sticky.size(); ++i) {
    if (!sticky[i] || traj.velocity[i] == 0) continue;
    const double x = traj.theta[i];
    if (x * traj.velocity[i] >= 0.0) continue;
    const double t = traj.anchor_time + std::abs(x);
    if (!best || t < best->time) best = StickEvent{i, t};
  }
  return best;
}

double unstick_rate(double omega, double sigma_beta, UnstickConvention convention) {
  if (!(omega > 0.0 && omega < 1.0))
    throw ConfigError("unsticking needs 0 < omega < 1");
  switch (convention) {
    case UnstickConvention::SlabDensity:
      return omega / (1.0 - omega) / (sigma_beta * std::sqrt(2.0 * std::numbers::pi));
    case UnstickConvention::PriorOdds:
      return omega / (1.0 - omega);
    case UnstickConvention::InverseOdds:
      return (1.0 - omega) / omega;
  }
  return 0.0;
}

// ---- ZigZagProcess ---------------------------------------------------------

ZigZagProcess::ZigZagProcess(const PotentialTarget& target, std::vector<double> theta,
                             std::vector<Velocity> velocity, Options options)
    : target_(&target),
      theta_(std::move(theta)),
      velocity_(std::move(velocity)),
      options_(std::move(options)),
      rate_(target) {
  if (options_.sticky.empty()) options_.sticky.assign(theta_.size(), 0);
}

void ZigZagProcess::move_to(double t) {
  for (std::size_t i = 0; i < theta_.size(); ++i) theta_[i] += velocity_[i] * (t - clock_);
  clock_ = t;
}

void ZigZagProcess::run(double total_time, Rng& rng, const PieceObserver& observer) {
  const double end = clock_ + total_time;
  std::uniform_int_distribution<int> coin(0, 1);
  auto advance = [&](double t) {
    if (observer && t > clock_) observer(clock_, t, theta_, velocity_);
    move_to(t);
  };
  auto record_event = [&] {
    adapt_.record(clock_ - last_event_);
    last_event_ = clock_;
  };

  while (clock_ < end) {
    Trajectory traj{theta_, velocity_, clock_};
    const BoundSegment seg = build_bound(rate_, traj, clock_, adapt_, options_.bound, &bounds_);
    bool rebuild = false;
    while (!rebuild) {
      traj = Trajectory{theta_, velocity_, clock_};
      const auto t_flip = sample_event_time(seg, clock_, rng);
      const auto stick = next_sticking_time(traj, options_.sticky);
      std::size_t stuck = 0;
      for (std::size_t i = 0; i < theta_.size(); ++i)
        if (options_.sticky[i] && velocity_[i] == 0) ++stuck;
      const double unstick_total = options_.unstick_rate * static_cast<double>(stuck);
      const double t_unstick =
          unstick_total > 0.0
              ? clock_ + std::exponential_distribution<double>(unstick_total)(rng)
              : kInf;

      const double t_f = t_flip.value_or(kInf);
      const double t_s = stick ? stick->time : kInf;
      const double t_next = std::min({t_f, t_s, t_unstick, seg.end(), end});

      if (t_next == end) {
        advance(end);
        return;
      }
      if (t_next == t_s) {
        advance(t_s);
        theta_[stick->coordinate] = 0.0;
        velocity_[stick->coordinate] = 0;
        record_event();
        rebuild = true;
      } else if (t_next == t_unstick) {
        advance(t_unstick);
        std::uniform_int_distribution<std::size_t> pick(0, stuck - 1);
        std::size_t which = pick(rng);
        for (std::size_t i = 0; i < theta_.size(); ++i) {
          if (!(options_.sticky[i] && velocity_[i] == 0)) continue;
          if (which-- == 0) {
            velocity_[i] = coin(rng) ? 1 : -1;
            break;
          }
        }
        record_event();
        rebuild = true;
      } else if (t_next == t_f) {
        advance(t_f);
        traj = Trajectory{theta_, velocity_, clock_};
        if (const auto flip = thin_and_flip(rate_, traj, clock_, seg, rng, thinning_)) {
          velocity_[*flip] = static_cast<Velocity>(-velocity_[*flip]);
          record_event();
          rebuild = true;
        }
      } else {
        advance(seg.end());
        rebuild = true;
      }
    }
  }
}

}  // namespace polyhaz
