#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "polyhaz/target.hpp"

namespace polyhaz {

using Rng = std::mt19937_64;

/// Linear motion theta(t) = theta + v (t - anchor_time).
struct Trajectory {
  std::span<const double> theta;
  std::span<const Velocity> velocity;
  double anchor_time = 0.0;

  void position(double t, std::span<double> out) const;
};

/// Evaluates the Zig-Zag flip intensities max{0, v_i dU/dtheta_i} along a
/// trajectory. Owns scratch buffers so repeated evaluation does not allocate.
class FlipRate {
 public:
  explicit FlipRate(const PotentialTarget& target);

  /// Total rate at absolute time t; per_coordinate() then holds the terms.
  double operator()(const Trajectory& traj, double t);
  const std::vector<double>& per_coordinate() const { return rates_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  const PotentialTarget* target_;
  std::vector<double> position_;
  std::vector<double> grad_;
  std::vector<double> rates_;
  std::size_t evaluations_ = 0;
};

enum class BoundKind { Linear, Constant, Brent };

/// Dominating rate M(t) + offset on [t0, t0 + length), M(t) = intercept + slope (t - t0).
struct BoundSegment {
  double t0 = 0.0;
  double length = 0.0;
  double intercept = 0.0;
  double slope = 0.0;
  BoundKind kind = BoundKind::Constant;
  double offset = 0.0;

  double end() const { return t0 + length; }
  double bound(double t) const { return intercept + slope * (t - t0); }
  double rate(double t) const { return bound(t) + offset; }
};

/// Sliding window of recent inter-event times; t* is their 80th percentile.
class AdaptState {
 public:
  explicit AdaptState(std::size_t window = 512, double initial_t_star = 1.0,
                      std::size_t warmup = 16);

  void record(double inter_event_time);
  double t_star() const { return t_star_; }
  std::size_t observations() const { return seen_; }

 private:
  std::size_t window_;
  std::size_t warmup_;
  std::vector<double> buffer_;
  std::size_t next_ = 0;
  std::size_t seen_ = 0;
  double t_star_;
};

struct BoundOptions {
  double offset = 0.1;         // Lambda_0
  double min_length = 1e-4;    // t_b floor
  double max_length_factor = 10.0;  // t_b cap as a multiple of t*
  int brent_max_iterations = 20;
  double brent_relative_tolerance = 1e-3;
};

struct BoundStats {
  std::size_t linear = 0;
  std::size_t constant = 0;
  std::size_t brent = 0;
  std::size_t brent_fallbacks = 0;
  double total_length = 0.0;

  std::size_t segments() const { return linear + constant + brent; }
};

/// Numerical bound for the flip rate on [t0, t0 + t_b), t_b = min{t*, 1/Lambda(t0)}:
/// a chord when the three-point check shows a monotone, convex rate; a
/// constant at the larger endpoint when only monotone; otherwise a constant
/// at the Brent maximum.
BoundSegment build_bound(FlipRate& rate, const Trajectory& traj, double t0, const AdaptState& adapt,
                         const BoundOptions& options, BoundStats* stats = nullptr);

/// First arrival at or after `from` of the Poisson process with intensity
/// seg.rate(t) on [from, seg.end()); nullopt if none falls in the segment.
std::optional<double> sample_event_time(const BoundSegment& seg, double from, Rng& rng);
inline std::optional<double> sample_event_time(const BoundSegment& seg, Rng& rng) {
  return sample_event_time(seg, seg.t0, rng);
}

struct ThinningStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  std::size_t exceedances = 0;
  double max_exceedance_ratio = 0.0;
};

/// Thinning step at a proposed time tau: accepts with probability
/// Lambda(tau) / (M(tau) + offset), clamped at 1, then picks the coordinate to
/// flip proportionally to its own rate. Returns the coordinate on acceptance.
/// The caller applies the flip.
std::optional<std::size_t> thin_and_flip(FlipRate& rate, const Trajectory& traj, double tau,
                                         const BoundSegment& seg, Rng& rng,
                                         ThinningStats& stats);

struct StickEvent {
  std::size_t coordinate;
  double time;
};

/// Earliest time at which a moving sticky coordinate reaches zero from the
/// side it is moving towards.
std::optional<StickEvent> next_sticking_time(const Trajectory& traj,
                                             std::span<const std::uint8_t> sticky);

/// How the unsticking intensity of an excluded coefficient is computed.
enum class UnstickConvention {
  SlabDensity,  // omega / (1 - omega) * N(0 | 0, sigma_beta)
  PriorOdds,    // omega / (1 - omega)
  InverseOdds,  // (1 - omega) / omega
};

/// Rate at which one stuck coordinate is released.
double unstick_rate(double omega, double sigma_beta,
                    UnstickConvention convention = UnstickConvention::SlabDensity);

/// Standalone sticky Zig-Zag process on a fixed target with a constant
/// unsticking rate. Used for analytic targets; the polyhazard engine drives
/// the same primitives with its own event loop.
class ZigZagProcess {
 public:
  struct Options {
    BoundOptions bound;
    std::vector<std::uint8_t> sticky;  // empty: no sticky coordinates
    double unstick_rate = 0.0;
  };

  /// Called once per linear piece [t_begin, t_end) with the state at t_begin.
  using PieceObserver = std::function<void(double t_begin, double t_end,
                                           std::span<const double> theta,
                                           std::span<const Velocity> velocity)>;

  ZigZagProcess(const PotentialTarget& target, std::vector<double> theta,
                std::vector<Velocity> velocity, Options options);

  void run(double total_time, Rng& rng, const PieceObserver& observer);

  const ThinningStats& thinning() const { return thinning_; }
  const BoundStats& bounds() const { return bounds_; }
  const AdaptState& adapt() const { return adapt_; }
  std::span<const double> theta() const { return theta_; }
  std::span<const Velocity> velocity() const { return velocity_; }
  double clock() const { return clock_; }

 private:
  void move_to(double t);

  const PotentialTarget* target_;
  std::vector<double> theta_;
  std::vector<Velocity> velocity_;
  Options options_;
  FlipRate rate_;
  AdaptState adapt_;
  ThinningStats thinning_;
  BoundStats bounds_;
  double clock_ = 0.0;
  double last_event_ = 0.0;
};

}  // namespace polyhaz
