#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polyhaz/jumps.hpp"
#include "polyhaz/model.hpp"
#include "polyhaz/zigzag.hpp"

namespace polyhaz {

struct SamplerConfig {
  double total_time = 10000.0;
  double sample_rate = 4.0;
  JumpRates rates;
  BoundOptions bound;  // bound.offset is Lambda_0
  std::uint64_t seed = 1;
  std::size_t chains = 1;
  bool emit_skeleton = false;

  Balancing balancing = Balancing::Metropolis;
  SwapKind swap_kind = SwapKind::MedianMatch;
  UnstickConvention unstick = UnstickConvention::SlabDensity;

  std::size_t adapt_window = 512;
  double initial_t_star = 1.0;
  std::size_t adapt_warmup = 16;
  double sigma_target_acceptance = 0.234;

  void validate() const;
};

enum class EventKind : std::uint8_t {
  Init,
  Flip,
  Stick,
  Unstick,
  Birth,
  Death,
  Swap,
  Hyper,
  // The remaining kinds change nothing and never enter the skeleton.
  Sample,
  RejectedFlip,
  SegmentEnd,
  RejectedJump,
  End,
};

const char* event_name(EventKind kind);

/// State immediately after a state-changing event. Between events the
/// trajectory is theta(t) = state.theta + velocity (t - state.clock).
struct SkeletonEvent {
  EventKind kind;
  ModelState state;
};

struct Sample {
  double clock;
  ModelState state;
};

/// Submodel label "W-L" etc.: the multiset of kinds, Weibull first.
std::string submodel_label(const ModelState& state);
std::string submodel_label(std::vector<DistKind> dists);

/// State at time t reconstructed from a skeleton (events sorted by clock).
ModelState reconstruct(const std::vector<SkeletonEvent>& skeleton, double t);

struct Diagnostics {
  // Homogeneous clocks that fired, by type.
  std::size_t unstick_fired = 0;
  std::size_t hyper_fired = 0;
  std::size_t swap_fired = 0;
  std::size_t birth_death_fired = 0;
  std::size_t sample_fired = 0;

  std::size_t flips = 0;
  std::size_t sticks = 0;
  std::size_t unsticks = 0;
  std::size_t segment_ends = 0;
  std::size_t rate_evaluations = 0;

  ThinningStats thinning;
  BoundStats bounds;
  JumpStats jumps;

  std::vector<std::array<double, 2>> t_star_trace;  // (clock, t*) at sample times
  double final_t_star = 0.0;
  double total_time = 0.0;

  double exceedance_fraction() const;
  double mean_segment_length() const;
};

struct ChainResult {
  std::size_t chain = 0;
  std::vector<Sample> samples;
  std::vector<SkeletonEvent> skeleton;  // empty unless emit_skeleton
  std::map<std::string, double> occupancy;  // time spent per submodel label
  Diagnostics diagnostics;
  ModelState final_state;
  std::optional<std::string> error;  // set when the chain aborted
};

/// Starting state: K = 1 with a uniformly drawn kind, alpha = 0, beta0 from a
/// crude moment estimate, all coefficients excluded, omega from its prior.
ModelState initial_state(const Dataset& data, const PriorConfig& prior, Rng& rng);

/// Per-chain random stream derived from (seed, chain).
Rng chain_rng(std::uint64_t seed, std::size_t chain);

/// One chain of the superposed process.
class Chain {
 public:
  Chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config,
        std::size_t index);
  Chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config,
        std::size_t index, ModelState start);

  Chain(const Chain&) = delete;
  Chain& operator=(const Chain&) = delete;

  /// Advances to the next candidate event (at most total_time) and applies it.
  EventKind step();
  /// Steps until the clock reaches total_time. Numerical failures are caught
  /// and reported in the result together with the last state.
  void run();

  double clock() const { return clock_; }
  bool finished() const { return clock_ >= config_.total_time; }
  /// Last state-changing event; the current position is anchor().theta + v (clock - anchor().clock).
  const ModelState& anchor() const { return state_; }
  ModelState current() const;
  ChainResult& result() { return result_; }
  const ChainResult& result() const { return result_; }
  ChainResult take_result();

 private:
  void rebuild_target();
  void invalidate() { segment_.reset(); }
  void reanchor(double t);
  void record(EventKind kind);
  void accrue(double t);
  double unstick_total() const;
  std::size_t stuck_count() const;
  double hyper_rate() const;
  void refresh_unstick_rate();
  EventKind fire_homogeneous(double t);

  const Dataset* data_;
  const PriorConfig* prior_;
  SamplerConfig config_;
  Rng rng_;
  ModelState state_;
  std::vector<std::uint8_t> sticky_;
  std::optional<PolyhazardTarget> target_;
  std::optional<FlipRate> rate_;
  std::optional<BoundSegment> segment_;
  AdaptState adapt_;
  SigmaSampler sigma_;
  double clock_ = 0.0;
  double start_clock_ = 0.0;
  double last_dynamics_event_ = 0.0;
  double per_stuck_rate_ = 0.0;
  std::string label_;
  std::size_t evaluations_before_ = 0;
  ChainResult result_;
};

/// Runs config.chains independent chains, using up to POLYHAZ_THREADS workers.
std::vector<ChainResult> run_chains(const Dataset& data, const PriorConfig& prior,
                                    const SamplerConfig& config);

/// Worker count: min(chains, POLYHAZ_THREADS or hardware concurrency).
std::size_t worker_count(std::size_t chains);

}  // namespace polyhaz
