#include "polyhaz/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void SamplerConfig::validate() const {
  if (!(total_time > 0.0) || !std::isfinite(total_time))
    throw ConfigError("total_time must be positive");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw ConfigError("sample_rate must be positive");
  if (!(bound.offset >= 0.0)) throw ConfigError("bound offset must be non-negative");
  if (chains == 0) throw ConfigError("chains must be at least 1");
  if (adapt_window == 0) throw ConfigError("adapt_window must be at least 1");
  if (!(initial_t_star > 0.0)) throw ConfigError("initial_t_star must be positive");
  if (!(sigma_target_acceptance > 0.0 && sigma_target_acceptance < 1.0))
    throw ConfigError("sigma_target_acceptance must lie in (0, 1)");
  rates.validate();
}

const char* event_name(EventKind kind) {
  switch (kind) {
    case EventKind::Init: return "init";
    case EventKind::Flip: return "flip";
    case EventKind::Stick: return "stick";
    case EventKind::Unstick: return "unstick";
    case EventKind::Birth: return "birth";
    case EventKind::Death: return "death";
    case EventKind::Swap: return "swap";
    case EventKind::Hyper: return "hyper";
    case EventKind::Sample: return "sample";
    case EventKind::RejectedFlip: return "rejected_flip";
    case EventKind::SegmentEnd: return "segment_end";
    case EventKind::RejectedJump: return "rejected_jump";
    case EventKind::End: return "end";
  }
  return "unknown";
}

std::string submodel_label(std::vector<DistKind> dists) {
  std::sort(dists.begin(), dists.end());
  std::string out;
  for (std::size_t k = 0; k < dists.size(); ++k) {
    if (k) out += '-';
    out += short_name(dists[k]);
  }
  return out;
}

std::string submodel_label(const ModelState& state) { return submodel_label(state.dists); }

ModelState reconstruct(const std::vector<SkeletonEvent>& skeleton, double t) {
  if (skeleton.empty()) throw std::invalid_argument("empty skeleton");
  auto it = std::upper_bound(skeleton.begin(), skeleton.end(), t,
                             [](double x, const SkeletonEvent& e) { return x < e.state.clock; });
  if (it == skeleton.begin()) throw std::invalid_argument("time precedes the skeleton");
  ModelState s = std::prev(it)->state;
  const Trajectory traj{s.theta, s.velocity, s.clock};
  std::vector<double> pos(s.theta.size());
  traj.position(t, pos);
  s.theta = std::move(pos);
  s.clock = t;
  return s;
}

double Diagnostics::exceedance_fraction() const {
  return thinning.proposals ? static_cast<double>(thinning.exceedances) /
                                  static_cast<double>(thinning.proposals)
                            : 0.0;
}

double Diagnostics::mean_segment_length() const {
  return bounds.segments() ? bounds.total_length / static_cast<double>(bounds.segments()) : 0.0;
}

Rng chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
  return Rng(seq);
}

ModelState initial_state(const Dataset& data, const PriorConfig& prior, Rng& rng) {
  const DistKind kind =
      prior.candidates[std::uniform_int_distribution<std::size_t>(0, prior.candidates.size() - 1)(rng)];
  ModelState s = zero_state(kind, data.p);
  double beta0 = 0.0;
  if (data.n() > 0) {
    if (kind == DistKind::Weibull) {
      double at_risk = 0.0, events = 0.0;
      for (std::size_t i = 0; i < data.n(); ++i) {
        at_risk += data.time[i];
        events += data.event[i];
      }
      beta0 = std::log(std::max(events, 0.5) / at_risk);
    } else {
      std::vector<double> observed;
      for (std::size_t i = 0; i < data.n(); ++i)
        if (data.event[i]) observed.push_back(data.time[i]);
      if (observed.empty()) observed = data.time;
      const auto mid = observed.begin() + static_cast<std::ptrdiff_t>(observed.size() / 2);
      std::nth_element(observed.begin(), mid, observed.end());
      beta0 = std::log(*mid);
    }
  }
  s.theta[s.beta0_index(0)] = beta0;
  std::bernoulli_distribution coin(0.5);
  s.velocity[s.alpha_index(0)] = coin(rng) ? 1 : -1;
  s.velocity[s.beta0_index(0)] = coin(rng) ? 1 : -1;
  if (prior.fixed_omega) {
    s.omega = *prior.fixed_omega;
  } else {
    const double x = std::gamma_distribution<double>(prior.beta_a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(prior.beta_b, 1.0)(rng);
    s.omega = std::clamp(x / (x + y), 1e-12, 1.0 - 1e-12);
  }
  s.z1 = 1.0;
  s.z2 = 1.0;
  apply_fixed_hyperparameters(s, prior);
  return s;
}

// ---- Chain -----------------------------------------------------------------

Chain::Chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config,
             std::size_t index)
    : data_(&data),
      prior_(&prior),
      config_(config),
      rng_(chain_rng(config.seed, index)),
      adapt_(config.adapt_window, config.initial_t_star, config.adapt_warmup),
      sigma_(config.sigma_target_acceptance) {
  config_.validate();
  prior.validate();
  state_ = initial_state(data, prior, rng_);
  result_.chain = index;
  rebuild_target();
  record(EventKind::Init);
}

Chain::Chain(const Dataset& data, const PriorConfig& prior, const SamplerConfig& config,
             std::size_t index, ModelState start)
    : data_(&data),
      prior_(&prior),
      config_(config),
      rng_(chain_rng(config.seed, index)),
      state_(std::move(start)),
      adapt_(config.adapt_window, config.initial_t_star, config.adapt_warmup),
      sigma_(config.sigma_target_acceptance) {
  config_.validate();
  prior.validate();
  apply_fixed_hyperparameters(state_, prior);
  state_.check_invariants(prior);
  clock_ = state_.clock;
  start_clock_ = clock_;
  last_dynamics_event_ = clock_;
  result_.chain = index;
  rebuild_target();
  record(EventKind::Init);
}

void Chain::rebuild_target() {
  if (rate_) evaluations_before_ += rate_->evaluations();
  rate_.reset();
  target_.emplace(state_, *data_, *prior_);
  rate_.emplace(*target_);
  sticky_.assign(state_.dim(), 0);
  for (std::size_t i = 0; i < state_.dim(); ++i) sticky_[i] = state_.is_slab_coordinate(i);
  label_ = submodel_label(state_);
  refresh_unstick_rate();
  segment_.reset();
}

void Chain::refresh_unstick_rate() {
  per_stuck_rate_ =
      state_.p > 0 ? unstick_rate(state_.omega, state_.sigma_beta(), config_.unstick) : 0.0;
}

void Chain::reanchor(double t) {
  const Trajectory traj{state_.theta, state_.velocity, state_.clock};
  std::vector<double> pos(state_.theta.size());
  traj.position(t, pos);
  state_.theta = std::move(pos);
  state_.clock = t;
}

void Chain::record(EventKind kind) {
  if (config_.emit_skeleton) result_.skeleton.push_back({kind, state_});
}

void Chain::accrue(double t) {
  if (t > clock_) result_.occupancy[label_] += t - clock_;
  clock_ = t;
}

std::size_t Chain::stuck_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < state_.dim(); ++i)
    if (sticky_[i] && state_.velocity[i] == 0) ++n;
  return n;
}

double Chain::unstick_total() const {
  return per_stuck_rate_ * static_cast<double>(stuck_count());
}

double Chain::hyper_rate() const {
  if (prior_->fixed_omega && prior_->fixed_sigma_beta) return 0.0;
  return config_.rates.hyper;
}

ModelState Chain::current() const {
  ModelState s = state_;
  const Trajectory traj{state_.theta, state_.velocity, state_.clock};
  traj.position(clock_, s.theta);
  s.clock = clock_;
  return s;
}

EventKind Chain::step() {
  const double end = config_.total_time;
  if (clock_ >= end) return EventKind::End;
  auto& diag = result_.diagnostics;

  const Trajectory traj{state_.theta, state_.velocity, state_.clock};
  if (!segment_) {
    segment_ = build_bound(*rate_, traj, clock_, adapt_, config_.bound, &diag.bounds);
  }

  const auto t_flip = sample_event_time(*segment_, clock_, rng_);
  const auto stick = next_sticking_time(traj, sticky_);
  const double r_unstick = unstick_total();
  const double r_hyper = hyper_rate();
  const double r_swap = config_.rates.swap;
  const double r_bd = config_.rates.birth_death;
  const double r_total = r_unstick + r_hyper + r_swap + r_bd + config_.sample_rate;
  const double t_hom = clock_ + std::exponential_distribution<double>(r_total)(rng_);

  const double t_f = t_flip.value_or(kInf);
  const double t_s = stick ? stick->time : kInf;
  const double t_next = std::min({t_f, t_s, t_hom, segment_->end(), end});

  if (t_next == end) {
    accrue(end);
    return EventKind::End;
  }
  if (t_next == t_s) {
    accrue(t_s);
    reanchor(t_s);
    const std::size_t i = stick->coordinate;
    state_.theta[i] = 0.0;
    state_.velocity[i] = 0;
    state_.gamma[(i / state_.stride()) * state_.p + (i % state_.stride() - 2)] = 0;
    ++diag.sticks;
    adapt_.record(clock_ - last_dynamics_event_);
    last_dynamics_event_ = clock_;
    record(EventKind::Stick);
    invalidate();
    return EventKind::Stick;
  }
  if (t_next == t_hom) {
    accrue(t_hom);
    return fire_homogeneous(t_hom);
  }
  if (t_next == t_f) {
    accrue(t_f);
    if (const auto flip = thin_and_flip(*rate_, traj, t_f, *segment_, rng_, diag.thinning)) {
      reanchor(t_f);
      state_.velocity[*flip] = static_cast<Velocity>(-state_.velocity[*flip]);
      ++diag.flips;
      adapt_.record(clock_ - last_dynamics_event_);
      last_dynamics_event_ = clock_;
      record(EventKind::Flip);
      invalidate();
      return EventKind::Flip;
    }
    return EventKind::RejectedFlip;
  }
  accrue(segment_->end());
  ++diag.segment_ends;
  invalidate();
  return EventKind::SegmentEnd;
}

EventKind Chain::fire_homogeneous(double t) {
  auto& diag = result_.diagnostics;
  const double r_unstick = unstick_total();
  const double r_hyper = hyper_rate();
  const double r_swap = config_.rates.swap;
  const double r_bd = config_.rates.birth_death;
  const double r_total = r_unstick + r_hyper + r_swap + r_bd + config_.sample_rate;
  double u = std::uniform_real_distribution<double>(0.0, r_total)(rng_);

  if (u < config_.sample_rate) {
    ++diag.sample_fired;
    result_.samples.push_back({t, current()});
    diag.t_star_trace.push_back({t, adapt_.t_star()});
    return EventKind::Sample;
  }
  u -= config_.sample_rate;

  if (u < r_unstick) {
    ++diag.unstick_fired;
    std::size_t which =
        std::uniform_int_distribution<std::size_t>(0, stuck_count() - 1)(rng_);
    reanchor(t);
    for (std::size_t i = 0; i < state_.dim(); ++i) {
      if (!(sticky_[i] && state_.velocity[i] == 0)) continue;
      if (which-- == 0) {
        state_.velocity[i] = std::bernoulli_distribution(0.5)(rng_) ? 1 : -1;
        state_.gamma[(i / state_.stride()) * state_.p + (i % state_.stride() - 2)] = 1;
        break;
      }
    }
    ++diag.unsticks;
    adapt_.record(clock_ - last_dynamics_event_);
    last_dynamics_event_ = clock_;
    record(EventKind::Unstick);
    invalidate();
    return EventKind::Unstick;
  }
  u -= r_unstick;

  if (u < r_hyper) {
    ++diag.hyper_fired;
    reanchor(t);
    hyper_event(state_, *prior_, sigma_, rng_, diag.jumps);
    refresh_unstick_rate();
    record(EventKind::Hyper);
    invalidate();
    return EventKind::Hyper;
  }
  u -= r_hyper;

  // Jumps act on a copy so that a rejection leaves the anchor untouched.
  ModelState proposal = current();
  JumpResult outcome;
  if (u < r_swap) {
    ++diag.swap_fired;
    outcome = swap_event(proposal, *data_, *prior_, config_.rates, config_.balancing,
                         config_.swap_kind, rng_, diag.jumps);
  } else {
    ++diag.birth_death_fired;
    outcome = birth_death_event(proposal, *data_, *prior_, config_.rates, config_.balancing, rng_,
                                diag.jumps);
  }
  if (outcome == JumpResult::NoChange) return EventKind::RejectedJump;

  state_ = std::move(proposal);
  EventKind kind = EventKind::Swap;
  if (outcome == JumpResult::Birth) kind = EventKind::Birth;
  if (outcome == JumpResult::Death) kind = EventKind::Death;
  rebuild_target();
  record(kind);
  return kind;
}

void Chain::run() {
  try {
    while (step() != EventKind::End) {
    }
  } catch (const NumericalError& e) {
    result_.error = std::string(e.what()) + " at clock " + std::to_string(clock_);
  }
  result_.final_state = current();
}

ChainResult Chain::take_result() {
  auto& diag = result_.diagnostics;
  diag.rate_evaluations = evaluations_before_ + (rate_ ? rate_->evaluations() : 0);
  diag.final_t_star = adapt_.t_star();
  diag.total_time = clock_ - start_clock_;
  if (result_.final_state.dists.empty()) result_.final_state = current();
  return std::move(result_);
}

// ---- Multi-chain driver ----------------------------------------------------

std::size_t worker_count(std::size_t chains) {
  std::size_t cap = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("POLYHAZ_THREADS")) {
    char* endp = nullptr;
    const long v = std::strtol(env, &endp, 10);
    if (endp != env && v > 0) cap = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(chains, cap));
}

std::vector<ChainResult> run_chains(const Dataset& data, const PriorConfig& prior,
                                    const SamplerConfig& config) {
  config.validate();
  prior.validate();
  std::vector<ChainResult> results(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto work = [&](std::size_t c) {
    try {
      Chain chain(data, prior, config, c);
      chain.run();
      results[c] = chain.take_result();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const std::size_t workers = worker_count(config.chains);
  if (workers <= 1) {
    for (std::size_t c = 0; c < config.chains; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next++) < config.chains;) work(c);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace polyhaz
