#include "polyhaz/jumps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Velocity random_direction(Rng& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? Velocity{1} : Velocity{-1};
}

bool accept(double probability, Rng& rng) { return uniform01(rng) < probability; }

}  // namespace

double balance(Balancing b, double a) {
  if (b == Balancing::Metropolis) return std::min(1.0, a);
  return a / (1.0 + a);
}

double balance_log(Balancing b, double log_a) {
  if (std::isnan(log_a)) return 0.0;
  if (b == Balancing::Metropolis) return log_a >= 0.0 ? 1.0 : std::exp(log_a);
  return log_a >= 0.0 ? 1.0 / (1.0 + std::exp(-log_a)) : std::exp(log_a) / (1.0 + std::exp(log_a));
}

void JumpRates::validate() const {
  if (!(birth_death >= 0.0) || !(swap >= 0.0) || !(hyper >= 0.0))
    throw ConfigError("jump rates must be non-negative");
  if (bd_scale() < 0.0 || bd_scale() > birth_death)
    throw ConfigError("birth-death balancing scale must lie in [0, birth_death rate]");
  if (s_scale() < 0.0 || s_scale() > swap)
    throw ConfigError("swap balancing scale must lie in [0, swap rate]");
}

std::optional<double> MoveStats::rate() const {
  if (attempts == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(attempts);
}

// ---- Birth and death -------------------------------------------------------

BirthProposal propose_birth(const ModelState& state, const PriorConfig& prior, Rng& rng) {
  if (state.K() >= static_cast<std::size_t>(prior.k_max))
    throw CapacityError("birth proposed at K = K_max");
  const std::size_t K = state.K();
  BirthProposal out;
  Subhazard& u = out.born;
  std::uniform_int_distribution<std::size_t> pick_kind(0, prior.candidates.size() - 1);
  u.kind = prior.candidates[pick_kind(rng)];
  u.alpha = std::normal_distribution<double>(0.0, prior.sigma_alpha)(rng);
  u.beta0 = std::normal_distribution<double>(0.0, prior.sigma_beta0)(rng);
  u.v_alpha = random_direction(rng);
  u.v_beta0 = random_direction(rng);
  const double sb = state.sigma_beta();
  std::bernoulli_distribution include(state.omega);
  std::normal_distribution<double> slab(0.0, sb);
  for (std::size_t j = 0; j < state.p; ++j) {
    const bool in = include(rng);
    u.gamma.push_back(in ? 1 : 0);
    u.beta.push_back(in ? slab(rng) : 0.0);
    u.v_beta.push_back(in ? random_direction(rng) : Velocity{0});
  }
  out.position = std::uniform_int_distribution<std::size_t>(0, K)(rng);
  out.candidate = state;
  out.candidate.insert_subhazard(out.position, u);
  const double log_slot = -std::log(static_cast<double>(K + 1));
  out.log_q_forward = log_slot + log_subhazard_prior(u, state.omega, sb, prior);
  out.log_q_reverse = log_slot;
  return out;
}

DeathProposal propose_death(const ModelState& state, const PriorConfig& prior, Rng& rng) {
  const std::size_t K = state.K();
  if (K <= 1) throw CapacityError("death proposed at K = 1");
  DeathProposal out;
  out.removed = std::uniform_int_distribution<std::size_t>(0, K - 1)(rng);
  out.candidate = state;
  out.candidate.remove_subhazard(out.removed);
  const double log_slot = -std::log(static_cast<double>(K));
  out.log_q_forward = log_slot;
  out.log_q_reverse =
      log_slot +
      log_subhazard_prior(state.subhazard(out.removed), state.omega, state.sigma_beta(), prior);
  return out;
}

double log_mhg_ratio(const ModelState& state, const ModelState& candidate, const Dataset& data,
                     const PriorConfig& prior, double log_q_forward, double log_q_reverse,
                     double log_jacobian) {
  return log_target(candidate, data, prior) - log_target(state, data, prior) + log_q_reverse -
         log_q_forward + log_jacobian;
}

double mhg_ratio(const ModelState& state, const ModelState& candidate, const Dataset& data,
                 const PriorConfig& prior, double log_q_forward, double log_q_reverse,
                 double log_jacobian) {
  return std::exp(
      log_mhg_ratio(state, candidate, data, prior, log_q_forward, log_q_reverse, log_jacobian));
}

JumpResult birth_death_event(ModelState& state, const Dataset& data, const PriorConfig& prior,
                             const JumpRates& rates, Balancing balancing, Rng& rng,
                             JumpStats& stats) {
  const double scale = rates.birth_death > 0.0 ? rates.bd_scale() / rates.birth_death : 0.0;
  const bool birth = std::bernoulli_distribution(0.5)(rng);
  if (birth) {
    ++stats.birth.attempts;
    if (state.K() >= static_cast<std::size_t>(prior.k_max)) return JumpResult::NoChange;
    auto prop = propose_birth(state, prior, rng);
    double log_a;
    try {
      const LikelihoodCache cache(state, data);
      const double delta_ll =
          cache.log_likelihood_adding(evaluate_subhazard(prop.born, data)) - cache.log_likelihood();
      log_a = delta_ll + log_prior_ratio_birth(state, prop.born, prior) + prop.log_q_reverse -
              prop.log_q_forward;
    } catch (const NumericalError&) {
      log_a = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(log_a) && !(log_a < 0.0)) {
      ++stats.rejected_nonfinite;
      return JumpResult::NoChange;
    }
    if (!accept(scale * balance_log(balancing, log_a), rng)) return JumpResult::NoChange;
    state = std::move(prop.candidate);
    ++stats.birth.accepted;
    return JumpResult::Birth;
  }

  ++stats.death.attempts;
  if (state.K() <= 1) return JumpResult::NoChange;
  auto prop = propose_death(state, prior, rng);
  double log_a;
  try {
    const LikelihoodCache cache(state, data);
    const double delta_ll =
        cache.log_likelihood_replacing(prop.removed, nullptr) - cache.log_likelihood();
    // The candidate is the smaller state: its prior ratio is the reverse birth's, negated.
    log_a = delta_ll - log_prior_ratio_birth(prop.candidate, state.subhazard(prop.removed), prior) +
            prop.log_q_reverse - prop.log_q_forward;
  } catch (const NumericalError&) {
    log_a = std::numeric_limits<double>::quiet_NaN();
  }
  if (!std::isfinite(log_a) && !(log_a < 0.0)) {
    ++stats.rejected_nonfinite;
    return JumpResult::NoChange;
  }
  if (!accept(scale * balance_log(balancing, log_a), rng)) return JumpResult::NoChange;
  state = std::move(prop.candidate);
  ++stats.death.accepted;
  return JumpResult::Death;
}

// ---- Swaps -----------------------------------------------------------------

MedianMatch median_match(DistKind from, double nu, double mu, std::span<const double> beta) {
  MedianMatch out;
  out.kind = other_kind(from);
  out.nu = nu;
  if (from == DistKind::LogLogistic) {
    out.mu = std::pow(mu, -nu) * std::numbers::ln2;
    out.log_jacobian = std::log(nu);
  } else {
    out.mu = std::pow(std::numbers::ln2 / mu, 1.0 / nu);
    out.log_jacobian = -std::log(nu);
  }
  out.beta.reserve(beta.size());
  for (double b : beta) out.beta.push_back(-b);
  return out;
}

Subhazard median_matched(const Subhazard& s, double* log_jacobian) {
  static const double log_ln2 = std::log(std::numbers::ln2);
  const double nu = std::exp(s.alpha);
  Subhazard out = s;
  out.kind = other_kind(s.kind);
  if (s.kind == DistKind::LogLogistic) {
    out.beta0 = -nu * s.beta0 + log_ln2;
    if (log_jacobian) *log_jacobian = s.alpha;
  } else {
    out.beta0 = (log_ln2 - s.beta0) / nu;
    if (log_jacobian) *log_jacobian = -s.alpha;
  }
  for (std::size_t j = 0; j < out.beta.size(); ++j) {
    out.beta[j] = -s.beta[j];
    out.v_beta[j] = static_cast<Velocity>(-s.v_beta[j]);
  }
  return out;
}

JumpResult swap_event(ModelState& state, const Dataset& data, const PriorConfig& prior,
                      const JumpRates& rates, Balancing balancing, SwapKind kind, Rng& rng,
                      JumpStats& stats) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(0, state.K() - 1)(rng);
  const Subhazard old = state.subhazard(k);
  if (!prior.allows(other_kind(old.kind))) return JumpResult::NoChange;
  ++stats.swap.attempts;

  Subhazard next;
  double log_a_extra = 0.0;
  if (kind == SwapKind::MedianMatch) {
    double log_jac = 0.0;
    next = median_matched(old, &log_jac);
    log_a_extra = log_jac + log_normal_density(next.beta0, prior.sigma_beta0) -
                  log_normal_density(old.beta0, prior.sigma_beta0);
  } else {
    // Prior proposal for (alpha, beta0): prior and proposal densities cancel.
    next = old;
    next.kind = other_kind(old.kind);
    next.alpha = std::normal_distribution<double>(0.0, prior.sigma_alpha)(rng);
    next.beta0 = std::normal_distribution<double>(0.0, prior.sigma_beta0)(rng);
  }

  double log_a;
  try {
    const LikelihoodCache cache(state, data);
    const auto replacement = evaluate_subhazard(next, data);
    log_a = cache.log_likelihood_replacing(k, &replacement) - cache.log_likelihood() + log_a_extra;
  } catch (const NumericalError&) {
    log_a = std::numeric_limits<double>::quiet_NaN();
  }
  if (!std::isfinite(log_a) && !(log_a < 0.0)) {
    ++stats.rejected_nonfinite;
    return JumpResult::NoChange;
  }
  const double scale = rates.swap > 0.0 ? rates.s_scale() / rates.swap : 0.0;
  if (!accept(scale * balance_log(balancing, log_a), rng)) return JumpResult::NoChange;
  state.set_subhazard(k, next);
  ++stats.swap.accepted;
  return JumpResult::Swap;
}

// ---- Hyperparameters -------------------------------------------------------

void apply_fixed_hyperparameters(ModelState& state, const PriorConfig& prior) {
  if (prior.fixed_omega) state.omega = *prior.fixed_omega;
  if (prior.fixed_sigma_beta) {
    state.z1 = *prior.fixed_sigma_beta;
    state.z2 = 1.0;
  }
}

void gibbs_omega(ModelState& state, const PriorConfig& prior, Rng& rng) {
  if (prior.fixed_omega) {
    state.omega = *prior.fixed_omega;
    return;
  }
  const double in = static_cast<double>(state.included_count());
  const double out = static_cast<double>(state.excluded_count());
  const double x = std::gamma_distribution<double>(prior.beta_a + in, 1.0)(rng);
  const double y = std::gamma_distribution<double>(prior.beta_b + out, 1.0)(rng);
  constexpr double eps = 1e-12;
  state.omega = std::clamp(x / (x + y), eps, 1.0 - eps);
}

SigmaSampler::SigmaSampler(double target_acceptance, double decay)
    : target_(target_acceptance), decay_(decay), log_lambda_(std::log(2.38 * 2.38 / 2.0)) {}

double SigmaSampler::log_density(double z1, double w, const ModelState& state) {
  const double sb = std::abs(z1) * std::exp(0.5 * w);
  double lp = -0.5 * z1 * z1 - 0.5 * w - 0.5 * std::exp(-w);
  if (state.included_count() == 0) return lp;
  if (!(sb > 0.0) || !std::isfinite(sb)) return -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < state.K(); ++k)
    for (std::size_t j = 0; j < state.p; ++j)
      if (state.included(k, j)) lp += log_normal_density(state.beta(k, j), sb);
  return lp;
}

bool SigmaSampler::step(ModelState& state, const PriorConfig& prior, Rng& rng) {
  if (prior.fixed_sigma_beta) {
    apply_fixed_hyperparameters(state, prior);
    return false;
  }
  const std::array<double, 2> x{state.z1, std::log(state.z2)};
  if (n_ == 0) mean_ = x;

  constexpr double reg = 1e-8;
  const double l11 = std::sqrt(cov_[0] + reg);
  const double l21 = cov_[1] / l11;
  const double l22 = std::sqrt(std::max(cov_[2] + reg - l21 * l21, reg));
  const double s = std::exp(0.5 * log_lambda_);
  std::normal_distribution<double> z(0.0, 1.0);
  const double e1 = z(rng), e2 = z(rng);
  const std::array<double, 2> y{x[0] + s * l11 * e1, x[1] + s * (l21 * e1 + l22 * e2)};

  const double log_ratio = log_density(y[0], y[1], state) - log_density(x[0], x[1], state);
  const double alpha = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio))
                                                : (log_ratio > 0.0 ? 1.0 : 0.0);
  const bool accepted = uniform01(rng) < alpha;
  const std::array<double, 2> next = accepted ? y : x;
  if (accepted) {
    state.z1 = y[0];
    state.z2 = std::exp(y[1]);
  }

  ++n_;
  const double g = std::pow(static_cast<double>(n_ + 1), -decay_);
  log_lambda_ += g * (alpha - target_);
  const double d0 = next[0] - mean_[0], d1 = next[1] - mean_[1];
  mean_[0] += g * d0;
  mean_[1] += g * d1;
  cov_[0] += g * (d0 * d0 - cov_[0]);
  cov_[1] += g * (d0 * d1 - cov_[1]);
  cov_[2] += g * (d1 * d1 - cov_[2]);
  return accepted;
}

void hyper_event(ModelState& state, const PriorConfig& prior, SigmaSampler& sigma, Rng& rng,
                 JumpStats& stats) {
  gibbs_omega(state, prior, rng);
  if (prior.fixed_sigma_beta) {
    apply_fixed_hyperparameters(state, prior);
    return;
  }
  ++stats.sigma.attempts;
  if (sigma.step(state, prior, rng)) ++stats.sigma.accepted;
}

}  // namespace polyhaz
