#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "polyhaz/model.hpp"
#include "polyhaz/zigzag.hpp"

namespace polyhaz {

/// b(a) with b(a) = a b(1/a) and b <= 1.
enum class Balancing { Metropolis, Barker };

double balance(Balancing b, double a);
/// b(exp(log_a)), evaluated without overflow.
double balance_log(Balancing b, double log_a);

/// Dimension-preserving move between distribution families.
enum class SwapKind {
  MedianMatch,  // deterministic, preserves the median of the average individual
  Independent,  // fresh (alpha, beta0) from the prior under the other family
};

/// Intensities of the superposed jump clocks. The *_scale members are the
/// multiplicative constants in front of the balancing function; they default
/// to the clock intensities, which makes the thinning acceptance b(a).
struct JumpRates {
  double birth_death = 5.0;
  double swap = 5.0;
  double hyper = 1.0;
  std::optional<double> birth_death_scale;
  std::optional<double> swap_scale;

  double bd_scale() const { return birth_death_scale.value_or(birth_death); }
  double s_scale() const { return swap_scale.value_or(swap); }
  void validate() const;
};

struct MoveStats {
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  /// Undefined (nullopt) when nothing was attempted.
  std::optional<double> rate() const;
};

struct JumpStats {
  MoveStats birth;
  MoveStats death;
  MoveStats swap;
  MoveStats sigma;
  std::size_t rejected_nonfinite = 0;
};

enum class JumpResult { NoChange, Birth, Death, Swap };

struct BirthProposal {
  ModelState candidate;
  std::size_t position = 0;
  Subhazard born;
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
};

struct DeathProposal {
  ModelState candidate;
  std::size_t removed = 0;
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
};

/// Draws a new subhazard from the prior given (omega, sigma_beta) and inserts
/// it at a uniformly chosen position. New moving coordinates get uniform +-1
/// velocities.
BirthProposal propose_birth(const ModelState& state, const PriorConfig& prior, Rng& rng);
/// Removes a uniformly chosen subhazard.
DeathProposal propose_death(const ModelState& state, const PriorConfig& prior, Rng& rng);

/// Log Metropolis-Hastings-Green ratio
/// log pi(candidate) - log pi(state) + log q_rev - log q_fwd + log |J|.
double log_mhg_ratio(const ModelState& state, const ModelState& candidate, const Dataset& data,
                     const PriorConfig& prior, double log_q_forward, double log_q_reverse,
                     double log_jacobian = 0.0);
double mhg_ratio(const ModelState& state, const ModelState& candidate, const Dataset& data,
                 const PriorConfig& prior, double log_q_forward, double log_q_reverse,
                 double log_jacobian = 0.0);

/// Fired by the birth-death clock: birth or death with probability 1/2 each,
/// accepted with probability (scale / rate) b(a).
JumpResult birth_death_event(ModelState& state, const Dataset& data, const PriorConfig& prior,
                             const JumpRates& rates, Balancing balancing, Rng& rng,
                             JumpStats& stats);

struct MedianMatch {
  DistKind kind;
  double nu;
  double mu;
  std::vector<double> beta;
  double log_jacobian;  // in (alpha, log mu, beta) coordinates
};

/// Log-logistic <-> Weibull map keeping the shape and the median at x = 0:
/// LL -> W uses mu' = mu^(-nu) log 2; coefficients change sign.
MedianMatch median_match(DistKind from, double nu, double mu, std::span<const double> beta);

/// Median-matched version of a subhazard in sampler coordinates. Velocities of
/// the sign-flipped coefficients are flipped as well.
Subhazard median_matched(const Subhazard& s, double* log_jacobian);

/// Fired by the swap clock: re-types one uniformly chosen subhazard.
JumpResult swap_event(ModelState& state, const Dataset& data, const PriorConfig& prior,
                      const JumpRates& rates, Balancing balancing, SwapKind kind, Rng& rng,
                      JumpStats& stats);

/// omega | gamma ~ Beta(a + |gamma|, b + pK - |gamma|); no-op if omega is fixed.
void gibbs_omega(ModelState& state, const PriorConfig& prior, Rng& rng);

/// Adaptive random-walk Metropolis on (z1, log z2), sigma_beta = |z1| sqrt(z2),
/// with global scale and covariance adapted by a Robbins-Monro recursion.
class SigmaSampler {
 public:
  explicit SigmaSampler(double target_acceptance = 0.234, double decay = 0.6);

  /// One update; returns whether the proposal was accepted. No-op (false)
  /// when sigma_beta is fixed.
  bool step(ModelState& state, const PriorConfig& prior, Rng& rng);

  /// Log density of (z1, w = log z2) given the included coefficients.
  static double log_density(double z1, double w, const ModelState& state);

  double log_scale() const { return log_lambda_; }
  std::array<double, 3> covariance() const { return cov_; }  // (s11, s12, s22)
  std::size_t updates() const { return n_; }

 private:
  double target_;
  double decay_;
  std::size_t n_ = 0;
  double log_lambda_;
  std::array<double, 2> mean_{0.0, 0.0};
  std::array<double, 3> cov_{1.0, 0.0, 1.0};
};

/// Combined hyperparameter event: Gibbs update of omega, then one sigma step.
void hyper_event(ModelState& state, const PriorConfig& prior, SigmaSampler& sigma, Rng& rng,
                 JumpStats& stats);

/// Applies fixed hyperparameters from the prior config to a state.
void apply_fixed_hyperparameters(ModelState& state, const PriorConfig& prior);

}  // namespace polyhaz
