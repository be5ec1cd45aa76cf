#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "polyhaz/jumps.hpp"
#include "polyhaz/model.hpp"

namespace polyhaz {

/// Two-component generator: Y1 ~ logNormal(0, 0.5), Y2 ~ Exp(1), Y = min(Y1, Y2),
/// censoring C ~ Exp(0.5), one Bernoulli(0.5) covariate named x1 that does not
/// enter the event time. Returned on the original (unstandardised) scale.
Dataset simulate_supplement_data(std::size_t n, Rng& rng);

struct PolyhazardSimulation {
  std::vector<Subhazard> components;  // beta and gamma sized p
  std::size_t p = 0;                  // covariates drawn N(0, 1)
  double censor_rate = 0.0;           // exponential censoring; 0 disables it
};

/// Latent competing risks: the event time is the minimum of independent draws
/// from each component; censoring is independent exponential.
Dataset simulate_polyhazard(const PolyhazardSimulation& sim, std::size_t n, Rng& rng);

/// Draw from one component given its log location.
double draw_event_time(DistKind kind, double nu, double log_mu, Rng& rng);

struct ReferenceOptions {
  std::size_t iterations = 1000000;
  std::size_t burn_in = 10000;
  std::size_t thin = 10;
  double proposal_scale = 0.2;  // RWM step per coordinate
  double sigma_scale = 0.5;     // RWM step on (z1, log z2)
  bool swaps = true;
};

struct ReferenceResult {
  std::map<std::string, double> occupancy;  // fraction of kept iterations
  std::vector<ModelState> samples;          // every thin-th kept iteration
  MoveStats within;
  MoveStats inclusion;
  JumpStats jumps;
};

/// Discrete-time reversible-jump sampler targeting the same posterior: joint
/// random-walk Metropolis inside a model, add/delete moves on gamma, birth,
/// death and median-matching swaps, Gibbs omega, random-walk sigma_beta.
ReferenceResult reference_rjmcmc(const Dataset& data, const PriorConfig& prior,
                                 const ReferenceOptions& options, Rng& rng);

/// Posterior inclusion probability for y ~ N(beta, s^2),
/// beta ~ omega N(0, sigma^2) + (1 - omega) delta_0.
double spike_slab_inclusion(double y, double s, double sigma, double omega);

/// Metropolis chain on the same toy; returns the inclusion frequency.
double spike_slab_reference(double y, double s, double sigma, double omega,
                            std::size_t iterations, Rng& rng);

/// Kaplan-Meier estimate at the sorted distinct event times.
struct KaplanMeier {
  std::vector<double> time;
  std::vector<double> survival;
  std::vector<double> std_error;  // Greenwood
  double at(double t) const;
};
KaplanMeier kaplan_meier(const Dataset& data);

}  // namespace polyhaz
