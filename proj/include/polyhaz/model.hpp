#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polyhaz/survdist.hpp"
#include "polyhaz/target.hpp"

namespace polyhaz {

/// Right-censored survival data. Covariates are stored row-major and are
/// already standardised when the dataset is built through standardize().
struct Dataset {
  std::vector<double> time;
  std::vector<double> log_time;
  std::vector<std::uint8_t> event;
  std::vector<double> x;  // n x p, row-major
  std::size_t p = 0;

  std::vector<std::string> names;
  // Standardisation applied to the raw covariates: x_std = (x - centre) / scale.
  std::vector<double> centre;
  std::vector<double> scale;
  std::vector<bool> binary;

  std::size_t n() const { return time.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * p, p}; }
  double max_time() const;

  /// Maps a covariate profile given on the original scale onto the model scale.
  std::vector<double> to_model_scale(std::span<const double> original) const;
};

/// Builds a dataset, validating times and events. Covariates are taken as-is.
Dataset make_dataset(std::vector<double> time, std::vector<std::uint8_t> event,
                     std::vector<double> x, std::size_t p,
                     std::vector<std::string> names = {});

/// As make_dataset, but centres every covariate column over the full sample and
/// scales non-binary columns to unit standard deviation. Columns whose values
/// are all in {0, 1} are centred only.
Dataset standardize(std::vector<double> time, std::vector<std::uint8_t> event,
                    std::vector<double> x, std::size_t p, std::vector<std::string> names = {});

/// Fixed hyperparameters of the prior hierarchy.
struct PriorConfig {
  double sigma_alpha = 2.0;
  double sigma_beta0 = 5.0;
  double beta_a = 4.0;  // omega ~ Beta(a, b)
  double beta_b = 4.0;
  double xi = 2.0;      // K ~ Poisson_{>0}(xi)
  int k_max = 4;
  std::optional<double> fixed_omega;
  std::optional<double> fixed_sigma_beta;
  std::vector<DistKind> candidates{DistKind::Weibull, DistKind::LogLogistic};

  void validate() const;
  bool allows(DistKind kind) const;
};

/// One additive component, detached from a ModelState (used by births/deaths).
struct Subhazard {
  DistKind kind = DistKind::Weibull;
  double alpha = 0.0;
  double beta0 = 0.0;
  std::vector<std::uint8_t> gamma;
  std::vector<double> beta;
  Velocity v_alpha = 1;
  Velocity v_beta0 = 1;
  std::vector<Velocity> v_beta;
};

/// Full sampler state. Continuous coordinates are stored flat, one block of
/// (alpha, beta0, beta_1..beta_p) per subhazard, with an aligned velocity
/// vector. A coordinate beta_kj is excluded (gamma = 0) exactly when it is
/// stuck at zero with zero velocity.
struct ModelState {
  std::size_t p = 0;
  std::vector<DistKind> dists;
  std::vector<double> theta;
  std::vector<Velocity> velocity;
  std::vector<std::uint8_t> gamma;  // K x p
  double omega = 0.5;
  double z1 = 1.0;
  double z2 = 1.0;
  double clock = 0.0;

  std::size_t K() const { return dists.size(); }
  std::size_t stride() const { return p + 2; }
  std::size_t dim() const { return theta.size(); }

  static std::size_t alpha_index(std::size_t k, std::size_t p) { return k * (p + 2); }
  static std::size_t beta0_index(std::size_t k, std::size_t p) { return k * (p + 2) + 1; }
  static std::size_t beta_index(std::size_t k, std::size_t j, std::size_t p) {
    return k * (p + 2) + 2 + j;
  }
  std::size_t alpha_index(std::size_t k) const { return alpha_index(k, p); }
  std::size_t beta0_index(std::size_t k) const { return beta0_index(k, p); }
  std::size_t beta_index(std::size_t k, std::size_t j) const { return beta_index(k, j, p); }
  // True for beta_kj coordinates (the only ones that can stick).
  bool is_slab_coordinate(std::size_t i) const { return i % stride() >= 2; }

  double alpha(std::size_t k) const { return theta[alpha_index(k)]; }
  double beta0(std::size_t k) const { return theta[beta0_index(k)]; }
  double beta(std::size_t k, std::size_t j) const { return theta[beta_index(k, j)]; }
  bool included(std::size_t k, std::size_t j) const { return gamma[k * p + j] != 0; }
  std::size_t included_count() const;
  std::size_t excluded_count() const { return K() * p - included_count(); }

  double nu(std::size_t k) const;
  double sigma_beta() const;

  Subhazard subhazard(std::size_t k) const;
  void insert_subhazard(std::size_t position, const Subhazard& s);
  void remove_subhazard(std::size_t k);
  void set_subhazard(std::size_t k, const Subhazard& s);

  /// Throws std::logic_error naming the first violated invariant.
  void check_invariants(const PriorConfig& prior) const;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// State with a single subhazard and every continuous coordinate at zero.
ModelState zero_state(DistKind kind, std::size_t p);

/// mu_k(x) under the log link.
double linear_predictor(const ModelState& state, std::size_t k, std::span<const double> x);
/// log mu_k(x) = beta0 + sum of included x_j beta_j.
double log_location(const ModelState& state, std::size_t k, std::span<const double> x);

double log_likelihood(const ModelState& state, const Dataset& data);

/// U = -log likelihood - log of the Gaussian priors on the continuous
/// coordinates (alpha, beta0, included beta). Discrete factors are not part of U.
double potential(const ModelState& state, const Dataset& data, const PriorConfig& prior);

/// Analytic dU/dtheta for the requested flat coordinate indices. Every index
/// must refer to a moving coordinate; excluded betas are a contract violation.
std::vector<double> grad_potential(const ModelState& state, const Dataset& data,
                                   const PriorConfig& prior, std::span<const std::size_t> coords);

/// log pi0(K) + log pi0(D | K) + log pi0(gamma | K, omega): the discrete prior
/// factors handled by the jump processes.
double log_discrete_prior(const ModelState& state, const PriorConfig& prior);

/// Log of the (unnormalised) joint posterior density at fixed hyperparameters:
/// -U + log_discrete_prior.
double log_target(const ModelState& state, const Dataset& data, const PriorConfig& prior);

/// log[pi0(K+1)/pi0(K)] + log(1/|H|) + log prior of the new subhazard given (omega, sigma_beta).
double log_prior_ratio_birth(const ModelState& state, const Subhazard& born,
                             const PriorConfig& prior);

/// Log prior density of one subhazard's parameters and inclusion indicators
/// given (omega, sigma_beta), including the uniform choice of distribution.
double log_subhazard_prior(const Subhazard& s, double omega, double sigma_beta,
                           const PriorConfig& prior);

double log_normal_density(double x, double sd);

/// Per-observation (log h, H) for one subhazard at the current coordinates.
struct SubhazardLikelihood {
  std::vector<double> log_hazard;
  std::vector<double> cum_hazard;
};

SubhazardLikelihood evaluate_subhazard(const ModelState& state, std::size_t k,
                                       const Dataset& data);
SubhazardLikelihood evaluate_subhazard(const Subhazard& s, const Dataset& data);

/// Per-subhazard likelihood contributions at a fixed position, so a jump
/// proposal that touches one subhazard recomputes only that one.
class LikelihoodCache {
 public:
  LikelihoodCache(const ModelState& state, const Dataset& data);

  double log_likelihood() const;
  /// Log likelihood with subhazard k replaced by s (or removed if s is empty).
  double log_likelihood_replacing(std::size_t k, const SubhazardLikelihood* s) const;
  /// Log likelihood with s appended.
  double log_likelihood_adding(const SubhazardLikelihood& s) const;

 private:
  double combine(std::size_t skip, const SubhazardLikelihood* extra) const;

  const Dataset* data_;
  std::vector<SubhazardLikelihood> parts_;
};

/// Potential of the polyhazard posterior at fixed (K, D, gamma, omega,
/// sigma_beta) over the flat coordinate layout of a ModelState.
class PolyhazardTarget final : public PotentialTarget {
 public:
  PolyhazardTarget(const ModelState& structure, const Dataset& data, const PriorConfig& prior);

  std::size_t dimension() const override { return dim_; }
  void gradient(std::span<const double> theta, std::span<const Velocity> velocity,
                std::span<double> grad) const override;

  double potential_at(std::span<const double> theta) const;

 private:
  const ModelState* structure_;
  const Dataset* data_;
  const PriorConfig* prior_;
  std::size_t dim_;
};

}  // namespace polyhaz
