#include "polyhaz/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

struct Evaluation {
  double log_lik = 0.0;
  double log_prior = 0.0;
};

// Shared likelihood/gradient kernel. grad (if non-empty) receives dU/dtheta
// for coordinates whose velocity is non-zero.
Evaluation evaluate(const ModelState& s, std::span<const double> theta, const Dataset& data,
                    const PriorConfig& prior, std::span<const Velocity> velocity,
                    std::span<double> grad) {
  const std::size_t K = s.K();
  const std::size_t p = s.p;
  const bool want_grad = !grad.empty();
  if (data.n() > 0 && data.p != p) throw std::logic_error("dataset/state covariate count mismatch");
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  Evaluation out;
  thread_local std::vector<HazardTerms> terms;
  terms.resize(K);

  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.row(i);
    const double log_y = data.log_time[i];
    double sum_H = 0.0;
    double max_logh = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t base = k * (p + 2);
      double eta = theta[base + 1];
      for (std::size_t j = 0; j < p; ++j)
        if (s.gamma[k * p + j]) eta += x[j] * theta[base + 2 + j];
      terms[k] = hazard_terms(s.dists[k], theta[base], eta, log_y);
      sum_H += terms[k].cum_hazard;
      max_logh = std::max(max_logh, terms[k].log_hazard);
    }
    double lse = 0.0;
    double contrib = -sum_H;
    const bool event = data.event[i] != 0;
    if (event) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += std::exp(terms[k].log_hazard - max_logh);
      lse = max_logh + std::log(acc);
      contrib += lse;
    }
    if (!std::isfinite(contrib)) throw NumericalError("non-finite log likelihood", i);
    out.log_lik += contrib;

    if (!want_grad) continue;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t base = k * (p + 2);
      const double w = event ? std::exp(terms[k].log_hazard - lse) : 0.0;
      const auto& d = terms[k].d;
      const double g_alpha = w * d.dlogh_dalpha - d.dH_dalpha;
      const double g_eta = w * d.dlogh_dlogmu - d.dH_dlogmu;
      if (velocity[base]) grad[base] -= g_alpha;
      if (velocity[base + 1]) grad[base + 1] -= g_eta;
      for (std::size_t j = 0; j < p; ++j)
        if (velocity[base + 2 + j]) grad[base + 2 + j] -= x[j] * g_eta;
    }
  }

  const double sb = s.sigma_beta();
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t base = k * (p + 2);
    out.log_prior += log_normal_density(theta[base], prior.sigma_alpha);
    out.log_prior += log_normal_density(theta[base + 1], prior.sigma_beta0);
    if (want_grad) {
      if (velocity[base]) grad[base] += theta[base] / (prior.sigma_alpha * prior.sigma_alpha);
      if (velocity[base + 1])
        grad[base + 1] += theta[base + 1] / (prior.sigma_beta0 * prior.sigma_beta0);
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (!s.gamma[k * p + j]) continue;
      out.log_prior += log_normal_density(theta[base + 2 + j], sb);
      if (want_grad && velocity[base + 2 + j]) grad[base + 2 + j] += theta[base + 2 + j] / (sb * sb);
    }
  }
  if (want_grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (!std::isfinite(grad[i])) throw NumericalError("non-finite gradient at coordinate " + std::to_string(i));
  }
  return out;
}

void check_dataset(const std::vector<double>& time, const std::vector<std::uint8_t>& event,
                   const std::vector<double>& x, std::size_t p) {
  if (time.size() != event.size()) throw InputError("time and event columns differ in length");
  if (x.size() != time.size() * p) throw InputError("covariate matrix has the wrong size");
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!std::isfinite(time[i]) || time[i] <= 0.0)
      throw InputError("survival times must be positive and finite", i + 1);
    if (event[i] > 1) throw InputError("event indicator must be 0 or 1", i + 1);
  }
  for (double v : x)
    if (!std::isfinite(v)) throw InputError("covariates must be finite");
}

}  // namespace

double log_normal_density(double x, double sd) {
  const double z = x / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

// ---- Dataset ---------------------------------------------------------------

double Dataset::max_time() const {
  return time.empty() ? 0.0 : *std::max_element(time.begin(), time.end());
}

std::vector<double> Dataset::to_model_scale(std::span<const double> original) const {
  if (original.size() != p) throw InputError("covariate profile has the wrong length");
  std::vector<double> out(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double c = centre.empty() ? 0.0 : centre[j];
    const double sc = scale.empty() ? 1.0 : scale[j];
    out[j] = (original[j] - c) / sc;
  }
  return out;
}

Dataset make_dataset(std::vector<double> time, std::vector<std::uint8_t> event,
                     std::vector<double> x, std::size_t p, std::vector<std::string> names) {
  check_dataset(time, event, x, p);
  Dataset d;
  d.p = p;
  d.log_time.resize(time.size());
  std::transform(time.begin(), time.end(), d.log_time.begin(), [](double t) { return std::log(t); });
  d.time = std::move(time);
  d.event = std::move(event);
  d.x = std::move(x);
  if (names.empty())
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  d.names = std::move(names);
  d.centre.assign(p, 0.0);
  d.scale.assign(p, 1.0);
  d.binary.assign(p, false);
  return d;
}

Dataset standardize(std::vector<double> time, std::vector<std::uint8_t> event,
                    std::vector<double> x, std::size_t p, std::vector<std::string> names) {
  const std::size_t n = time.size();
  check_dataset(time, event, x, p);
  std::vector<double> centre(p, 0.0), scale(p, 1.0);
  std::vector<bool> binary(p, true);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i * p + j];
      sum += v;
      if (v != 0.0 && v != 1.0) binary[j] = false;
    }
    const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x[i * p + j] - mean) * (x[i * p + j] - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    centre[j] = mean;
    scale[j] = (binary[j] || sd == 0.0) ? 1.0 : sd;
    for (std::size_t i = 0; i < n; ++i) x[i * p + j] = (x[i * p + j] - centre[j]) / scale[j];
  }
  Dataset d = make_dataset(std::move(time), std::move(event), std::move(x), p, std::move(names));
  d.centre = std::move(centre);
  d.scale = std::move(scale);
  d.binary = std::move(binary);
  return d;
}

// ---- PriorConfig -----------------------------------------------------------

void PriorConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(sigma_alpha) || !positive(sigma_beta0) || !positive(beta_a) || !positive(beta_b) ||
      !positive(xi))
    throw ConfigError("prior scales and shape parameters must be positive");
  if (k_max < 1) throw ConfigError("k_max must be at least 1");
  if (fixed_omega && !(*fixed_omega > 0.0 && *fixed_omega < 1.0))
    throw ConfigError("fixed omega must lie strictly between 0 and 1");
  if (fixed_sigma_beta && !positive(*fixed_sigma_beta))
    throw ConfigError("fixed sigma_beta must be positive");
  if (candidates.empty()) throw ConfigError("at least one candidate distribution is required");
}

bool PriorConfig::allows(DistKind kind) const {
  return std::find(candidates.begin(), candidates.end(), kind) != candidates.end();
}

// ---- ModelState ------------------------------------------------------------

std::size_t ModelState::included_count() const {
  return static_cast<std::size_t>(std::count(gamma.begin(), gamma.end(), std::uint8_t{1}));
}

double ModelState::nu(std::size_t k) const { return std::exp(alpha(k)); }

double ModelState::sigma_beta() const { return std::abs(z1) * std::sqrt(z2); }

Subhazard ModelState::subhazard(std::size_t k) const {
  Subhazard s;
  s.kind = dists[k];
  s.alpha = alpha(k);
  s.beta0 = beta0(k);
  s.v_alpha = velocity[alpha_index(k)];
  s.v_beta0 = velocity[beta0_index(k)];
  for (std::size_t j = 0; j < p; ++j) {
    s.gamma.push_back(gamma[k * p + j]);
    s.beta.push_back(beta(k, j));
    s.v_beta.push_back(velocity[beta_index(k, j)]);
  }
  return s;
}

void ModelState::insert_subhazard(std::size_t position, const Subhazard& s) {
  if (position > K()) throw std::out_of_range("subhazard insert position");
  if (s.gamma.size() != p || s.beta.size() != p || s.v_beta.size() != p)
    throw std::logic_error("subhazard covariate count mismatch");
  std::vector<double> block{s.alpha, s.beta0};
  block.insert(block.end(), s.beta.begin(), s.beta.end());
  std::vector<Velocity> vblock{s.v_alpha, s.v_beta0};
  vblock.insert(vblock.end(), s.v_beta.begin(), s.v_beta.end());
  const auto offset = static_cast<std::ptrdiff_t>(position * stride());
  theta.insert(theta.begin() + offset, block.begin(), block.end());
  velocity.insert(velocity.begin() + offset, vblock.begin(), vblock.end());
  gamma.insert(gamma.begin() + static_cast<std::ptrdiff_t>(position * p), s.gamma.begin(),
               s.gamma.end());
  dists.insert(dists.begin() + static_cast<std::ptrdiff_t>(position), s.kind);
}

void ModelState::remove_subhazard(std::size_t k) {
  if (k >= K()) throw std::out_of_range("subhazard index");
  const auto offset = static_cast<std::ptrdiff_t>(k * stride());
  const auto width = static_cast<std::ptrdiff_t>(stride());
  theta.erase(theta.begin() + offset, theta.begin() + offset + width);
  velocity.erase(velocity.begin() + offset, velocity.begin() + offset + width);
  const auto goff = static_cast<std::ptrdiff_t>(k * p);
  gamma.erase(gamma.begin() + goff, gamma.begin() + goff + static_cast<std::ptrdiff_t>(p));
  dists.erase(dists.begin() + static_cast<std::ptrdiff_t>(k));
}

void ModelState::set_subhazard(std::size_t k, const Subhazard& s) {
  dists[k] = s.kind;
  theta[alpha_index(k)] = s.alpha;
  theta[beta0_index(k)] = s.beta0;
  velocity[alpha_index(k)] = s.v_alpha;
  velocity[beta0_index(k)] = s.v_beta0;
  for (std::size_t j = 0; j < p; ++j) {
    gamma[k * p + j] = s.gamma[j];
    theta[beta_index(k, j)] = s.beta[j];
    velocity[beta_index(k, j)] = s.v_beta[j];
  }
}

void ModelState::check_invariants(const PriorConfig& prior) const {
  auto fail = [](const std::string& what) { throw std::logic_error("state invariant: " + what); };
  if (K() < 1 || K() > static_cast<std::size_t>(prior.k_max)) fail("1 <= K <= K_max");
  if (theta.size() != K() * stride() || velocity.size() != theta.size() || gamma.size() != K() * p)
    fail("layout sizes");
  for (std::size_t k = 0; k < K(); ++k) {
    if (!prior.allows(dists[k])) fail("distribution outside the candidate set");
    if (std::abs(velocity[alpha_index(k)]) != 1 || std::abs(velocity[beta0_index(k)]) != 1)
      fail("alpha/beta0 velocities must be +-1");
    for (std::size_t j = 0; j < p; ++j) {
      const Velocity v = velocity[beta_index(k, j)];
      if (included(k, j)) {
        if (std::abs(v) != 1) fail("included coordinate without unit velocity");
      } else if (v != 0 || beta(k, j) != 0.0) {
        fail("excluded coordinate must be stuck at zero");
      }
    }
  }
  for (double t : theta)
    if (!std::isfinite(t)) fail("finite coordinates");
  if (!(omega > 0.0 && omega < 1.0)) fail("0 < omega < 1");
  if (!(z2 > 0.0) || !(sigma_beta() > 0.0)) fail("sigma_beta > 0");
}

ModelState zero_state(DistKind kind, std::size_t p) {
  ModelState s;
  s.p = p;
  Subhazard sh;
  sh.kind = kind;
  sh.gamma.assign(p, 0);
  sh.beta.assign(p, 0.0);
  sh.v_beta.assign(p, 0);
  s.insert_subhazard(0, sh);
  return s;
}

// ---- Likelihood and potential ----------------------------------------------

double log_location(const ModelState& state, std::size_t k, std::span<const double> x) {
  double eta = state.beta0(k);
  for (std::size_t j = 0; j < state.p; ++j)
    if (state.included(k, j)) eta += x[j] * state.beta(k, j);
  return eta;
}

double linear_predictor(const ModelState& state, std::size_t k, std::span<const double> x) {
  return std::exp(log_location(state, k, x));
}

double log_likelihood(const ModelState& state, const Dataset& data) {
  PriorConfig unused;
  return evaluate(state, state.theta, data, unused, {}, {}).log_lik;
}

double potential(const ModelState& state, const Dataset& data, const PriorConfig& prior) {
  const auto e = evaluate(state, state.theta, data, prior, {}, {});
  return -(e.log_lik + e.log_prior);
}

std::vector<double> grad_potential(const ModelState& state, const Dataset& data,
                                   const PriorConfig& prior, std::span<const std::size_t> coords) {
  std::vector<Velocity> mask(state.dim(), 0);
  for (std::size_t c : coords) {
    if (c >= state.dim()) throw std::out_of_range("gradient coordinate");
    if (state.is_slab_coordinate(c)) {
      const std::size_t k = c / state.stride();
      const std::size_t j = c % state.stride() - 2;
      if (!state.included(k, j))
        throw std::logic_error("gradient requested for an excluded coefficient");
    }
    mask[c] = 1;
  }
  std::vector<double> full(state.dim());
  evaluate(state, state.theta, data, prior, mask, full);
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t c : coords) out.push_back(full[c]);
  return out;
}

double log_discrete_prior(const ModelState& state, const PriorConfig& prior) {
  const double K = static_cast<double>(state.K());
  const double n_in = static_cast<double>(state.included_count());
  const double n_out = static_cast<double>(state.excluded_count());
  double lp = K * std::log(prior.xi) - std::lgamma(K + 1.0) - std::log(std::expm1(prior.xi));
  lp -= K * std::log(static_cast<double>(prior.candidates.size()));
  if (n_in > 0) lp += n_in * std::log(state.omega);
  if (n_out > 0) lp += n_out * std::log1p(-state.omega);
  return lp;
}

double log_target(const ModelState& state, const Dataset& data, const PriorConfig& prior) {
  return -potential(state, data, prior) + log_discrete_prior(state, prior);
}

double log_subhazard_prior(const Subhazard& s, double omega, double sigma_beta,
                           const PriorConfig& prior) {
  double lp = -std::log(static_cast<double>(prior.candidates.size()));
  lp += log_normal_density(s.alpha, prior.sigma_alpha);
  lp += log_normal_density(s.beta0, prior.sigma_beta0);
  for (std::size_t j = 0; j < s.gamma.size(); ++j) {
    if (s.gamma[j])
      lp += std::log(omega) + log_normal_density(s.beta[j], sigma_beta);
    else
      lp += std::log1p(-omega);
  }
  return lp;
}

double log_prior_ratio_birth(const ModelState& state, const Subhazard& born,
                             const PriorConfig& prior) {
  if (state.K() >= static_cast<std::size_t>(prior.k_max))
    throw CapacityError("birth proposed at K = K_max");
  const double K = static_cast<double>(state.K());
  return std::log(prior.xi / (K + 1.0)) +
         log_subhazard_prior(born, state.omega, state.sigma_beta(), prior);
}

// ---- Likelihood cache ------------------------------------------------------

SubhazardLikelihood evaluate_subhazard(const Subhazard& s, const Dataset& data) {
  SubhazardLikelihood out;
  out.log_hazard.resize(data.n());
  out.cum_hazard.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.row(i);
    double eta = s.beta0;
    for (std::size_t j = 0; j < data.p; ++j)
      if (s.gamma[j]) eta += x[j] * s.beta[j];
    const auto t = hazard_terms(s.kind, s.alpha, eta, data.log_time[i]);
    out.log_hazard[i] = t.log_hazard;
    out.cum_hazard[i] = t.cum_hazard;
  }
  return out;
}

SubhazardLikelihood evaluate_subhazard(const ModelState& state, std::size_t k,
                                       const Dataset& data) {
  return evaluate_subhazard(state.subhazard(k), data);
}

LikelihoodCache::LikelihoodCache(const ModelState& state, const Dataset& data) : data_(&data) {
  parts_.reserve(state.K() + 1);
  for (std::size_t k = 0; k < state.K(); ++k) parts_.push_back(evaluate_subhazard(state, k, data));
}

double LikelihoodCache::combine(std::size_t skip, const SubhazardLikelihood* extra) const {
  const Dataset& data = *data_;
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    double sum_H = 0.0;
    double m = -std::numeric_limits<double>::infinity();
    auto visit = [&](const SubhazardLikelihood& s) {
      sum_H += s.cum_hazard[i];
      m = std::max(m, s.log_hazard[i]);
    };
    for (std::size_t k = 0; k < parts_.size(); ++k)
      if (k != skip) visit(parts_[k]);
    if (extra) visit(*extra);
    double contrib = -sum_H;
    if (data.event[i]) {
      double acc = 0.0;
      for (std::size_t k = 0; k < parts_.size(); ++k)
        if (k != skip) acc += std::exp(parts_[k].log_hazard[i] - m);
      if (extra) acc += std::exp(extra->log_hazard[i] - m);
      contrib += m + std::log(acc);
    }
    if (!std::isfinite(contrib)) throw NumericalError("non-finite log likelihood", i);
    ll += contrib;
  }
  return ll;
}

double LikelihoodCache::log_likelihood() const { return combine(parts_.size(), nullptr); }

double LikelihoodCache::log_likelihood_replacing(std::size_t k,
                                                 const SubhazardLikelihood* s) const {
  return combine(k, s);
}

double LikelihoodCache::log_likelihood_adding(const SubhazardLikelihood& s) const {
  return combine(parts_.size(), &s);
}

// ---- PolyhazardTarget ------------------------------------------------------

PolyhazardTarget::PolyhazardTarget(const ModelState& structure, const Dataset& data,
                                   const PriorConfig& prior)
    : structure_(&structure), data_(&data), prior_(&prior), dim_(structure.dim()) {}

void PolyhazardTarget::gradient(std::span<const double> theta, std::span<const Velocity> velocity,
                                std::span<double> grad) const {
  evaluate(*structure_, theta, *data_, *prior_, velocity, grad);
}

double PolyhazardTarget::potential_at(std::span<const double> theta) const {
  const auto e = evaluate(*structure_, theta, *data_, *prior_, {}, {});
  return -(e.log_lik + e.log_prior);
}

}  // namespace polyhaz
