#include "polyhaz/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polyhaz/engine.hpp"
#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool metropolis(double log_a, Rng& rng) {
  if (std::isnan(log_a)) return false;
  return log_a >= 0.0 || std::log(uniform01(rng)) < log_a;
}

double safe_log_target(const ModelState& s, const Dataset& data, const PriorConfig& prior) {
  try {
    return log_target(s, data, prior);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Dataset simulate_supplement_data(std::size_t n, Rng& rng) {
  if (n == 0) throw InputError("simulated dataset must have at least one row", 0);
  std::lognormal_distribution<double> y1(0.0, 0.5);
  std::exponential_distribution<double> y2(1.0);
  std::exponential_distribution<double> censor(0.5);
  std::bernoulli_distribution x(0.5);
  std::vector<double> time(n), cov(n);
  std::vector<std::uint8_t> event(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = std::min(y1(rng), y2(rng));
    const double c = censor(rng);
    time[i] = std::min(y, c);
    event[i] = y <= c;
    cov[i] = x(rng) ? 1.0 : 0.0;
  }
  return make_dataset(std::move(time), std::move(event), std::move(cov), 1, {"x1"});
}

double draw_event_time(DistKind kind, double nu, double log_mu, Rng& rng) {
  // Invert H(y) = E with E ~ Exp(1).
  const double e = std::exponential_distribution<double>(1.0)(rng);
  if (kind == DistKind::Weibull) return std::exp((std::log(e) - log_mu) / nu);
  return std::exp(log_mu + std::log(std::expm1(e)) / nu);
}

Dataset simulate_polyhazard(const PolyhazardSimulation& sim, std::size_t n, Rng& rng) {
  if (n == 0) throw InputError("simulated dataset must have at least one row", 0);
  if (sim.components.empty()) throw ConfigError("simulation needs at least one component");
  for (const auto& c : sim.components)
    if (c.beta.size() != sim.p) throw ConfigError("component coefficient count differs from p");
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> time(n), x(n * sim.p);
  std::vector<std::uint8_t> event(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < sim.p; ++j) x[i * sim.p + j] = z(rng);
    double y = std::numeric_limits<double>::infinity();
    for (const auto& c : sim.components) {
      double eta = c.beta0;
      for (std::size_t j = 0; j < sim.p; ++j) eta += c.beta[j] * x[i * sim.p + j];
      y = std::min(y, draw_event_time(c.kind, std::exp(c.alpha), eta, rng));
    }
    const double cens = sim.censor_rate > 0.0
                            ? std::exponential_distribution<double>(sim.censor_rate)(rng)
                            : std::numeric_limits<double>::infinity();
    time[i] = std::min(y, cens);
    event[i] = y <= cens;
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < sim.p; ++j) names.push_back("x" + std::to_string(j + 1));
  return make_dataset(std::move(time), std::move(event), std::move(x), sim.p, std::move(names));
}

// ---- Reference reversible-jump sampler -------------------------------------

ReferenceResult reference_rjmcmc(const Dataset& data, const PriorConfig& prior,
                                 const ReferenceOptions& options, Rng& rng) {
  prior.validate();
  ReferenceResult out;
  ModelState state = initial_state(data, prior, rng);
  double current = safe_log_target(state, data, prior);
  std::normal_distribution<double> z(0.0, 1.0);

  for (std::size_t it = 0; it < options.burn_in + options.iterations; ++it) {
    // Joint random walk over the active continuous coordinates.
    {
      ModelState cand = state;
      for (std::size_t i = 0; i < cand.dim(); ++i)
        if (cand.velocity[i] != 0) cand.theta[i] += options.proposal_scale * z(rng);
      const double proposed = safe_log_target(cand, data, prior);
      ++out.within.attempts;
      if (metropolis(proposed - current, rng)) {
        state = std::move(cand);
        current = proposed;
        ++out.within.accepted;
      }
    }

    // Add or delete one coefficient, slab draw from the prior.
    if (state.p > 0) {
      const std::size_t k = std::uniform_int_distribution<std::size_t>(0, state.K() - 1)(rng);
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, state.p - 1)(rng);
      const std::size_t idx = state.beta_index(k, j);
      const double sb = state.sigma_beta();
      ModelState cand = state;
      double lqf = 0.0, lqr = 0.0;
      if (state.included(k, j)) {
        cand.gamma[k * state.p + j] = 0;
        cand.theta[idx] = 0.0;
        cand.velocity[idx] = 0;
        lqr = log_normal_density(state.theta[idx], sb);
      } else {
        cand.gamma[k * state.p + j] = 1;
        cand.theta[idx] = sb * z(rng);
        cand.velocity[idx] = 1;
        lqf = log_normal_density(cand.theta[idx], sb);
      }
      const double proposed = safe_log_target(cand, data, prior);
      ++out.inclusion.attempts;
      if (metropolis(proposed - current + lqr - lqf, rng)) {
        state = std::move(cand);
        current = proposed;
        ++out.inclusion.accepted;
      }
    }

    // Birth or death.
    if (std::bernoulli_distribution(0.5)(rng)) {
      ++out.jumps.birth.attempts;
      if (state.K() < static_cast<std::size_t>(prior.k_max)) {
        auto b = propose_birth(state, prior, rng);
        const double proposed = safe_log_target(b.candidate, data, prior);
        if (metropolis(proposed - current + b.log_q_reverse - b.log_q_forward, rng)) {
          state = std::move(b.candidate);
          current = proposed;
          ++out.jumps.birth.accepted;
        }
      }
    } else {
      ++out.jumps.death.attempts;
      if (state.K() > 1) {
        auto d = propose_death(state, prior, rng);
        const double proposed = safe_log_target(d.candidate, data, prior);
        if (metropolis(proposed - current + d.log_q_reverse - d.log_q_forward, rng)) {
          state = std::move(d.candidate);
          current = proposed;
          ++out.jumps.death.accepted;
        }
      }
    }

    // Median-matching swap.
    if (options.swaps) {
      const std::size_t k = std::uniform_int_distribution<std::size_t>(0, state.K() - 1)(rng);
      if (prior.allows(other_kind(state.dists[k]))) {
        ++out.jumps.swap.attempts;
        double log_jac = 0.0;
        ModelState cand = state;
        cand.set_subhazard(k, median_matched(state.subhazard(k), &log_jac));
        const double proposed = safe_log_target(cand, data, prior);
        if (metropolis(proposed - current + log_jac, rng)) {
          state = std::move(cand);
          current = proposed;
          ++out.jumps.swap.accepted;
        }
      }
    }

    // Hyperparameters.
    gibbs_omega(state, prior, rng);
    if (!prior.fixed_sigma_beta) {
      const double w = std::log(state.z2);
      const double z1n = state.z1 + options.sigma_scale * z(rng);
      const double wn = w + options.sigma_scale * z(rng);
      ++out.jumps.sigma.attempts;
      if (metropolis(SigmaSampler::log_density(z1n, wn, state) -
                         SigmaSampler::log_density(state.z1, w, state),
                     rng)) {
        state.z1 = z1n;
        state.z2 = std::exp(wn);
        ++out.jumps.sigma.accepted;
      }
    }
    current = safe_log_target(state, data, prior);

    if (it < options.burn_in) continue;
    out.occupancy[submodel_label(state)] += 1.0;
    if ((it - options.burn_in) % options.thin == 0) out.samples.push_back(state);
  }
  for (auto& [label, count] : out.occupancy) count /= static_cast<double>(options.iterations);
  return out;
}

// ---- Spike-and-slab toy ----------------------------------------------------

namespace {
double normal_pdf(double x, double sd) {
  return std::exp(-0.5 * x * x / (sd * sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
}
}  // namespace

double spike_slab_inclusion(double y, double s, double sigma, double omega) {
  const double m1 = normal_pdf(y, std::sqrt(s * s + sigma * sigma));
  const double m0 = normal_pdf(y, s);
  return omega * m1 / (omega * m1 + (1.0 - omega) * m0);
}

double spike_slab_reference(double y, double s, double sigma, double omega,
                            std::size_t iterations, Rng& rng) {
  auto log_lik = [&](double beta) { return -0.5 * (y - beta) * (y - beta) / (s * s); };
  std::normal_distribution<double> z(0.0, 1.0);
  bool in = false;
  double beta = 0.0;
  std::size_t included = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (in) {
      const double b = beta + 0.5 * z(rng);
      const double la = log_lik(b) - log_lik(beta) - 0.5 * (b * b - beta * beta) / (sigma * sigma);
      if (metropolis(la, rng)) beta = b;
      const double ld = std::log1p(-omega) + log_lik(0.0) - std::log(omega) - log_lik(beta);
      if (metropolis(ld, rng)) {
        in = false;
        beta = 0.0;
      }
    } else {
      const double b = sigma * z(rng);
      const double la = std::log(omega) + log_lik(b) - std::log1p(-omega) - log_lik(0.0);
      if (metropolis(la, rng)) {
        in = true;
        beta = b;
      }
    }
    included += in;
  }
  return static_cast<double>(included) / static_cast<double>(iterations);
}

// ---- Kaplan-Meier ----------------------------------------------------------

double KaplanMeier::at(double t) const {
  const auto it = std::upper_bound(time.begin(), time.end(), t);
  if (it == time.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - time.begin()) - 1];
}

KaplanMeier kaplan_meier(const Dataset& data) {
  std::vector<std::size_t> order(data.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return data.time[a] < data.time[b]; });
  KaplanMeier km;
  double s = 1.0, greenwood = 0.0;
  std::size_t at_risk = data.n();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = data.time[order[i]];
    std::size_t deaths = 0, leaving = 0;
    while (i < order.size() && data.time[order[i]] == t) {
      deaths += data.event[order[i]];
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      const double r = static_cast<double>(at_risk), d = static_cast<double>(deaths);
      s *= 1.0 - d / r;
      if (r > d) greenwood += d / (r * (r - d));
      km.time.push_back(t);
      km.survival.push_back(s);
      km.std_error.push_back(s * std::sqrt(greenwood));
    }
    at_risk -= leaving;
  }
  return km;
}

}  // namespace polyhaz
