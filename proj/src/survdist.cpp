#include "polyhaz/survdist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "polyhaz/errors.hpp"

namespace polyhaz {

namespace {

constexpr double kExpClamp = 700.0;

double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_args(double nu, double mu, double y) {
  if (!std::isfinite(nu) || !std::isfinite(mu) || !std::isfinite(y) || nu <= 0.0 || mu <= 0.0 ||
      y <= 0.0) {
    throw DomainError("hazard arguments must be finite and positive (nu=" + std::to_string(nu) +
                      ", mu=" + std::to_string(mu) + ", y=" + std::to_string(y) + ")");
  }
}

}  // namespace

std::string_view short_name(DistKind kind) { return kind == DistKind::Weibull ? "W" : "L"; }

std::string_view long_name(DistKind kind) {
  return kind == DistKind::Weibull ? "weibull" : "loglogistic";
}

DistKind parse_kind(std::string_view name) {
  if (name == "W" || name == "weibull" || name == "Weibull") return DistKind::Weibull;
  if (name == "L" || name == "LL" || name == "loglogistic" || name == "LogLogistic")
    return DistKind::LogLogistic;
  throw DomainError("unknown distribution '" + std::string(name) + "'");
}

DistKind other_kind(DistKind kind) {
  return kind == DistKind::Weibull ? DistKind::LogLogistic : DistKind::Weibull;
}

double clamped_exp(double x) { return std::exp(std::clamp(x, -kExpClamp, kExpClamp)); }

HazardTerms hazard_terms(DistKind kind, double alpha, double log_mu, double log_y) {
  const double nu = clamped_exp(alpha);
  HazardTerms out{};
  if (kind == DistKind::Weibull) {
    const double H = clamped_exp(log_mu + nu * log_y);
    out.log_hazard = log_mu + alpha + (nu - 1.0) * log_y;
    out.cum_hazard = H;
    out.d.dlogh_dalpha = 1.0 + nu * log_y;
    out.d.dlogh_dlogmu = 1.0;
    out.d.dH_dalpha = H * nu * log_y;
    out.d.dH_dlogmu = H;
  } else {
    const double L = log_y - log_mu;
    const double lz = nu * L;
    const double sp = softplus(lz);
    const double s = sigmoid(lz);
    const double one_minus_s = sigmoid(-lz);
    out.log_hazard = alpha - log_mu + (nu - 1.0) * L - sp;
    out.cum_hazard = sp;
    out.d.dlogh_dalpha = 1.0 + nu * L * one_minus_s;
    out.d.dlogh_dlogmu = -nu * one_minus_s;
    out.d.dH_dalpha = s * nu * L;
    out.d.dH_dlogmu = -s * nu;
  }
  return out;
}

double log_hazard(DistKind kind, double nu, double mu, double y) {
  check_args(nu, mu, y);
  return hazard_terms(kind, std::log(nu), std::log(mu), std::log(y)).log_hazard;
}

double hazard(DistKind kind, double nu, double mu, double y) {
  return std::exp(log_hazard(kind, nu, mu, y));
}

double cumulative_hazard(DistKind kind, double nu, double mu, double y) {
  check_args(nu, mu, y);
  return hazard_terms(kind, std::log(nu), std::log(mu), std::log(y)).cum_hazard;
}

double survival(DistKind kind, double nu, double mu, double y) {
  return std::exp(-cumulative_hazard(kind, nu, mu, y));
}

LogDerivatives log_derivatives(DistKind kind, double nu, double mu, double y) {
  check_args(nu, mu, y);
  return hazard_terms(kind, std::log(nu), std::log(mu), std::log(y)).d;
}

double median(DistKind kind, double nu, double mu) {
  check_args(nu, mu, 1.0);
  if (kind == DistKind::LogLogistic) return mu;
  return std::pow(std::numbers::ln2 / mu, 1.0 / nu);
}

}  // namespace polyhaz
