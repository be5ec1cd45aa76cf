#pragma once

#include <array>
#include <string_view>

namespace polyhaz {

/// Candidate subhazard families. Weibull is rate-parameterised
/// (h = mu nu y^(nu-1)); log-logistic is scale-parameterised.
enum class DistKind { Weibull, LogLogistic };

inline constexpr std::array<DistKind, 2> kAllKinds{DistKind::Weibull, DistKind::LogLogistic};

std::string_view short_name(DistKind kind);  // "W" / "L"
std::string_view long_name(DistKind kind);   // "weibull" / "loglogistic"
DistKind parse_kind(std::string_view name);  // accepts either spelling

DistKind other_kind(DistKind kind);

/// Partial derivatives of log h and H with respect to the unconstrained
/// coordinates alpha = log nu and eta = log mu.
struct LogDerivatives {
  double dlogh_dalpha;
  double dlogh_dlogmu;
  double dH_dalpha;
  double dH_dlogmu;
};

/// Everything the likelihood needs for one (observation, subhazard) pair,
/// evaluated in log space from alpha, eta and log y.
struct HazardTerms {
  double log_hazard;
  double cum_hazard;
  LogDerivatives d;
};

HazardTerms hazard_terms(DistKind kind, double alpha, double log_mu, double log_y);

double hazard(DistKind kind, double nu, double mu, double y);
double log_hazard(DistKind kind, double nu, double mu, double y);
double cumulative_hazard(DistKind kind, double nu, double mu, double y);
double survival(DistKind kind, double nu, double mu, double y);
LogDerivatives log_derivatives(DistKind kind, double nu, double mu, double y);
double median(DistKind kind, double nu, double mu);

// exp() with its argument clamped to [-700, 700].
double clamped_exp(double x);

}  // namespace polyhaz
