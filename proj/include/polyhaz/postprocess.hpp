#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polyhaz/engine.hpp"
#include "polyhaz/model.hpp"

namespace polyhaz {

/// Weibull subhazards first, then log-logistic; ascending shape within a kind.
ModelState apply_ordering(const ModelState& state);

/// Occupancy times (summed over chains) normalised to probabilities.
std::map<std::string, double> submodel_probabilities(
    const std::vector<std::map<std::string, double>>& occupancy);
/// Snapshot-count estimate of the same table.
std::map<std::string, double> snapshot_probabilities(std::span<const Sample> samples);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double q975 = 0.0;
  std::size_t n = 0;
};

/// Linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);
Summary summarize(std::span<const double> values);

/// Overall hazard and survival of one state at covariate profile x (model scale).
double total_hazard(const ModelState& state, std::span<const double> x, double y);
double total_cumulative_hazard(const ModelState& state, std::span<const double> x, double y);
double survival_at(const ModelState& state, std::span<const double> x, double y);

struct MeanSurvival {
  double value = 0.0;
  bool truncated = false;       // S(horizon) > 1e-4
  double tail_survival = 0.0;   // S(horizon)
};

/// Integral of S(y) over [0, horizon] by adaptive Simpson.
MeanSurvival mean_survival(const ModelState& state, std::span<const double> x, double horizon,
                           double tolerance = 1e-6);

struct MeanSurvivalSummary {
  Summary summary;
  std::vector<double> values;
  std::size_t truncated = 0;
};

MeanSurvivalSummary mean_survival(std::span<const Sample> samples, std::span<const double> x,
                                  double horizon, double tolerance = 1e-6);

/// Per-sample difference E[Y | x1] - E[Y | x0].
MeanSurvivalSummary mean_survival_difference(std::span<const Sample> samples,
                                             std::span<const double> x1,
                                             std::span<const double> x0, double horizon,
                                             double tolerance = 1e-6);

struct CurvePoint {
  double time;
  double mean;
  double lower;  // 2.5%
  double upper;  // 97.5%
};

std::vector<CurvePoint> hazard_curve(std::span<const Sample> samples, std::span<const double> x,
                                     std::span<const double> grid);
std::vector<CurvePoint> survival_curve(std::span<const Sample> samples,
                                       std::span<const double> x, std::span<const double> grid);
/// Pointwise summary of h(y | x1) / h(y | x0).
std::vector<CurvePoint> hazard_ratio_curve(std::span<const Sample> samples,
                                           std::span<const double> x1,
                                           std::span<const double> x0,
                                           std::span<const double> grid);

/// Evenly spaced grid on (0, upper] with `points` entries.
std::vector<double> time_grid(double upper, std::size_t points);

/// Original-scale quantile of covariate column j.
double covariate_quantile(const Dataset& data, std::size_t j, double q);

/// Potential scale reduction factor over equal-length chains (split in halves).
double split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace polyhaz
