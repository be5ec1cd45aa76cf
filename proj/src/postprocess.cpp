#include "polyhaz/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polyhaz/survdist.hpp"

namespace polyhaz {

ModelState apply_ordering(const ModelState& state) {
  std::vector<Subhazard> parts;
  for (std::size_t k = 0; k < state.K(); ++k) parts.push_back(state.subhazard(k));
  std::stable_sort(parts.begin(), parts.end(), [](const Subhazard& a, const Subhazard& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.alpha < b.alpha;
  });
  ModelState out = state;
  for (std::size_t k = 0; k < parts.size(); ++k) out.set_subhazard(k, parts[k]);
  return out;
}

std::map<std::string, double> submodel_probabilities(
    const std::vector<std::map<std::string, double>>& occupancy) {
  std::map<std::string, double> out;
  double total = 0.0;
  for (const auto& chain : occupancy)
    for (const auto& [label, t] : chain) {
      out[label] += t;
      total += t;
    }
  if (total > 0.0)
    for (auto& [label, t] : out) t /= total;
  return out;
}

std::map<std::string, double> snapshot_probabilities(std::span<const Sample> samples) {
  std::map<std::string, double> out;
  for (const auto& s : samples) out[submodel_label(s.state)] += 1.0;
  for (auto& [label, c] : out) c /= static_cast<double>(samples.size());
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.q025 = q(0.025);
  s.q25 = q(0.25);
  s.q50 = q(0.5);
  s.q75 = q(0.75);
  s.q975 = q(0.975);
  return s;
}

double total_hazard(const ModelState& state, std::span<const double> x, double y) {
  const double log_y = std::log(y);
  double h = 0.0;
  for (std::size_t k = 0; k < state.K(); ++k)
    h += std::exp(
        hazard_terms(state.dists[k], state.alpha(k), log_location(state, k, x), log_y)
            .log_hazard);
  return h;
}

double total_cumulative_hazard(const ModelState& state, std::span<const double> x, double y) {
  if (y <= 0.0) return 0.0;
  const double log_y = std::log(y);
  double H = 0.0;
  for (std::size_t k = 0; k < state.K(); ++k)
    H += hazard_terms(state.dists[k], state.alpha(k), log_location(state, k, x), log_y)
             .cum_hazard;
  return H;
}

double survival_at(const ModelState& state, std::span<const double> x, double y) {
  return std::exp(-total_cumulative_hazard(state, x, y));
}

namespace {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  // A few fixed panels first so narrow features near zero are not missed.
  constexpr int panels = 16;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * h, hi = lo + h, mid = 0.5 * (lo + hi);
    const double flo = f(lo), fmid = f(mid), fhi = f(hi);
    const double whole = h / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / panels, 40);
  }
  return total;
}

}  // namespace

MeanSurvival mean_survival(const ModelState& state, std::span<const double> x, double horizon,
                           double tolerance) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  // Linear predictors do not depend on y; hoist them.
  std::vector<double> eta(state.K());
  for (std::size_t k = 0; k < state.K(); ++k) eta[k] = log_location(state, k, x);
  auto S = [&](double y) {
    if (y <= 0.0) return 1.0;
    const double log_y = std::log(y);
    double H = 0.0;
    for (std::size_t k = 0; k < state.K(); ++k)
      H += hazard_terms(state.dists[k], state.alpha(k), eta[k], log_y).cum_hazard;
    return std::exp(-H);
  };
  MeanSurvival out;
  out.value = adaptive_simpson(S, 0.0, horizon, tolerance);
  out.tail_survival = S(horizon);
  out.truncated = out.tail_survival > 1e-4;
  return out;
}

MeanSurvivalSummary mean_survival(std::span<const Sample> samples, std::span<const double> x,
                                  double horizon, double tolerance) {
  MeanSurvivalSummary out;
  out.values.reserve(samples.size());
  for (const auto& s : samples) {
    const auto m = mean_survival(s.state, x, horizon, tolerance);
    out.values.push_back(m.value);
    out.truncated += m.truncated;
  }
  out.summary = summarize(out.values);
  return out;
}

MeanSurvivalSummary mean_survival_difference(std::span<const Sample> samples,
                                             std::span<const double> x1,
                                             std::span<const double> x0, double horizon,
                                             double tolerance) {
  MeanSurvivalSummary out;
  out.values.reserve(samples.size());
  for (const auto& s : samples) {
    const auto a = mean_survival(s.state, x1, horizon, tolerance);
    const auto b = mean_survival(s.state, x0, horizon, tolerance);
    out.values.push_back(a.value - b.value);
    out.truncated += a.truncated || b.truncated;
  }
  out.summary = summarize(out.values);
  return out;
}

namespace {

template <class F>
std::vector<CurvePoint> pointwise(std::span<const Sample> samples, std::span<const double> grid,
                                  const F& value) {
  std::vector<CurvePoint> out;
  std::vector<double> v(samples.size());
  for (double t : grid) {
    for (std::size_t i = 0; i < samples.size(); ++i) v[i] = value(samples[i].state, t);
    const auto s = summarize(v);
    out.push_back({t, s.mean, s.q025, s.q975});
  }
  return out;
}

}  // namespace

std::vector<CurvePoint> hazard_curve(std::span<const Sample> samples, std::span<const double> x,
                                     std::span<const double> grid) {
  return pointwise(samples, grid,
                   [&](const ModelState& s, double t) { return total_hazard(s, x, t); });
}

std::vector<CurvePoint> survival_curve(std::span<const Sample> samples,
                                       std::span<const double> x, std::span<const double> grid) {
  return pointwise(samples, grid,
                   [&](const ModelState& s, double t) { return survival_at(s, x, t); });
}

std::vector<CurvePoint> hazard_ratio_curve(std::span<const Sample> samples,
                                           std::span<const double> x1,
                                           std::span<const double> x0,
                                           std::span<const double> grid) {
  return pointwise(samples, grid, [&](const ModelState& s, double t) {
    const double den = total_hazard(s, x0, t);
    return den > 0.0 ? total_hazard(s, x1, t) / den : std::numeric_limits<double>::quiet_NaN();
  });
}

std::vector<double> time_grid(double upper, std::size_t points) {
  if (!(upper > 0.0) || points == 0) throw std::invalid_argument("grid needs upper > 0 and points > 0");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = upper * static_cast<double>(i + 1) / static_cast<double>(points);
  return g;
}

double covariate_quantile(const Dataset& data, std::size_t j, double q) {
  if (j >= data.p) throw std::out_of_range("covariate index out of range");
  std::vector<double> col(data.n());
  const bool mapped = !data.centre.empty();
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double v = data.x[i * data.p + j];
    col[i] = mapped ? v * data.scale[j] + data.centre[j] : v;
  }
  return quantile(std::move(col), q);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) len = std::min(len, c.size() / 2);
  if (chains.empty() || len < 2) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(len));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(len), c.end());
  }
  const double n = static_cast<double>(len), m = static_cast<double>(halves.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    const auto s = summarize(h);
    means.push_back(s.mean);
    w += s.sd * s.sd;
  }
  w /= m;
  const auto between = summarize(means);
  const double b = n * between.sd * between.sd;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return w > 0.0 ? std::sqrt(var_plus / w) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace polyhaz
