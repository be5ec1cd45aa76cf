#include "polyhaz/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <set>
#include <sstream>

#include "polyhaz/errors.hpp"
#include "polyhaz/survdist.hpp"

namespace polyhaz {

// ---- CSV -------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

SurvivalTable read_csv(std::istream& in) {
  SurvivalTable t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t time_col = 0, event_col = 0;
  std::vector<std::size_t> cov_cols;
  std::size_t width = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view);

    if (!have_header) {
      have_header = true;
      width = fields.size();
      std::set<std::string_view> seen;
      bool has_time = false, has_event = false;
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c].empty()) throw InputError("empty column name in header", line_no);
        if (!seen.insert(fields[c]).second)
          throw InputError("duplicate column '" + std::string(fields[c]) + "'", line_no);
        if (fields[c] == "time") {
          time_col = c;
          has_time = true;
        } else if (fields[c] == "event") {
          event_col = c;
          has_event = true;
        } else {
          cov_cols.push_back(c);
          t.names.emplace_back(fields[c]);
        }
      }
      if (!has_time) throw InputError("schema error: missing column 'time'", line_no);
      if (!has_event) throw InputError("schema error: missing column 'event'", line_no);
      continue;
    }

    if (fields.size() != width)
      throw InputError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    double time = 0.0;
    if (!parse_double(fields[time_col], time))
      throw InputError("time '" + std::string(fields[time_col]) + "' is not a number", line_no);
    if (!(time > 0.0)) throw InputError("time must be positive", line_no);
    double event = 0.0;
    if (!parse_double(fields[event_col], event) || (event != 0.0 && event != 1.0))
      throw InputError("event must be 0 or 1, found '" + std::string(fields[event_col]) + "'",
                       line_no);
    t.time.push_back(time);
    t.event.push_back(static_cast<std::uint8_t>(event));
    for (std::size_t c : cov_cols) {
      double v = 0.0;
      if (!parse_double(fields[c], v))
        throw InputError("covariate '" + std::string(t.names[t.x.size() % cov_cols.size()]) +
                             "' value '" + std::string(fields[c]) + "' is not a number",
                         line_no);
      t.x.push_back(v);
    }
  }
  if (!have_header) throw InputError("missing header line");
  if (t.n() < 2) throw InputError("at least two data rows are required");
  return t;
}

SurvivalTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const SurvivalTable& table) {
  out << "time,event";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  char buf[32];
  auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
  };
  const std::size_t p = table.p();
  for (std::size_t i = 0; i < table.n(); ++i) {
    out << num(table.time[i]) << ',' << int(table.event[i]);
    for (std::size_t j = 0; j < p; ++j) out << ',' << num(table.x[i * p + j]);
    out << '\n';
  }
}

SurvivalTable to_table(const Dataset& data) {
  SurvivalTable t;
  t.time = data.time;
  t.event = data.event;
  t.names = data.names;
  t.x.resize(data.x.size());
  for (std::size_t i = 0; i < data.n(); ++i)
    for (std::size_t j = 0; j < data.p; ++j)
      t.x[i * data.p + j] = data.x[i * data.p + j] * data.scale[j] + data.centre[j];
  return t;
}

Dataset to_dataset(const SurvivalTable& table) {
  return standardize(table.time, table.event, table.x, table.p(), table.names);
}

// ---- Configuration ---------------------------------------------------------

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

template <class T>
void read_optional(const Json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read(j, key, v);
  out = v;
}

Balancing parse_balancing(const std::string& s) {
  if (s == "metropolis") return Balancing::Metropolis;
  if (s == "barker") return Balancing::Barker;
  throw ConfigError("unknown balancing function '" + s + "'");
}
const char* balancing_name(Balancing b) { return b == Balancing::Metropolis ? "metropolis" : "barker"; }

SwapKind parse_swap(const std::string& s) {
  if (s == "median") return SwapKind::MedianMatch;
  if (s == "independent") return SwapKind::Independent;
  throw ConfigError("unknown swap proposal '" + s + "'");
}
const char* swap_name(SwapKind k) { return k == SwapKind::MedianMatch ? "median" : "independent"; }

UnstickConvention parse_unstick(const std::string& s) {
  if (s == "slab_density") return UnstickConvention::SlabDensity;
  if (s == "prior_odds") return UnstickConvention::PriorOdds;
  if (s == "inverse_odds") return UnstickConvention::InverseOdds;
  throw ConfigError("unknown unstick convention '" + s + "'");
}
const char* unstick_name(UnstickConvention u) {
  switch (u) {
    case UnstickConvention::SlabDensity: return "slab_density";
    case UnstickConvention::PriorOdds: return "prior_odds";
    case UnstickConvention::InverseOdds: return "inverse_odds";
  }
  return "";
}

}  // namespace

FitConfig parse_config(const Json& j) {
  FitConfig c;
  reject_unknown(j, {"prior", "sampler"}, "config");

  if (j.contains("prior")) {
    const Json& p = j.at("prior");
    reject_unknown(p,
                   {"sigma_alpha", "sigma_beta0", "beta_a", "beta_b", "xi", "k_max",
                    "fixed_omega", "fixed_sigma_beta", "candidates"},
                   "prior");
    read(p, "sigma_alpha", c.prior.sigma_alpha);
    read(p, "sigma_beta0", c.prior.sigma_beta0);
    read(p, "beta_a", c.prior.beta_a);
    read(p, "beta_b", c.prior.beta_b);
    read(p, "xi", c.prior.xi);
    read(p, "k_max", c.prior.k_max);
    read_optional(p, "fixed_omega", c.prior.fixed_omega);
    read_optional(p, "fixed_sigma_beta", c.prior.fixed_sigma_beta);
    if (p.contains("candidates")) {
      std::vector<std::string> names;
      read(p, "candidates", names);
      c.prior.candidates.clear();
      for (const auto& n : names) {
        try {
          c.prior.candidates.push_back(parse_kind(n));
        } catch (const std::exception&) {
          throw ConfigError("unknown distribution '" + n + "'");
        }
      }
    }
  }

  if (j.contains("sampler")) {
    const Json& s = j.at("sampler");
    reject_unknown(s,
                   {"total_time", "sample_rate", "lambda0", "seed", "chains", "emit_skeleton",
                    "balancing", "swap", "unstick", "adapt_window", "initial_t_star",
                    "adapt_warmup", "sigma_target_acceptance", "rates", "jump_rate",
                    "jump_probabilities", "bound"},
                   "sampler");
    auto& sc = c.sampler;
    read(s, "total_time", sc.total_time);
    read(s, "sample_rate", sc.sample_rate);
    read(s, "lambda0", sc.bound.offset);
    read(s, "seed", sc.seed);
    read(s, "chains", sc.chains);
    read(s, "emit_skeleton", sc.emit_skeleton);
    read(s, "adapt_window", sc.adapt_window);
    read(s, "initial_t_star", sc.initial_t_star);
    read(s, "adapt_warmup", sc.adapt_warmup);
    read(s, "sigma_target_acceptance", sc.sigma_target_acceptance);
    std::string name;
    if (s.contains("balancing")) {
      read(s, "balancing", name);
      sc.balancing = parse_balancing(name);
    }
    if (s.contains("swap")) {
      read(s, "swap", name);
      sc.swap_kind = parse_swap(name);
    }
    if (s.contains("unstick")) {
      read(s, "unstick", name);
      sc.unstick = parse_unstick(name);
    }
    if (s.contains("rates") && s.contains("jump_rate"))
      throw ConfigError("give either 'rates' or 'jump_rate', not both");
    if (s.contains("rates")) {
      const Json& r = s.at("rates");
      reject_unknown(r, {"birth_death", "swap", "hyper", "birth_death_scale", "swap_scale"},
                     "sampler.rates");
      read(r, "birth_death", sc.rates.birth_death);
      read(r, "swap", sc.rates.swap);
      read(r, "hyper", sc.rates.hyper);
      read_optional(r, "birth_death_scale", sc.rates.birth_death_scale);
      read_optional(r, "swap_scale", sc.rates.swap_scale);
    }
    if (s.contains("jump_rate")) {
      double total = 0.0;
      read(s, "jump_rate", total);
      double pb = 0.5, ps = 0.4, ph = 0.1;
      if (s.contains("jump_probabilities")) {
        const Json& q = s.at("jump_probabilities");
        reject_unknown(q, {"birth_death", "swap", "hyper"}, "sampler.jump_probabilities");
        read(q, "birth_death", pb);
        read(q, "swap", ps);
        read(q, "hyper", ph);
      }
      if (pb < 0 || ps < 0 || ph < 0 || std::abs(pb + ps + ph - 1.0) > 1e-9)
        throw ConfigError("jump_probabilities must be non-negative and sum to 1");
      sc.rates.birth_death = total * pb;
      sc.rates.swap = total * ps;
      sc.rates.hyper = total * ph;
    } else if (s.contains("jump_probabilities")) {
      throw ConfigError("jump_probabilities needs jump_rate");
    }
    if (s.contains("bound")) {
      const Json& b = s.at("bound");
      reject_unknown(b,
                     {"min_length", "max_length_factor", "brent_max_iterations",
                      "brent_relative_tolerance"},
                     "sampler.bound");
      read(b, "min_length", sc.bound.min_length);
      read(b, "max_length_factor", sc.bound.max_length_factor);
      read(b, "brent_max_iterations", sc.bound.brent_max_iterations);
      read(b, "brent_relative_tolerance", sc.bound.brent_relative_tolerance);
    }
  }
  c.prior.validate();
  c.sampler.validate();
  return c;
}

FitConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

Json config_to_json(const FitConfig& c) {
  const auto& p = c.prior;
  const auto& s = c.sampler;
  Json candidates = Json::array();
  for (auto k : p.candidates) candidates.push_back(std::string(long_name(k)));
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{
      {"prior",
       {{"sigma_alpha", p.sigma_alpha},
        {"sigma_beta0", p.sigma_beta0},
        {"beta_a", p.beta_a},
        {"beta_b", p.beta_b},
        {"xi", p.xi},
        {"k_max", p.k_max},
        {"fixed_omega", opt(p.fixed_omega)},
        {"fixed_sigma_beta", opt(p.fixed_sigma_beta)},
        {"candidates", candidates}}},
      {"sampler",
       {{"total_time", s.total_time},
        {"sample_rate", s.sample_rate},
        {"lambda0", s.bound.offset},
        {"seed", s.seed},
        {"chains", s.chains},
        {"emit_skeleton", s.emit_skeleton},
        {"balancing", balancing_name(s.balancing)},
        {"swap", swap_name(s.swap_kind)},
        {"unstick", unstick_name(s.unstick)},
        {"adapt_window", s.adapt_window},
        {"initial_t_star", s.initial_t_star},
        {"adapt_warmup", s.adapt_warmup},
        {"sigma_target_acceptance", s.sigma_target_acceptance},
        {"rates",
         {{"birth_death", s.rates.birth_death},
          {"swap", s.rates.swap},
          {"hyper", s.rates.hyper},
          {"birth_death_scale", opt(s.rates.birth_death_scale)},
          {"swap_scale", opt(s.rates.swap_scale)}}},
        {"bound",
         {{"min_length", s.bound.min_length},
          {"max_length_factor", s.bound.max_length_factor},
          {"brent_max_iterations", s.bound.brent_max_iterations},
          {"brent_relative_tolerance", s.bound.brent_relative_tolerance}}}}}};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- States ----------------------------------------------------------------

Json state_to_json(const ModelState& s) {
  Json dists = Json::array();
  for (auto k : s.dists) dists.push_back(std::string(long_name(k)));
  std::vector<int> velocity(s.velocity.begin(), s.velocity.end());
  std::vector<int> gamma(s.gamma.begin(), s.gamma.end());
  return Json{{"clock", s.clock},       {"label", submodel_label(s)}, {"K", s.K()},
              {"p", s.p},               {"dists", dists},             {"theta", s.theta},
              {"velocity", velocity},   {"gamma", gamma},             {"omega", s.omega},
              {"z1", s.z1},             {"z2", s.z2},                 {"sigma_beta", s.sigma_beta()}};
}

ModelState state_from_json(const Json& j) {
  try {
    ModelState s;
    s.clock = j.at("clock").get<double>();
    s.p = j.at("p").get<std::size_t>();
    for (const auto& d : j.at("dists")) s.dists.push_back(parse_kind(d.get<std::string>()));
    s.theta = j.at("theta").get<std::vector<double>>();
    for (int v : j.at("velocity").get<std::vector<int>>()) s.velocity.push_back(static_cast<Velocity>(v));
    for (int g : j.at("gamma").get<std::vector<int>>()) s.gamma.push_back(static_cast<std::uint8_t>(g));
    s.omega = j.at("omega").get<double>();
    s.z1 = j.at("z1").get<double>();
    s.z2 = j.at("z2").get<double>();
    if (s.theta.size() != s.K() * s.stride() || s.velocity.size() != s.theta.size() ||
        s.gamma.size() != s.K() * s.p)
      throw InputError("state record has inconsistent sizes");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed state record: ") + e.what());
  }
}

// ---- Diagnostics -----------------------------------------------------------

Json percent(const MoveStats& m) {
  const auto r = m.rate();
  if (!r) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *r);
  return std::string(buf);
}

namespace {

Json move_json(const MoveStats& m) {
  const auto r = m.rate();
  return Json{{"attempts", m.attempts}, {"accepted", m.accepted},
              {"rate", r ? Json(*r) : Json(nullptr)}};
}

MoveStats move_from(const Json& j) {
  return MoveStats{j.at("attempts").get<std::size_t>(), j.at("accepted").get<std::size_t>()};
}

}  // namespace

Json diagnostics_to_json(const Diagnostics& d, std::size_t max_trace) {
  Json trace = Json::array();
  const std::size_t n = d.t_star_trace.size();
  const std::size_t stride = max_trace > 0 && n > max_trace ? (n + max_trace - 1) / max_trace : 1;
  for (std::size_t i = 0; i < n; i += stride) trace.push_back({d.t_star_trace[i][0], d.t_star_trace[i][1]});
  return Json{
      {"total_time", d.total_time},
      {"acceptance",
       {{"birth", percent(d.jumps.birth)},
        {"death", percent(d.jumps.death)},
        {"swap", percent(d.jumps.swap)},
        {"sigma", percent(d.jumps.sigma)}}},
      {"moves",
       {{"birth", move_json(d.jumps.birth)},
        {"death", move_json(d.jumps.death)},
        {"swap", move_json(d.jumps.swap)},
        {"sigma", move_json(d.jumps.sigma)},
        {"rejected_nonfinite", d.jumps.rejected_nonfinite}}},
      {"events",
       {{"flip", d.flips},
        {"stick", d.sticks},
        {"unstick", d.unsticks},
        {"segment_end", d.segment_ends},
        {"sample", d.sample_fired},
        {"hyper", d.hyper_fired},
        {"swap_clock", d.swap_fired},
        {"birth_death_clock", d.birth_death_fired},
        {"unstick_clock", d.unstick_fired}}},
      {"thinning",
       {{"proposals", d.thinning.proposals},
        {"accepted", d.thinning.accepted},
        {"exceedances", d.thinning.exceedances},
        {"exceedance_fraction", d.exceedance_fraction()},
        {"max_exceedance_ratio", d.thinning.max_exceedance_ratio}}},
      {"bounds",
       {{"linear", d.bounds.linear},
        {"constant", d.bounds.constant},
        {"brent", d.bounds.brent},
        {"brent_fallbacks", d.bounds.brent_fallbacks},
        {"segments", d.bounds.segments()},
        {"total_length", d.bounds.total_length},
        {"mean_segment_length", d.mean_segment_length()},
        {"rate_evaluations", d.rate_evaluations}}},
      {"t_star", {{"final", d.final_t_star}, {"trace", trace}}}};
}

Diagnostics diagnostics_from_json(const Json& j) {
  try {
    Diagnostics d;
    d.total_time = j.at("total_time").get<double>();
    const auto& m = j.at("moves");
    d.jumps.birth = move_from(m.at("birth"));
    d.jumps.death = move_from(m.at("death"));
    d.jumps.swap = move_from(m.at("swap"));
    d.jumps.sigma = move_from(m.at("sigma"));
    d.jumps.rejected_nonfinite = m.at("rejected_nonfinite").get<std::size_t>();
    const auto& e = j.at("events");
    d.flips = e.at("flip").get<std::size_t>();
    d.sticks = e.at("stick").get<std::size_t>();
    d.unsticks = e.at("unstick").get<std::size_t>();
    d.segment_ends = e.at("segment_end").get<std::size_t>();
    d.sample_fired = e.at("sample").get<std::size_t>();
    d.hyper_fired = e.at("hyper").get<std::size_t>();
    d.swap_fired = e.at("swap_clock").get<std::size_t>();
    d.birth_death_fired = e.at("birth_death_clock").get<std::size_t>();
    d.unstick_fired = e.at("unstick_clock").get<std::size_t>();
    const auto& t = j.at("thinning");
    d.thinning.proposals = t.at("proposals").get<std::size_t>();
    d.thinning.accepted = t.at("accepted").get<std::size_t>();
    d.thinning.exceedances = t.at("exceedances").get<std::size_t>();
    d.thinning.max_exceedance_ratio = t.at("max_exceedance_ratio").get<double>();
    const auto& b = j.at("bounds");
    d.bounds.linear = b.at("linear").get<std::size_t>();
    d.bounds.constant = b.at("constant").get<std::size_t>();
    d.bounds.brent = b.at("brent").get<std::size_t>();
    d.bounds.brent_fallbacks = b.at("brent_fallbacks").get<std::size_t>();
    d.bounds.total_length = b.at("total_length").get<double>();
    d.rate_evaluations = b.at("rate_evaluations").get<std::size_t>();
    d.final_t_star = j.at("t_star").at("final").get<double>();
    for (const auto& p : j.at("t_star").at("trace"))
      d.t_star_trace.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed diagnostics: ") + e.what());
  }
}

Diagnostics merge_diagnostics(const std::vector<const Diagnostics*>& parts) {
  Diagnostics out;
  if (parts.empty()) return out;
  auto add_move = [](MoveStats& a, const MoveStats& b) {
    a.attempts += b.attempts;
    a.accepted += b.accepted;
  };
  for (const auto* d : parts) {
    out.unstick_fired += d->unstick_fired;
    out.hyper_fired += d->hyper_fired;
    out.swap_fired += d->swap_fired;
    out.birth_death_fired += d->birth_death_fired;
    out.sample_fired += d->sample_fired;
    out.flips += d->flips;
    out.sticks += d->sticks;
    out.unsticks += d->unsticks;
    out.segment_ends += d->segment_ends;
    out.rate_evaluations += d->rate_evaluations;
    out.thinning.proposals += d->thinning.proposals;
    out.thinning.accepted += d->thinning.accepted;
    out.thinning.exceedances += d->thinning.exceedances;
    out.thinning.max_exceedance_ratio =
        std::max(out.thinning.max_exceedance_ratio, d->thinning.max_exceedance_ratio);
    out.bounds.linear += d->bounds.linear;
    out.bounds.constant += d->bounds.constant;
    out.bounds.brent += d->bounds.brent;
    out.bounds.brent_fallbacks += d->bounds.brent_fallbacks;
    out.bounds.total_length += d->bounds.total_length;
    add_move(out.jumps.birth, d->jumps.birth);
    add_move(out.jumps.death, d->jumps.death);
    add_move(out.jumps.swap, d->jumps.swap);
    add_move(out.jumps.sigma, d->jumps.sigma);
    out.jumps.rejected_nonfinite += d->jumps.rejected_nonfinite;
    out.total_time += d->total_time;
  }
  out.final_t_star = parts.front()->final_t_star;
  out.t_star_trace = parts.front()->t_star_trace;
  return out;
}

Json standardization_to_json(const Dataset& data) {
  Json cols = Json::array();
  for (std::size_t j = 0; j < data.p; ++j)
    cols.push_back({{"name", data.names[j]},
                    {"centre", data.centre[j]},
                    {"scale", data.scale[j]},
                    {"binary", static_cast<bool>(data.binary[j])}});
  return cols;
}

}  // namespace polyhaz
