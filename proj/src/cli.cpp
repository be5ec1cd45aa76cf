#include "polyhaz/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "polyhaz/engine.hpp"
#include "polyhaz/errors.hpp"
#include "polyhaz/io.hpp"
#include "polyhaz/oracle.hpp"
#include "polyhaz/postprocess.hpp"
#include "polyhaz/survdist.hpp"

namespace fs = std::filesystem;

namespace polyhaz {

namespace {

constexpr const char* kVersion = "1.0.0";

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  return f;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string csv_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string data, config, out;
  std::optional<std::size_t> chains;
  std::optional<std::uint64_t> seed;
  bool skeleton = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const SurvivalTable table = read_csv_file(a.data);
  const Dataset data = to_dataset(table);
  FitConfig config = a.config.empty() ? FitConfig{} : read_config_file(a.config);
  if (a.chains) config.sampler.chains = *a.chains;
  if (a.seed) config.sampler.seed = *a.seed;
  if (a.skeleton) config.sampler.emit_skeleton = true;
  config.prior.validate();
  config.sampler.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir);

  const auto results = run_chains(data, config.prior, config.sampler);

  {
    auto f = open_out(dir / "samples.jsonl");
    for (const auto& r : results)
      for (const auto& s : r.samples) {
        Json line = state_to_json(s.state);
        line["chain"] = r.chain;
        f << line.dump() << '\n';
      }
  }
  std::vector<std::string> outputs{"samples.jsonl", "diagnostics.json", "submodels.csv",
                                   "manifest.json"};
  if (config.sampler.emit_skeleton) {
    auto f = open_out(dir / "skeleton.jsonl");
    for (const auto& r : results)
      for (const auto& e : r.skeleton) {
        Json line = state_to_json(e.state);
        line["chain"] = r.chain;
        line["event"] = event_name(e.kind);
        f << line.dump() << '\n';
      }
    outputs.push_back("skeleton.jsonl");
  }

  std::vector<std::map<std::string, double>> occupancy;
  std::vector<Sample> all_samples;
  std::vector<const Diagnostics*> diags;
  Json chains = Json::array();
  Json errors = Json::array();
  for (const auto& r : results) {
    occupancy.push_back(r.occupancy);
    all_samples.insert(all_samples.end(), r.samples.begin(), r.samples.end());
    diags.push_back(&r.diagnostics);
    Json c = diagnostics_to_json(r.diagnostics);
    c["chain"] = r.chain;
    c["occupancy"] = r.occupancy;
    c["error"] = r.error ? Json(*r.error) : Json(nullptr);
    chains.push_back(std::move(c));
    if (r.error) {
      errors.push_back({{"chain", r.chain}, {"message", *r.error}});
      auto f = open_out(dir / ("failed_state_chain" + std::to_string(r.chain) + ".json"));
      f << state_to_json(r.final_state).dump(2) << '\n';
    }
  }
  const auto probs = submodel_probabilities(occupancy);
  const auto snaps = snapshot_probabilities(all_samples);
  {
    Json d{{"overall", diagnostics_to_json(merge_diagnostics(diags))},
           {"chains", chains},
           {"submodels", probs}};
    auto f = open_out(dir / "diagnostics.json");
    f << d.dump(2) << '\n';
  }
  {
    auto f = open_out(dir / "submodels.csv");
    f << "submodel,K,probability,snapshot_probability\n";
    for (const auto& [label, p] : probs) {
      const auto k = std::count(label.begin(), label.end(), '-') + 1;
      const double s = snaps.count(label) ? snaps.at(label) : 0.0;
      f << label << ',' << k << ',' << csv_number(p) << ',' << csv_number(s) << '\n';
    }
  }
  {
    const Json cfg = config_to_json(config);
    std::size_t events = 0;
    for (auto e : data.event) events += e;
    Json m{{"program", "polyhaz"},
           {"version", kVersion},
           {"config", cfg},
           {"config_hash", hex64(fnv1a(cfg.dump()))},
           {"data",
            {{"path", a.data},
             {"n", data.n()},
             {"p", data.p},
             {"events", events},
             {"max_time", data.max_time()},
             {"covariates", data.names}}},
           {"standardization", standardization_to_json(data)},
           {"outputs", outputs},
           {"errors", errors}};
    auto f = open_out(dir / "manifest.json");
    f << m.dump(2) << '\n';
  }

  out << "wrote " << all_samples.size() << " samples from " << results.size() << " chain(s) to "
      << dir.string() << '\n';
  for (const auto& [label, p] : probs)
    out << "  " << std::left << std::setw(12) << label << std::fixed << std::setprecision(4) << p
        << '\n';
  if (!errors.empty()) {
    for (const auto& e : errors) err << "chain " << e["chain"] << ": " << e["message"].get<std::string>() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string gen, out;
  std::size_t n = 0;
  double nu = 1.0, mu = 1.0, censor_rate = 0.0;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.n == 0) throw InputError("--n must be at least 1");
  Rng rng(a.seed);
  Dataset data;
  if (a.gen == "supplement") {
    data = simulate_supplement_data(a.n, rng);
  } else if (a.gen == "weibull" || a.gen == "loglogistic") {
    if (!(a.nu > 0.0) || !(a.mu > 0.0)) throw InputError("--nu and --mu must be positive");
    if (a.censor_rate < 0.0) throw InputError("--censor-rate must be non-negative");
    Subhazard s;
    s.kind = parse_kind(a.gen);
    s.alpha = std::log(a.nu);
    s.beta0 = std::log(a.mu);
    data = simulate_polyhazard(PolyhazardSimulation{{s}, 0, a.censor_rate}, a.n, rng);
  } else {
    throw InputError("unknown generator '" + a.gen + "' (expected supplement, weibull or loglogistic)");
  }
  const SurvivalTable table = to_table(data);
  if (a.out.empty() || a.out == "-") {
    write_csv(out, table);
  } else {
    auto f = open_out(a.out);
    write_csv(f, table);
  }
  return kExitOk;
}

// ---- summarize -------------------------------------------------------------

struct SummarizeArgs {
  std::string run, profile, contrast, out;
  std::optional<double> horizon;
  double burn_in = 0.0;
  std::size_t max_samples = 4000;
  std::size_t grid_points = 100;
};

struct Profile {
  std::string label;
  std::vector<double> original;
  std::vector<double> model;
};

Profile load_profile(const std::string& path, const Json& manifest, const std::string& fallback) {
  Json j = read_json_file(path);
  Profile p;
  p.label = fallback;
  if (j.contains("label")) p.label = j.at("label").get<std::string>();
  const Json values = j.contains("covariates") ? j.at("covariates") : j;
  const auto& std_cols = manifest.at("standardization");
  for (const auto& col : std_cols) {
    const std::string name = col.at("name").get<std::string>();
    const double centre = col.at("centre").get<double>();
    const double scale = col.at("scale").get<double>();
    const double v = values.contains(name) ? values.at(name).get<double>() : centre;
    p.original.push_back(v);
    p.model.push_back((v - centre) / scale);
  }
  for (const auto& [key, value] : values.items()) {
    if (key == "label") continue;
    const bool known = std::any_of(std_cols.begin(), std_cols.end(),
                                   [&](const Json& c) { return c.at("name") == key; });
    if (!known) throw InputError("profile '" + path + "' names unknown covariate '" + key + "'");
  }
  return p;
}

Json summary_json(const Summary& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd},     {"q2.5", s.q025}, {"q25", s.q25},
              {"q50", s.q50},   {"q75", s.q75},   {"q97.5", s.q975}, {"n", s.n}};
}

void write_curve(std::ostream& f, const std::string& label, const std::vector<CurvePoint>& c) {
  for (const auto& p : c)
    f << label << ',' << csv_number(p.time) << ',' << csv_number(p.mean) << ','
      << csv_number(p.lower) << ',' << csv_number(p.upper) << '\n';
}

int cmd_summarize(const SummarizeArgs& a, std::ostream& out) {
  const fs::path run(a.run);
  const Json manifest = read_json_file(run / "manifest.json");
  std::ifstream sf(run / "samples.jsonl");
  if (!sf) throw InputError("missing file '" + (run / "samples.jsonl").string() + "'");
  if (!fs::exists(run / "submodels.csv"))
    throw InputError("missing file '" + (run / "submodels.csv").string() + "'");
  const Json diagnostics = read_json_file(run / "diagnostics.json");

  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(sf, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw InputError("samples.jsonl is not valid JSON", line_no);
    }
    ModelState s = state_from_json(j);
    if (s.clock < a.burn_in) continue;
    samples.push_back({s.clock, apply_ordering(s)});
  }
  if (samples.empty()) throw InputError("no samples left after burn-in");
  if (a.max_samples > 0 && samples.size() > a.max_samples) {
    std::vector<Sample> kept;
    const double step = static_cast<double>(samples.size()) / static_cast<double>(a.max_samples);
    for (std::size_t i = 0; i < a.max_samples; ++i)
      kept.push_back(samples[static_cast<std::size_t>(static_cast<double>(i) * step)]);
    samples = std::move(kept);
  }

  const double max_time = manifest.at("data").at("max_time").get<double>();
  const double horizon = a.horizon.value_or(10.0 * max_time);
  if (!(horizon > 0.0)) throw InputError("--horizon must be positive");
  const Profile profile = load_profile(a.profile, manifest, "profile");
  std::optional<Profile> contrast;
  if (!a.contrast.empty()) contrast = load_profile(a.contrast, manifest, "contrast");

  const fs::path dir = a.out.empty() ? run : fs::path(a.out);
  fs::create_directories(dir);
  const auto grid = time_grid(max_time, a.grid_points);

  Json summary;
  summary["horizon"] = horizon;
  summary["samples_used"] = samples.size();
  summary["submodels"] = diagnostics.at("submodels");
  summary["submodels_snapshot"] = snapshot_probabilities(samples);

  auto profile_block = [&](const Profile& p) {
    const auto m = mean_survival(samples, p.model, horizon);
    return Json{{"label", p.label},
                {"covariates", p.original},
                {"mean_survival", summary_json(m.summary)},
                {"truncated", m.truncated}};
  };
  summary["profile"] = profile_block(profile);

  {
    auto f = open_out(dir / "hazard_curve.csv");
    f << "profile,time,mean,lower,upper\n";
    write_curve(f, profile.label, hazard_curve(samples, profile.model, grid));
    if (contrast) write_curve(f, contrast->label, hazard_curve(samples, contrast->model, grid));
  }
  {
    auto f = open_out(dir / "survival_curve.csv");
    f << "profile,time,mean,lower,upper\n";
    write_curve(f, profile.label, survival_curve(samples, profile.model, grid));
    if (contrast) write_curve(f, contrast->label, survival_curve(samples, contrast->model, grid));
  }
  if (contrast) {
    summary["contrast"] = profile_block(*contrast);
    const auto d = mean_survival_difference(samples, profile.model, contrast->model, horizon);
    summary["difference"] = {{"mean_survival", summary_json(d.summary)}, {"truncated", d.truncated}};
    auto f = open_out(dir / "hazard_ratio.csv");
    f << "profile,time,mean,lower,upper\n";
    write_curve(f, profile.label + "/" + contrast->label,
                hazard_ratio_curve(samples, profile.model, contrast->model, grid));
  }

  // Parameter summaries for the most probable submodel.
  std::string dominant;
  double best = -1.0;
  for (const auto& [label, p] : diagnostics.at("submodels").items())
    if (p.get<double>() > best) {
      best = p.get<double>();
      dominant = label;
    }
  Json params = Json::array();
  std::vector<const ModelState*> in_dominant;
  for (const auto& s : samples)
    if (submodel_label(s.state) == dominant) in_dominant.push_back(&s.state);
  if (!in_dominant.empty()) {
    const auto& first = *in_dominant.front();
    for (std::size_t k = 0; k < first.K(); ++k) {
      std::vector<double> nu, mu;
      std::vector<std::vector<double>> beta(first.p);
      std::vector<double> incl(first.p, 0.0);
      for (const auto* s : in_dominant) {
        nu.push_back(s->nu(k));
        mu.push_back(std::exp(s->beta0(k)));
        for (std::size_t j = 0; j < s->p; ++j) {
          beta[j].push_back(s->beta(k, j));
          incl[j] += s->included(k, j);
        }
      }
      Json sub{{"kind", std::string(long_name(first.dists[k]))},
               {"nu", summary_json(summarize(nu))},
               {"mu", summary_json(summarize(mu))}};
      Json coefs = Json::array();
      for (std::size_t j = 0; j < first.p; ++j)
        coefs.push_back({{"covariate", manifest.at("standardization").at(j).at("name")},
                         {"beta", summary_json(summarize(beta[j]))},
                         {"inclusion", incl[j] / static_cast<double>(in_dominant.size())}});
      sub["coefficients"] = coefs;
      params.push_back(sub);
    }
  }
  summary["dominant_submodel"] = {{"label", dominant}, {"probability", best}, {"subhazards", params}};

  {
    auto f = open_out(dir / "summary.json");
    f << summary.dump(2) << '\n';
  }

  const auto& ms = summary["profile"]["mean_survival"];
  out << std::fixed << std::setprecision(4);
  out << "mean survival (" << profile.label << "): " << ms["mean"].get<double>() << " ["
      << ms["q2.5"].get<double>() << ", " << ms["q97.5"].get<double>() << "]\n";
  if (contrast) {
    const auto& cs = summary["contrast"]["mean_survival"];
    const auto& ds = summary["difference"]["mean_survival"];
    out << "mean survival (" << contrast->label << "): " << cs["mean"].get<double>() << " ["
        << cs["q2.5"].get<double>() << ", " << cs["q97.5"].get<double>() << "]\n";
    out << "difference: " << ds["mean"].get<double>() << " [" << ds["q2.5"].get<double>() << ", "
        << ds["q97.5"].get<double>() << "]\n";
  }
  out << "submodel probabilities:\n";
  for (const auto& [label, p] : diagnostics.at("submodels").items())
    out << "  " << std::left << std::setw(12) << label << p.get<double>() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous-time sampler for Bayesian polyhazard survival models", "polyhaz"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Sample the posterior for a survival dataset");
  f->add_option("--data", fit.data, "CSV with header time,event,x1..xp")->required();
  f->add_option("--config", fit.config, "JSON configuration");
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_option("--chains", fit.chains, "Number of chains");
  f->add_option("--seed", fit.seed, "Random seed");
  f->add_flag("--skeleton", fit.skeleton, "Also write the event skeleton");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write a simulated dataset as CSV");
  s->add_option("--gen", sim.gen, "supplement, weibull or loglogistic")->required();
  s->add_option("--n", sim.n, "Number of rows")->required();
  s->add_option("--nu", sim.nu, "Shape (weibull/loglogistic)");
  s->add_option("--mu", sim.mu, "Location (weibull/loglogistic)");
  s->add_option("--censor-rate", sim.censor_rate, "Exponential censoring rate, 0 for none");
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("--out", sim.out, "Output CSV (default stdout)");

  SummarizeArgs sum;
  auto* m = app.add_subcommand("summarize", "Posterior summaries from a fit directory");
  m->add_option("--run", sum.run, "Fit output directory")->required();
  m->add_option("--profile", sum.profile, "JSON covariate profile (original scale)")->required();
  m->add_option("--contrast", sum.contrast, "JSON covariate profile to compare against");
  m->add_option("--out", sum.out, "Output directory (default: the run directory)");
  m->add_option("--horizon", sum.horizon, "Upper integration limit for mean survival");
  m->add_option("--burn-in", sum.burn_in, "Discard samples before this clock time");
  m->add_option("--max-samples", sum.max_samples, "Thin to at most this many samples (0: all)");
  m->add_option("--grid-points", sum.grid_points, "Points on the curve grid");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    return kExitInput;
  }

  try {
    if (f->parsed()) return cmd_fit(fit, out, err);
    if (s->parsed()) return cmd_simulate(sim, out);
    if (m->parsed()) return cmd_summarize(sum, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace polyhaz
