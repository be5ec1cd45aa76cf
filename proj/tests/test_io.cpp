#include <doctest.h>

#include <sstream>
#include <string>

#include "polyhaz/errors.hpp"
#include "polyhaz/io.hpp"

using namespace polyhaz;

namespace {

std::string rows(std::size_t count, double start = 0.5) {
  std::string s;
  for (std::size_t i = 0; i < count; ++i)
    s += std::to_string(start + 0.1 * static_cast<double>(i)) + "," + (i % 2 ? "1" : "0") + "," +
         std::to_string(i) + "\n";
  return s;
}

SurvivalTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("csv reader accepts comments, blank lines and a BOM") {
  const std::string text = "\xEF\xBB\xBF# comment\ntime,event,age\n\n1.5,1,40\n# mid\n2.5,0,50\n";
  const auto t = parse(text);
  REQUIRE(t.n() == 2);
  CHECK(t.names == std::vector<std::string>{"age"});
  CHECK(t.time[1] == 2.5);
  CHECK(t.event[0] == 1);
  CHECK(t.x[1] == 50.0);
}

TEST_CASE("csv columns may come in any order") {
  const auto t = parse("x1,event,time\n3,1,0.5\n4,0,0.7\n");
  CHECK(t.time == std::vector<double>{0.5, 0.7});
  CHECK(t.x == std::vector<double>{3.0, 4.0});
}

TEST_CASE("csv errors name the offending line") {
  // Header on line 1, data rows on lines 2..16, bad row on line 17.
  const std::string bad = "time,event,x1\n" + rows(15) + "-0.4,1,0\n" + rows(3);
  const std::string msg = error_of(bad);
  CHECK(msg.find("line 17") != std::string::npos);
  CHECK(msg.find("positive") != std::string::npos);

  CHECK(error_of("time,event\n1,1\nabc,0\n").find("line 3") != std::string::npos);
  CHECK(error_of("time,event\n1,2\n2,0\n").find("event must be 0 or 1") != std::string::npos);
  CHECK(error_of("time,event,x\n1,1\n2,0,1\n").find("line 2") != std::string::npos);
  CHECK(error_of("time,event,x\n1,1,z\n2,0,1\n").find("covariate") != std::string::npos);
  CHECK(error_of("time,event\n1,1\n").find("two data rows") != std::string::npos);
  CHECK(error_of("").find("header") != std::string::npos);
}

TEST_CASE("missing or duplicated columns are schema errors") {
  CHECK(error_of("time,x1\n1,0\n2,1\n").find("schema error: missing column 'event'") !=
        std::string::npos);
  CHECK(error_of("event,x1\n1,0\n0,1\n").find("missing column 'time'") != std::string::npos);
  CHECK(error_of("time,event,x,x\n1,1,0,0\n2,0,1,1\n").find("duplicate") != std::string::npos);
}

TEST_CASE("csv write then read is lossless") {
  const auto t = parse("time,event,a,b\n0.123456789012345,1,-1e-7,3\n7,0,2.5,1e10\n");
  std::ostringstream out;
  write_csv(out, t);
  const auto back = parse(out.str());
  CHECK(back.time == t.time);
  CHECK(back.event == t.event);
  CHECK(back.x == t.x);
  CHECK(back.names == t.names);
}

TEST_CASE("standardisation centres continuous and binary columns and maps back") {
  const auto t = parse("time,event,age,arm\n1,1,40,0\n2,0,60,1\n3,1,50,1\n");
  const Dataset d = to_dataset(t);
  REQUIRE(d.p == 2);
  CHECK(d.centre[0] == doctest::Approx(50.0));
  CHECK(d.scale[0] == doctest::Approx(10.0));
  CHECK(d.binary[1]);
  CHECK(d.scale[1] == 1.0);
  double mean_age = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) mean_age += d.x[i * 2];
  CHECK(mean_age == doctest::Approx(0.0).epsilon(1e-12));
  const auto back = to_table(d);
  for (std::size_t i = 0; i < t.x.size(); ++i) CHECK(back.x[i] == doctest::Approx(t.x[i]));
}

TEST_CASE("config defaults match the model's reference settings") {
  const auto c = parse_config(Json::object());
  CHECK(c.prior.sigma_alpha == 2.0);
  CHECK(c.prior.sigma_beta0 == 5.0);
  CHECK(c.prior.beta_a == 4.0);
  CHECK(c.prior.beta_b == 4.0);
  CHECK(c.prior.xi == 2.0);
  CHECK(c.prior.k_max == 4);
  const Json j = config_to_json(c);
  CHECK(j["prior"]["k_max"] == 4);
  CHECK(j["sampler"]["lambda0"] == 0.1);
}

TEST_CASE("config round trip and validation") {
  const Json in = Json::parse(R"({
    "prior": {"k_max": 2, "fixed_omega": 0.3, "candidates": ["weibull"]},
    "sampler": {"total_time": 50, "seed": 9, "chains": 3, "balancing": "barker",
                "swap": "independent", "unstick": "prior_odds",
                "jump_rate": 2.0, "jump_probabilities": {"birth_death": 0.6, "swap": 0.3, "hyper": 0.1}}
  })");
  const auto c = parse_config(in);
  CHECK(c.prior.k_max == 2);
  CHECK(c.prior.fixed_omega.value() == 0.3);
  CHECK(c.sampler.chains == 3);
  CHECK(c.sampler.balancing == Balancing::Barker);
  CHECK(c.sampler.swap_kind == SwapKind::Independent);
  CHECK(c.sampler.rates.birth_death == doctest::Approx(1.2));
  CHECK(c.sampler.rates.swap == doctest::Approx(0.6));
  const Json out = config_to_json(c);
  CHECK(config_to_json(parse_config(out)) == out);
  CHECK(hex64(fnv1a(out.dump())) == hex64(fnv1a(config_to_json(parse_config(out)).dump())));

  CHECK_THROWS_AS(parse_config(Json::parse(R"({"sampler": {"bogus": 1}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"extra": {}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"sampler": {"balancing": "greedy"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"sampler": {"jump_rate": 1,
      "rates": {"swap": 1}}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"sampler": {"jump_rate": 1,
      "jump_probabilities": {"birth_death": 0.5, "swap": 0.6, "hyper": 0.1}}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"prior": {"k_max": "four"}})")), ConfigError);
}

TEST_CASE("fnv1a matches published vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
}

TEST_CASE("state records round trip exactly") {
  ModelState s;
  s.p = 2;
  s.dists = {DistKind::Weibull, DistKind::LogLogistic};
  s.theta = {0.1, -0.2, 0.3, 1.0 / 3.0, 0.5, 0.0, 0.7, -0.9};
  s.velocity = {1, -1, 1, -1, 1, 0, 1, 1};
  s.gamma = {1, 0, 1, 1};
  s.omega = 0.25;
  s.z1 = -0.4;
  s.z2 = 2.5;
  s.clock = 12.75;
  const Json j = state_to_json(s);
  CHECK(j["label"] == "W-L");
  CHECK(j["dists"][1] == "loglogistic");
  const ModelState back = state_from_json(Json::parse(j.dump()));
  CHECK(back.theta == s.theta);
  CHECK(back.velocity == s.velocity);
  CHECK(back.gamma == s.gamma);
  CHECK(back.dists == s.dists);
  CHECK(back.clock == s.clock);
  CHECK(back.sigma_beta() == s.sigma_beta());
  Json broken = j;
  broken["theta"].erase(0);
  CHECK_THROWS_AS(state_from_json(broken), InputError);
}

TEST_CASE("diagnostics report acceptance as percentages and round trip") {
  Diagnostics d;
  d.jumps.birth = {1000, 49};
  d.jumps.death = {900, 50};
  d.jumps.swap = {2000, 883};
  d.thinning = {500, 300, 2, 1.01};
  d.bounds.linear = 40;
  d.bounds.constant = 10;
  d.flips = 300;
  d.total_time = 100.0;
  d.t_star_trace = {{{1.0, 0.5}}, {{2.0, 0.4}}};
  d.final_t_star = 0.4;
  const Json j = diagnostics_to_json(d);
  CHECK(j["acceptance"]["birth"] == "4.90%");
  CHECK(j["acceptance"]["swap"] == "44.15%");
  CHECK(j["thinning"]["exceedances"] == 2);
  CHECK(j["thinning"]["exceedance_fraction"].get<double>() == doctest::Approx(2.0 / 500.0));
  CHECK(percent(MoveStats{}).is_null());

  const Diagnostics back = diagnostics_from_json(Json::parse(j.dump()));
  CHECK(diagnostics_to_json(back) == j);

  const Diagnostics merged = merge_diagnostics({&d, &d});
  CHECK(merged.jumps.swap.attempts == 4000);
  CHECK(merged.thinning.exceedances == 4);
  CHECK(merged.total_time == 200.0);
}
