#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyhaz/engine.hpp"
#include "polyhaz/model.hpp"

namespace polyhaz {

using Json = nlohmann::json;

/// Raw survival table as read from CSV, covariates on the original scale.
struct SurvivalTable {
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  std::vector<double> x;  // row-major
  std::vector<std::string> names;
  std::size_t p() const { return names.size(); }
  std::size_t n() const { return time.size(); }
};

/// Header `time,event,<covariates...>`; lines starting with '#' and blank
/// lines are skipped. Errors carry the 1-based line number.
SurvivalTable read_csv(std::istream& in);
SurvivalTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const SurvivalTable& table);
SurvivalTable to_table(const Dataset& data);  // original scale

/// Standardised dataset ready for sampling.
Dataset to_dataset(const SurvivalTable& table);

struct FitConfig {
  PriorConfig prior;
  SamplerConfig sampler;
};

/// Reads a config object; every key is optional and unknown keys are errors.
/// The sampler may give per-type rates under "rates" or a combined
/// "jump_rate" split by "jump_probabilities".
FitConfig parse_config(const Json& j);
FitConfig read_config_file(const std::string& path);
/// Fully resolved configuration, defaults included.
Json config_to_json(const FitConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

Json state_to_json(const ModelState& state);
ModelState state_from_json(const Json& j);

Json diagnostics_to_json(const Diagnostics& d, std::size_t max_trace = 200);
Diagnostics diagnostics_from_json(const Json& j);
/// Counters summed over chains (trace and t* taken from the first chain).
Diagnostics merge_diagnostics(const std::vector<const Diagnostics*>& parts);

/// Acceptance as a percentage with two decimals, e.g. "4.90%"; null when undefined.
Json percent(const MoveStats& m);

Json standardization_to_json(const Dataset& data);

}  // namespace polyhaz
