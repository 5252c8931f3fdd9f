#pragma once

// JSON forms of library values. Instances store cubes as [ix, iy] and tubes
// as [slope, intercept, orientation] with orientation 0 (y = ax + b) or
// 1 (x = ay + b), all at the configuration's scale.

#include <stdexcept>
#include <string>

#include "incidence/generators.hpp"
#include "incidence/incidence.hpp"
#include "incidence/multiscale.hpp"
#include "incidence/projections.hpp"
#include "incidence/spread.hpp"
#include "json.hpp"

namespace lab {

using json = nlohmann::json;

/// Malformed input; the CLI maps it to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const incidence::Configuration& cfg);
/// Strict: unknown keys, wrong scales and bad shapes throw ConfigError.
incidence::Configuration configuration_from_json(const json& j);

json to_json(const incidence::SpreadReport& r);
json to_json(const incidence::BoundReport& r);
json to_json(const incidence::LedgerEntry& e);
json to_json(const incidence::ClauseCheck& c);
json to_json(const incidence::Direction& d);

}  // namespace lab
