#include "serialize.hpp"

#include <set>

namespace lab {

using namespace incidence;

namespace {

json cube_pair(const Cube& c) { return json::array({c.ix, c.iy}); }

std::int64_t index_at(const json& arr, std::size_t i, const std::string& where) {
  if (!arr.is_array() || i >= arr.size() || !arr[i].is_number_integer()) {
    throw ConfigError(where + ": expected an integer array");
  }
  return arr[i].get<std::int64_t>();
}

}  // namespace

json to_json(const Configuration& cfg) {
  json points = json::array();
  json tubes = json::array();
  for (std::size_t i = 0; i < cfg.points.size(); ++i) {
    points.push_back(cube_pair(cfg.points[i]));
    json fan = json::array();
    for (const auto& t : cfg.tubes_of[i]) {
      fan.push_back(json::array({t.param.ix, t.param.iy, t.orientation == Orientation::alternate ? 1 : 0}));
    }
    tubes.push_back(std::move(fan));
  }
  json out{{"delta_exp", cfg.delta.k}, {"points", std::move(points)}, {"tubes_of", std::move(tubes)}};
  if (cfg.nice) {
    json nice{{"s", cfg.nice->s}, {"c", cfg.nice->c}, {"m", cfg.nice->m}};
    if (cfg.nice->t) nice["t"] = *cfg.nice->t;
    out["nice"] = std::move(nice);
  }
  return out;
}

Configuration configuration_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("instance: expected an object");
  static const std::set<std::string> known{"delta_exp", "points", "tubes_of", "nice"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("instance: unknown field '" + key + "'");
  }
  for (const char* key : {"delta_exp", "points", "tubes_of"}) {
    if (!j.contains(key)) throw ConfigError(std::string("instance: missing field '") + key + "'");
  }
  Configuration cfg;
  if (!j["delta_exp"].is_number_integer()) throw ConfigError("instance: 'delta_exp' must be an integer");
  cfg.delta = Scale{j["delta_exp"].get<int>()};
  if (cfg.delta.k < 0 || cfg.delta.k > 30) throw ConfigError("instance: 'delta_exp' out of range [0, 30]");
  const auto& points = j["points"];
  const auto& tubes = j["tubes_of"];
  if (!points.is_array() || !tubes.is_array() || points.size() != tubes.size()) {
    throw ConfigError("instance: 'points' and 'tubes_of' must be arrays of equal length");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string where = "instance: points[" + std::to_string(i) + "]";
    if (points[i].size() != 2) throw ConfigError(where + ": expected [ix, iy]");
    cfg.points.push_back(Cube{cfg.delta.k, index_at(points[i], 0, where), index_at(points[i], 1, where)});
    std::vector<Tube> fan;
    if (!tubes[i].is_array()) throw ConfigError("instance: tubes_of[" + std::to_string(i) + "] must be an array");
    for (std::size_t n = 0; n < tubes[i].size(); ++n) {
      const auto& t = tubes[i][n];
      const std::string tw = "instance: tubes_of[" + std::to_string(i) + "][" + std::to_string(n) + "]";
      if (t.size() != 3) throw ConfigError(tw + ": expected [slope, intercept, orientation]");
      const auto o = index_at(t, 2, tw);
      if (o != 0 && o != 1) throw ConfigError(tw + ": orientation must be 0 or 1");
      fan.push_back(Tube{Cube{cfg.delta.k, index_at(t, 0, tw), index_at(t, 1, tw)},
                         o == 1 ? Orientation::alternate : Orientation::standard});
    }
    cfg.tubes_of.push_back(std::move(fan));
  }
  if (j.contains("nice")) {
    const auto& n = j["nice"];
    if (!n.is_object()) throw ConfigError("instance: 'nice' must be an object");
    for (const auto& [key, value] : n.items()) {
      if (key != "s" && key != "c" && key != "m" && key != "t") {
        throw ConfigError("instance: unknown field 'nice." + key + "'");
      }
      if (!value.is_number()) throw ConfigError("instance: 'nice." + key + "' must be a number");
    }
    for (const char* key : {"s", "c", "m"}) {
      if (!n.contains(key)) throw ConfigError(std::string("instance: missing field 'nice.") + key + "'");
    }
    Niceness nice{n["s"].get<double>(), n["c"].get<double>(), n["m"].get<std::int64_t>(), {}};
    if (n.contains("t")) nice.t = n["t"].get<double>();
    cfg.nice = nice;
  }
  return cfg;
}

json to_json(const SpreadReport& r) {
  return {{"pass", r.pass},
          {"c_star", r.c_star},
          {"s", r.s},
          {"c", r.c},
          {"size", r.size},
          {"witness_scale", r.witness_scale.k},
          {"witness_cube", to_string(r.witness_cube)}};
}

json to_json(const BoundReport& r) {
  json terms = json::object();
  for (const auto& [name, value] : r.terms) terms[name] = value;
  return {{"name", r.name},     {"lhs", r.lhs},       {"terms", std::move(terms)},
          {"budget", r.budget}, {"rhs", r.rhs()},     {"slack", r.slack},
          {"pass", r.pass},     {"measured_only", r.measured_only}};
}

json to_json(const LedgerEntry& e) {
  return {{"stage", e.stage}, {"mass_before", e.mass_before}, {"mass_after", e.mass_after},
          {"budget", e.budget}};
}

json to_json(const ClauseCheck& c) {
  return {{"clause", c.clause}, {"pass", c.pass}, {"lhs", c.lhs}, {"rhs", c.rhs}};
}

json to_json(const Direction& d) {
  return {{"num", d.num}, {"exp", d.exp}, {"swapped", d.swapped}, {"slope", d.slope()}};
}

}  // namespace lab
