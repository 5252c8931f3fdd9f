#pragma once

// Declarative experiment runner behind the `lab` command.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "serialize.hpp"

namespace lab {

inline constexpr const char* kToolVersion = "0.1.0";
/// Default output root when --out is not given.
inline constexpr const char* kOutputRootVar = "LAB_OUTPUT_ROOT";

/// File-system failures; the CLI maps them to exit status 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stage parameters. Every key must be read exactly once; finish() rejects
/// the rest.
class Params {
 public:
  Params(json params, std::string where);

  template <class T>
  T get(const std::string& key);
  template <class T>
  T get_or(const std::string& key, T fallback);
  template <class T>
  std::optional<T> maybe(const std::string& key);
  template <class T>
  std::vector<T> list(const std::string& key);  // accepts a scalar as a one-element list
  bool has(const std::string& key) const { return params_.contains(key); }
  void finish() const;

 private:
  const json& at(const std::string& key);
  json params_;
  std::string where_;
  std::set<std::string> used_;
};

namespace detail {

template <class T>
T convert(const json& v, const std::string& what) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(what + " must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(what + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned() == false && v.get<std::int64_t>() < 0) {
        throw ConfigError(what + " must be non-negative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(what + " must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(what + " must be a string");
  } else if constexpr (std::is_same_v<T, json>) {
    return v;
  }
  return v.get<T>();
}

}  // namespace detail

template <class T>
T Params::get(const std::string& key) {
  return detail::convert<T>(at(key), where_ + "." + key);
}

template <class T>
T Params::get_or(const std::string& key, T fallback) {
  return has(key) ? get<T>(key) : fallback;
}

template <class T>
std::optional<T> Params::maybe(const std::string& key) {
  std::optional<T> out;
  if (has(key)) out.emplace(get<T>(key));
  return out;
}

template <class T>
std::vector<T> Params::list(const std::string& key) {
  const json& v = at(key);
  std::vector<T> out;
  if (!v.is_array()) {
    out.push_back(detail::convert<T>(v, where_ + "." + key));
    return out;
  }
  if (v.empty()) throw ConfigError(where_ + "." + key + " must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(detail::convert<T>(v[i], where_ + "." + key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;
};

/// An (x, y) series for plotting.
struct Series {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

struct StageResult {
  json summary = json::object();
  std::vector<Table> tables;
  std::vector<Series> series;
  json ledger = json::array();
  std::optional<incidence::Configuration> instance;
  bool pass = true;
};

struct StageContext {
  std::uint64_t seed = 0;
  int threads = 1;
};

using StageFn = std::function<StageResult(Params&, const StageContext&)>;

struct StageDef {
  StageFn run;
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

/// Operation name -> implementation and parameter keys.
const std::map<std::string, StageDef>& stage_registry();

struct StageSpec {
  std::string name;
  std::string op;
  bool check = true;  // a failing checked stage fails the run
  json params;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<StageSpec> pipeline;
  std::optional<std::string> output;
  json canonical;  // the parsed document, hashed into the manifest
};

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> out;
  int threads = 1;
  bool strict = false;  // unchecked stages count too
};

struct RunOutcome {
  std::filesystem::path dir;
  json manifest;
  bool pass = false;
};

/// Output directory: --out, then the config's "output", then
/// $LAB_OUTPUT_ROOT/<name>, then lab-out/<name>.
std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& options);

RunOutcome run(const ExperimentConfig& cfg, const RunOptions& options);

/// Writes csv, json or plotdata files derived from a finished run into
/// `out` (default: <manifest dir>/report-<format>) and returns their paths.
std::vector<std::filesystem::path> report(const std::filesystem::path& manifest,
                                          const std::string& format,
                                          std::optional<std::filesystem::path> out = {});

/// Every certification applicable to the instance; "pass" is the verdict.
json verify(const incidence::Configuration& cfg);

/// The manifest without its timing fields.
json strip_timings(json manifest);

std::string sha256_hex(const std::string& bytes);

}  // namespace lab
