#include "runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <regex>
#include <sstream>

namespace lab {

namespace fs = std::filesystem;
using namespace incidence;

Params::Params(json params, std::string where) : params_(std::move(params)), where_(std::move(where)) {
  if (params_.is_null()) params_ = json::object();
  if (!params_.is_object()) throw ConfigError(where_ + " must be an object");
}

const json& Params::at(const std::string& key) {
  if (!params_.contains(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
  used_.insert(key);
  return params_[key];
}

void Params::finish() const {
  for (const auto& [key, value] : params_.items()) {
    if (!used_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return os.str();
}

namespace {

const std::regex kIdentifier("[A-Za-z0-9_-]+");

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string csv_cell(const json& v) {
  if (!v.is_string()) return v.dump();
  const auto& s = v.get_ref<const std::string&>();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return quoted + "\"";
}

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<json>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv_cell(header[i]);
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << "\n";
  }
  return os.str();
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 gen(seq);
  return gen();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected an object");
  static const std::set<std::string> known{"name", "description", "seed", "pipeline", "output"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown field '" + key + "'");
  }
  for (const char* key : {"name", "seed", "pipeline"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("config: missing field '") + key + "'");
  }
  ExperimentConfig cfg;
  cfg.canonical = doc;
  cfg.name = detail::convert<std::string>(doc["name"], "config.name");
  if (!std::regex_match(cfg.name, kIdentifier)) throw ConfigError("config.name must match [A-Za-z0-9_-]+");
  cfg.seed = detail::convert<std::uint64_t>(doc["seed"], "config.seed");
  if (doc.contains("description")) detail::convert<std::string>(doc["description"], "config.description");
  if (doc.contains("output")) cfg.output = detail::convert<std::string>(doc["output"], "config.output");

  const auto& pipeline = doc["pipeline"];
  if (!pipeline.is_array() || pipeline.empty()) throw ConfigError("config.pipeline must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    const std::string where = "config.pipeline[" + std::to_string(i) + "]";
    const auto& st = pipeline[i];
    if (!st.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : st.items()) {
      if (key != "name" && key != "op" && key != "check" && key != "params") {
        throw ConfigError(where + ": unknown field '" + key + "'");
      }
    }
    for (const char* key : {"name", "op"}) {
      if (!st.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    }
    StageSpec spec;
    spec.name = detail::convert<std::string>(st["name"], where + ".name");
    spec.op = detail::convert<std::string>(st["op"], where + ".op");
    if (st.contains("check")) spec.check = detail::convert<bool>(st["check"], where + ".check");
    spec.params = st.value("params", json::object());
    if (!std::regex_match(spec.name, kIdentifier)) throw ConfigError(where + ".name must match [A-Za-z0-9_-]+");
    if (!names.insert(spec.name).second) throw ConfigError(where + ": duplicate stage name '" + spec.name + "'");
    const auto& registry = stage_registry();
    const auto def = registry.find(spec.op);
    if (def == registry.end()) throw ConfigError(where + ": unknown op '" + spec.op + "'");
    if (!spec.params.is_object()) throw ConfigError(where + ".params must be an object");
    for (const auto& key : def->second.required) {
      if (!spec.params.contains(key)) throw ConfigError(where + ".params: missing field '" + key + "'");
    }
    for (const auto& [key, value] : spec.params.items()) {
      const auto& d = def->second;
      if (std::find(d.required.begin(), d.required.end(), key) == d.required.end() &&
          std::find(d.optional.begin(), d.optional.end(), key) == d.optional.end()) {
        throw ConfigError(where + ".params: unknown field '" + key + "'");
      }
    }
    cfg.pipeline.push_back(std::move(spec));
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(read_json(path)); }

fs::path output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  if (options.out) return *options.out;
  if (cfg.output) return *cfg.output;
  if (const char* root = std::getenv(kOutputRootVar); root && *root) return fs::path(root) / cfg.name;
  return fs::path("lab-out") / cfg.name;
}

RunOutcome run(const ExperimentConfig& cfg, const RunOptions& options) {
  RunOutcome outcome;
  outcome.dir = output_dir(cfg, options);
  ensure_dir(outcome.dir);
  const std::string hash = sha256_hex(cfg.canonical.dump());
  const auto& registry = stage_registry();

  json manifest_stages = json::array();
  json report_stages = json::array();
  std::vector<std::string> files;
  bool pass = true;
  double total = 0;
  for (std::size_t i = 0; i < cfg.pipeline.size(); ++i) {
    const auto& spec = cfg.pipeline[i];
    Params params(spec.params, "config.pipeline[" + std::to_string(i) + "].params");
    const StageContext ctx{stage_seed(cfg.seed, i), options.threads};
    const auto t0 = std::chrono::steady_clock::now();
    StageResult result;
    try {
      result = registry.at(spec.op).run(params, ctx);
      params.finish();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      result = StageResult{};
      result.pass = false;
      result.summary = {{"error", e.what()}};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total += seconds;

    std::vector<std::string> outputs;
    for (const auto& table : result.tables) {
      const std::string file = spec.name + "." + table.name + ".csv";
      write_text(outcome.dir / file, csv_text(table.header, table.rows));
      outputs.push_back(file);
    }
    if (result.instance) {
      const std::string file = spec.name + ".instance.json";
      write_json(outcome.dir / file, to_json(*result.instance));
      outputs.push_back(file);
    }
    json series = json::array();
    for (const auto& s : result.series) {
      json pts = json::array();
      for (const auto& [x, y] : s.points) pts.push_back(json::array({x, y}));
      series.push_back({{"name", s.name}, {"x", s.x_label}, {"y", s.y_label}, {"points", std::move(pts)}});
    }
    if (spec.check || options.strict) pass = pass && result.pass;
    manifest_stages.push_back({{"name", spec.name},
                               {"op", spec.op},
                               {"check", spec.check},
                               {"pass", result.pass},
                               {"seconds", seconds},
                               {"outputs", outputs},
                               {"ledger", result.ledger}});
    report_stages.push_back({{"name", spec.name},
                             {"op", spec.op},
                             {"check", spec.check},
                             {"pass", result.pass},
                             {"summary", std::move(result.summary)},
                             {"series", std::move(series)},
                             {"ledger", std::move(result.ledger)}});
    files.insert(files.end(), outputs.begin(), outputs.end());
  }

  write_json(outcome.dir / "report.json",
             {{"name", cfg.name}, {"seed", cfg.seed}, {"config_hash", hash}, {"stages", report_stages}});
  files.push_back("report.json");
  std::sort(files.begin(), files.end());
  outcome.manifest = {{"tool", "lab"},
                      {"version", kToolVersion},
                      {"name", cfg.name},
                      {"seed", cfg.seed},
                      {"config_hash", hash},
                      {"pass", pass},
                      {"stages", manifest_stages},
                      {"files", files},
                      {"runtime", {{"threads", options.threads}, {"seconds", total}}}};
  write_json(outcome.dir / "manifest.json", outcome.manifest);
  outcome.pass = pass;
  return outcome;
}

json strip_timings(json manifest) {
  manifest.erase("runtime");
  if (manifest.contains("stages")) {
    for (auto& st : manifest["stages"]) st.erase("seconds");
  }
  return manifest;
}

std::vector<fs::path> report(const fs::path& manifest_path, const std::string& format,
                             std::optional<fs::path> out) {
  if (format != "csv" && format != "json" && format != "plotdata") {
    throw ConfigError("report: unknown format '" + format + "' (csv, json or plotdata)");
  }
  const json manifest = read_json(manifest_path);
  if (!manifest.is_object()) throw ConfigError("report: manifest must be an object");
  const fs::path dir = manifest_path.parent_path();
  json stages = json::array();
  const json files = manifest.value("files", json::array());
  if (std::find(files.begin(), files.end(), json("report.json")) != files.end()) {
    stages = read_json(dir / "report.json").value("stages", json::array());
  }
  const json timed = manifest.value("stages", json::array());
  auto seconds_of = [&](const std::string& name) {
    for (const auto& st : timed) {
      if (st.value("name", "") == name) return st.value("seconds", 0.0);
    }
    return 0.0;
  };

  const fs::path target = out ? *out : dir / ("report-" + format);
  ensure_dir(target);
  std::vector<fs::path> written;
  if (format == "csv") {
    std::vector<std::vector<json>> rows, ledger;
    for (const auto& st : stages) {
      const std::string name = st.value("name", "");
      rows.push_back({name, st.value("op", ""), st.value("check", true), st.value("pass", false), seconds_of(name)});
      int step = 0;
      for (const auto& e : st.value("ledger", json::array())) {
        ledger.push_back({name, step++, e.value("stage", ""), e.value("mass_before", 0), e.value("mass_after", 0),
                          e.value("budget", 1.0)});
      }
    }
    written.push_back(target / "stages.csv");
    write_text(written.back(), csv_text({"stage", "op", "check", "pass", "seconds"}, rows));
    written.push_back(target / "ledger.csv");
    write_text(written.back(),
               csv_text({"stage", "step", "name", "mass_before", "mass_after", "budget"}, ledger));
  } else if (format == "json") {
    json list = json::array();
    for (const auto& st : stages) {
      const std::string name = st.value("name", "");
      list.push_back({{"name", name},
                      {"op", st.value("op", "")},
                      {"pass", st.value("pass", false)},
                      {"seconds", seconds_of(name)},
                      {"summary", st.value("summary", json::object())}});
    }
    written.push_back(target / "summary.json");
    write_json(written.back(), {{"name", manifest.value("name", "")},
                                {"config_hash", manifest.value("config_hash", "")},
                                {"pass", manifest.value("pass", true)},
                                {"stages", list}});
  } else {
    json index = json::array();
    auto emit = [&](const std::string& file, const std::string& xl, const std::string& yl,
                    const std::vector<std::pair<double, double>>& pts) {
      std::ostringstream os;
      os << "# " << xl << " " << yl << "\n" << std::setprecision(17);
      for (const auto& [x, y] : pts) os << x << " " << y << "\n";
      written.push_back(target / file);
      write_text(written.back(), os.str());
      index.push_back({{"file", file}, {"x", xl}, {"y", yl}, {"points", pts.size()}});
    };
    for (const auto& st : stages) {
      const std::string name = st.value("name", "");
      for (const auto& s : st.value("series", json::array())) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : s.value("points", json::array())) pts.emplace_back(p[0].get<double>(), p[1].get<double>());
        emit(name + "." + s.value("name", "series") + ".dat", s.value("x", "x"), s.value("y", "y"), pts);
      }
      const auto ledger = st.value("ledger", json::array());
      if (!ledger.empty()) {
        std::vector<std::pair<double, double>> pts;
        double step = 0;
        for (const auto& e : ledger) pts.emplace_back(step++, e.value("mass_after", 0.0));
        emit(name + ".ledger.dat", "step", "mass_after", pts);
      }
    }
    written.push_back(target / "index.json");
    write_json(written.back(), index);
  }
  return written;
}

json verify(const Configuration& cfg) {
  json out = json::object();
  const auto issues = validate(cfg);
  json listed = json::array();
  for (std::size_t i = 0; i < issues.size() && i < 20; ++i) {
    listed.push_back({{"point", issues[i].point_index}, {"what", issues[i].what}});
  }
  out["validate"] = {{"issues", issues.size()}, {"first", std::move(listed)}};
  out["points"] = cfg.points.size();
  out["tube_family"] = cfg.tube_family().size();
  out["declared_incidences"] = cfg.declared_incidences();
  bool pass = issues.empty() && !cfg.points.empty();
  if (cfg.nice) {
    const auto& nice = *cfg.nice;
    if (nice.t) {
      const auto spread = check_spread(cfg.points, cfg.delta, *nice.t, nice.c);
      out["point_spread"] = to_json(spread);
      pass = pass && spread.pass;
    }
    const auto st = check_discretized_st(cfg);
    out["discretized_st"] = to_json(st);
    pass = pass && st.pass;
    const auto tc = check_tube_count(cfg);
    out["tube_count"] = {{"bound", to_json(tc.bound)}, {"tube_count", tc.tube_count},
                         {"lower_bound", tc.lower_bound}, {"c_p", tc.c_p}, {"c_t", tc.c_t},
                         {"exponent", tc.exponent}};
    if (!tc.bound.measured_only) pass = pass && tc.bound.pass;
    if (nice.t && cfg.delta.has_dyadic_sqrt()) {
      const auto d = dichotomy_check(cfg, 0.0);
      out["dichotomy"] = {{"fine_count", d.fine_count}, {"coarse_count", d.coarse_count},
                          {"fine_exponent", d.fine_exponent}, {"coarse_exponent", d.coarse_exponent},
                          {"branch_fine", d.branch_fine}, {"branch_coarse", d.branch_coarse}};
    }
  }
  out["pass"] = pass;
  return out;
}

}  // namespace lab
