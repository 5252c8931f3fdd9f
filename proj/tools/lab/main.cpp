// lab: run declarative experiments, render reports, verify instances.
//
// Exit status: 0 success, 1 a checked stage or verification failed,
// 2 malformed input or usage, 3 I/O failure.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "runner.hpp"

namespace {

int run_command(const std::string& config, const std::optional<std::string>& out, int threads, bool strict) {
  const auto cfg = lab::load_config(config);
  lab::RunOptions options;
  if (out) options.out = *out;
  options.threads = threads;
  options.strict = strict;
  const auto outcome = lab::run(cfg, options);
  for (const auto& st : outcome.manifest["stages"]) {
    std::cout << (st["pass"].get<bool>() ? "PASS " : "FAIL ") << st["name"].get<std::string>()
              << (st["check"].get<bool>() ? "" : " (unchecked)") << "\n";
  }
  std::cout << "manifest: " << (outcome.dir / "manifest.json").string() << "\n";
  return outcome.pass ? 0 : 1;
}

int verify_command(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lab::IoError("cannot read " + path);
  lab::json doc;
  try {
    doc = lab::json::parse(in);
  } catch (const lab::json::parse_error& e) {
    throw lab::ConfigError(path + ": " + e.what());
  }
  const auto result = lab::verify(lab::configuration_from_json(doc));
  std::cout << result.dump(2) << "\n";
  return result["pass"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments on discretized incidence geometry"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out;
  int threads = 1;
  bool strict = false;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, std::string("Output directory (default: $") + lab::kOutputRootVar + "/<name>)");
  run->add_option("--threads", threads, "Worker threads for parallel stages")->check(CLI::PositiveNumber);
  run->add_flag("--strict", strict, "Unchecked stages also decide the exit status");

  std::string manifest;
  std::string format;
  std::optional<std::string> report_out;
  auto* report = app.add_subcommand("report", "Render a finished run");
  report->add_option("manifest", manifest, "manifest.json of a run")->required();
  report->add_option("--format", format, "csv, json or plotdata")
      ->required()
      ->check(CLI::IsMember({"csv", "json", "plotdata"}));
  report->add_option("--out", report_out, "Output directory (default: next to the manifest)");

  std::string instance;
  auto* verify = app.add_subcommand("verify", "Certify a configuration instance");
  verify->add_option("instance", instance, "Instance JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_command(config, out, threads, strict);
    if (*report) {
      for (const auto& f : lab::report(manifest, format, report_out)) std::cout << f.string() << "\n";
      return 0;
    }
    return verify_command(instance);
  } catch (const lab::ConfigError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  } catch (const lab::IoError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  }
}
