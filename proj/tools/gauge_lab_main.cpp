#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gauge_lab/errors.hpp"
#include "gauge_lab/experiment.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kCriterionFailure = 1;
constexpr int kConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gauge-symmetry verification experiments"};
  app.set_version_flag("--version", gauge_lab::library_version());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> kind;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;

  CLI::App* run_cmd = app.add_subcommand("run", "Run one experiment and report per-trial verdicts");
  run_cmd->add_option("--config", config_path, "JSON config file")->required();
  run_cmd->add_option("--kind", kind, "Experiment kind, overrides the config");
  run_cmd->add_option("--seed", seed, "Seed, overrides the config");
  run_cmd->add_option("--out", out, "Report path; stdout when absent");
  run_cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  try {
    gauge_lab::ExperimentConfig config = gauge_lab::load_config(config_path);
    if (kind) config.kind = gauge_lab::parse_kind(*kind);
    if (seed) config.seed = *seed;
    if (out) config.output = *out;
    if (format) config.format = *format;

    const gauge_lab::Report report = gauge_lab::run(config);
    if (config.output.empty()) {
      const std::string fmt = gauge_lab::resolved(config).format;
      std::cout << (fmt == "csv" ? gauge_lab::to_csv(report) : gauge_lab::to_json(report));
    }
    int failed = 0;
    for (const auto& c : report.criteria) {
      if (!c.passed) {
        ++failed;
        std::cerr << "FAIL " << c.name << "\n";
      }
    }
    std::cerr << gauge_lab::to_string(config.kind) << ": " << report.criteria.size() - failed << "/"
              << report.criteria.size() << " criteria passed\n";
    return report.passed() ? kPass : kCriterionFailure;
  } catch (const gauge_lab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const gauge_lab::IoError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  }
}
