#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gauge_lab {

enum class ExperimentKind {
  diffeo_invariance,
  wilson_covariance,
  bridge_diagram,
  relu_rescale,
  cnn_rescale,
  attention_gauge,
  attention_node,
  regularizer_train,
  orbit_orthogonality,
};

std::string to_string(ExperimentKind kind);

/// Throws ConfigError naming `kind` for unknown names.
ExperimentKind parse_kind(std::string_view name);

const std::vector<ExperimentKind>& all_kinds();

/// Unset optional fields take per-kind defaults in `resolved`.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::relu_rescale;
  std::optional<int> dim;
  std::vector<int> grid_sizes;
  std::uint64_t seed = 0;
  std::optional<int> trials;
  /// Overrides keyed by check label.
  std::map<std::string, double> tolerances;
  std::optional<int> layers;
  bool identity_gauge = false;
  std::string output;
  std::string format = "json";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a single top-level JSON object. Throws ConfigError naming the
/// offending field.
ExperimentConfig parse_config(std::string_view json_text);

/// Reads and parses a config file; IoError if it cannot be read.
ExperimentConfig load_config(const std::string& path);

/// Fills defaults and validates. Throws ConfigError naming the field.
ExperimentConfig resolved(const ExperimentConfig& config);

/// Check labels an experiment kind reports, with their default tolerances.
std::map<std::string, double> default_tolerances(ExperimentKind kind);

enum class Comparison { le, ge, lt };

struct TrialResult {
  int index = 0;
  std::string label;
  double residual = 0.0;
  double tolerance = 0.0;
  Comparison comparison = Comparison::le;
  bool passed = false;
  /// Set when a numerical error aborted the trial.
  std::string error;

  bool operator==(const TrialResult&) const = default;
};

struct CriterionResult {
  std::string name;
  bool passed = false;

  bool operator==(const CriterionResult&) const = default;
};

struct Report {
  ExperimentConfig experiment;
  std::vector<TrialResult> trials;
  std::vector<CriterionResult> criteria;
  double wall_time = 0.0;
  std::string version;
  std::uint64_t seed = 0;

  bool passed() const;
};

std::string library_version();

/// Parallelism cap: GAUGE_LAB_THREADS when set to a positive integer, else
/// the hardware concurrency.
int thread_limit();

/// Runs the experiment. Trials run in parallel with one generator per trial,
/// so results do not depend on scheduling. Numerical errors become failed
/// trials. Writes the report to config.output when it is set.
Report run(const ExperimentConfig& config);

std::string to_json(const Report& report);
Report report_from_json(std::string_view text);
std::string to_csv(const Report& report);

/// Writes the report in `format` ("json" or "csv"). Throws ConfigError for
/// other formats and IoError when the file cannot be written.
void emit(const Report& report, const std::string& format, const std::string& path);

}  // namespace gauge_lab
