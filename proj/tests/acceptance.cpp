// Runs every experiment kind at its default configuration and prints one
// verdict line per acceptance criterion. Exit status is nonzero if any fail.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gauge_lab/errors.hpp"
#include "gauge_lab/experiment.hpp"

using namespace gauge_lab;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(7);
  os << v;
  return os.str();
}

// Worst residual of one label: largest for upper bounds, smallest for lower bounds.
double worst(const Report& report, const std::string& label) {
  double out = std::numeric_limits<double>::quiet_NaN();
  for (const auto& t : report.trials) {
    if (t.label != label) continue;
    const bool lower = t.comparison == Comparison::ge;
    if (std::isnan(out) || std::isnan(t.residual) || (lower ? t.residual < out : t.residual > out)) out = t.residual;
  }
  return out;
}

int count(const Report& report, const std::string& label, bool only_failed) {
  int n = 0;
  for (const auto& t : report.trials) {
    if (t.label == label && (!only_failed || !t.passed)) ++n;
  }
  return n;
}

void labels(Check& check, const Report& report, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto it = std::find_if(report.criteria.begin(), report.criteria.end(),
                                 [&](const CriterionResult& c) { return c.name == name; });
    const bool ok = it != report.criteria.end() && it->passed && count(report, name, false) > 0;
    check.require(ok, name + " worst " + fmt(worst(report, name)) + " (" +
                          std::to_string(count(report, name, true)) + "/" +
                          std::to_string(count(report, name, false)) + " failed)");
  }
}

Report run_default(ExperimentKind kind) {
  ExperimentConfig config;
  config.kind = kind;
  config.seed = 2024;
  return run(config);
}

std::string without_wall_time(const std::string& text) {
  auto j = nlohmann::ordered_json::parse(text);
  j.erase("wall_time");
  return j.dump();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GAUGE_LAB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Check cli_contract() {
  Check check;
  const fs::path dir = fs::temp_directory_path() / "gauge_lab_acceptance";
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  };
  const std::string pass_cfg = write("pass.json", R"({"kind": "attention-gauge", "seed": 99})");
  const std::string fail_cfg =
      write("fail.json", R"({"kind": "relu-rescale", "trials": 3, "tolerances": {"relu-invariance": 1e-300}})");
  const std::string bad_cfg = write("bad.json", R"({"kind": "attention-gauge", "dim": -1})");

  const fs::path first = dir / "first.json";
  const fs::path second = dir / "second.json";
  const int a = cli("run --config " + pass_cfg + " --out " + first.string());
  const int b = cli("run --config " + pass_cfg + " --out " + second.string());
  bool identical = false;
  try {
    identical = without_wall_time(slurp(first)) == without_wall_time(slurp(second));
  } catch (const std::exception&) {
  }
  check.require(identical, identical ? "repeated JSON identical" : "repeated JSON differs");
  check.require(a == 0 && b == 0, "pass exit " + std::to_string(a) + "," + std::to_string(b));
  const int f = cli("run --config " + fail_cfg + " --out " + (dir / "fail_report.json").string());
  check.require(f == 1, "criterion failure exit " + std::to_string(f));
  const int c = cli("run --config " + bad_cfg);
  check.require(c == 2, "config error exit " + std::to_string(c));
  const int k = cli("run --config " + pass_cfg + " --kind unknown-kind");
  check.require(k == 2, "unknown kind exit " + std::to_string(k));
  return check;
}

}  // namespace

int main() {
  std::map<ExperimentKind, Report> reports;
  auto report = [&](ExperimentKind kind) -> const Report& {
    auto it = reports.find(kind);
    if (it == reports.end()) it = reports.emplace(kind, run_default(kind)).first;
    return it->second;
  };

  struct Criterion {
    int number;
    std::string title;
    std::function<Check()> evaluate;
  };
  const std::vector<Criterion> criteria = {
      {1, "Wilson line gauge covariance",
       [&] {
         Check c;
         const auto& r = report(ExperimentKind::wilson_covariance);
         labels(c, r, {"covariance", "order"});
         c.require(r.wall_time <= 10.0, "runtime " + fmt(r.wall_time) + " s");
         return c;
       }},
      {2, "Continuous gauge invariance",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::diffeo_invariance), {"gauge-invariance", "boundary-control"});
         return c;
       }},
      {3, "Second-order infinitesimal deformations",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::diffeo_invariance),
                {"spatial-diffeo-ratio", "time-reparam-ratio", "lie-ratio"});
         return c;
       }},
      {4, "Commuting discretization diagram",
       [&] {
         Check c;
         const auto& r = report(ExperimentKind::bridge_diagram);
         labels(c, r, {"layer-deviation", "refinement-gain", "io-deviation"});
         c.require(r.wall_time <= 30.0, "runtime " + fmt(r.wall_time) + " s");
         return c;
       }},
      {5, "ReLU rescaling invariance",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::relu_rescale), {"relu-invariance", "relu-power-of-two", "relu-control"});
         return c;
       }},
      {6, "CNN rescaling with pooling",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::cnn_rescale), {"cnn-invariance"});
         return c;
       }},
      {7, "Attention gauge invariance",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::attention_gauge),
                {"identity-invariance", "relu-invariance", "qk-invariance", "softmax-control"});
         return c;
       }},
      {8, "Attention from a cubic neural ODE",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::attention_node),
                {"node-attention", "token-attention", "tensor-oracle", "smoothed-delta-ratio"});
         return c;
       }},
      {9, "Uniform-motion regularizer",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::regularizer_train), {"analytic-a4", "zero-residual", "gauge-fixing-ratio"});
         return c;
       }},
      {10, "Gauge orbit orthogonality",
       [&] {
         Check c;
         labels(c, report(ExperimentKind::orbit_orthogonality), {"orbit-orthogonality", "regularizer-derivative"});
         return c;
       }},
      {11, "CLI determinism and exit codes", cli_contract},
  };

  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    try {
      check = criterion.evaluate();
    } catch (const std::exception& e) {
      check.passed = false;
      check.detail = std::string("error: ") + e.what();
    }
    if (!check.passed) ++failed;
    std::cout << (check.passed ? "PASS" : "FAIL") << " criterion " << criterion.number << ": " << criterion.title
              << " [" << check.detail << "]" << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
