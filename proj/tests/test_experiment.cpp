#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gauge_lab/errors.hpp"
#include "gauge_lab/experiment.hpp"

using namespace gauge_lab;
namespace fs = std::filesystem;

namespace {

std::string config_error_message(const std::string& text) {
  try {
    resolved(parse_config(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "gauge_lab_unit";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_wall_time(const std::string& report) {
  auto j = nlohmann::ordered_json::parse(report);
  j.erase("wall_time");
  return j.dump();
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GAUGE_LAB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  CHECK(config_error_message(R"({"kind": "no-such-kind"})").find("kind") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "colour": 1})").find("colour") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "dim": 0})").find("dim") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "tolerances": {"relu-invariance": -1}})")
            .find("tolerances") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "tolerances": {"bogus": 1}})").find("bogus") !=
        std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "format": "xml"})").find("format") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "seed": -3})").find("seed") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale", "layers": 1})").find("layers") != std::string::npos);
  CHECK(config_error_message(R"([1, 2])").find("config") != std::string::npos);
  CHECK(config_error_message(R"({"kind": )").find("config") != std::string::npos);
  CHECK(config_error_message(R"({"kind": "relu-rescale"})").empty());
  CHECK_THROWS_AS(load_config((scratch_dir() / "missing.json").string()), IoError);
}

TEST_CASE("kind names round trip") {
  for (auto kind : all_kinds()) {
    CHECK(parse_kind(to_string(kind)) == kind);
    CHECK_FALSE(default_tolerances(kind).empty());
  }
  CHECK(all_kinds().size() == 9);
}

TEST_CASE("defaults are filled in") {
  const auto c = resolved(parse_config(R"({"kind": "wilson-covariance"})"));
  CHECK(c.dim == 3);
  CHECK(c.grid_sizes == std::vector<int>{256, 512, 1024, 2048});
  CHECK(c.trials == 20);
}

TEST_CASE("relu rescaling experiment passes") {
  const auto report = run(parse_config(R"({"kind": "relu-rescale", "dim": 3, "seed": 7})"));
  CHECK(report.passed());
  CHECK(report.seed == 7);
  CHECK(report.version == library_version());
  for (const auto& t : report.trials) {
    if (t.label == "relu-invariance") CHECK(t.residual <= 1e-12);
    CHECK(t.error.empty());
  }
  CHECK(report.criteria.size() == default_tolerances(ExperimentKind::relu_rescale).size());
}

TEST_CASE("bridge with identity gauge is exact") {
  const auto report = run(parse_config(
      R"({"kind": "bridge-diagram", "layers": 1, "identity_gauge": true, "grid_sizes": [64], "trials": 3})"));
  REQUIRE_FALSE(report.trials.empty());
  for (const auto& t : report.trials) CHECK(t.residual <= 1e-12);
  CHECK(report.passed());
}

TEST_CASE("tolerance overrides change verdicts") {
  const auto strict =
      run(parse_config(R"({"kind": "cnn-rescale", "trials": 2, "tolerances": {"cnn-invariance": 1e-300}})"));
  CHECK_FALSE(strict.passed());
}

TEST_CASE("runs are deterministic modulo wall time") {
  const auto config = parse_config(R"({"kind": "attention-gauge", "trials": 6, "seed": 11})");
  ::setenv("GAUGE_LAB_THREADS", "1", 1);
  CHECK(thread_limit() == 1);
  const auto serial = run(config);
  ::setenv("GAUGE_LAB_THREADS", "4", 1);
  CHECK(thread_limit() == 4);
  const auto parallel = run(config);
  ::unsetenv("GAUGE_LAB_THREADS");
  CHECK(without_wall_time(to_json(serial)) == without_wall_time(to_json(parallel)));
  CHECK(serial.trials == parallel.trials);
  for (std::size_t i = 1; i < serial.trials.size(); ++i) {
    CHECK(serial.trials[i - 1].index <= serial.trials[i].index);
  }
  const auto other = run(parse_config(R"({"kind": "attention-gauge", "trials": 6, "seed": 12})"));
  CHECK(without_wall_time(to_json(other)) != without_wall_time(to_json(serial)));
}

TEST_CASE("report serialization") {
  Report empty;
  empty.experiment = resolved(parse_config(R"({"kind": "cnn-rescale", "trials": 0})"));
  empty.version = library_version();
  const auto j = nlohmann::json::parse(to_json(empty));
  CHECK(j.at("trials").empty());
  CHECK(j.at("seed") == 0);
  CHECK(j.contains("wall_time"));
  CHECK(j.at("experiment").at("kind") == "cnn-rescale");

  Report three = empty;
  for (int i = 0; i < 3; ++i) {
    three.trials.push_back({i, "cnn-invariance", 1e-15 * (i + 1), 1e-12, Comparison::le, true, ""});
  }
  three.trials.back().residual = 1.0;
  three.trials.back().passed = false;
  three.criteria = {{"cnn-invariance", false}};
  const std::string csv = to_csv(three);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "trial,residual,tolerance,verdict");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
  CHECK(csv.find("fail") != std::string::npos);

  const Report back = report_from_json(to_json(three));
  CHECK(back.trials == three.trials);
  CHECK(back.criteria == three.criteria);
  CHECK(back.experiment == three.experiment);
  CHECK_FALSE(back.passed());

  const fs::path out = scratch_dir() / "report.csv";
  emit(three, "csv", out.string());
  CHECK(read_file(out) == csv);
  CHECK_THROWS_AS(emit(three, "xml", out.string()), ConfigError);
  CHECK_THROWS_AS(emit(three, "json", (scratch_dir() / "no" / "such" / "dir.json").string()), IoError);
}

TEST_CASE("non-finite residuals serialize as null") {
  Report r;
  r.experiment = resolved(parse_config(R"({"kind": "cnn-rescale"})"));
  r.trials.push_back({0, "cnn-invariance", std::numeric_limits<double>::quiet_NaN(), 1e-12, Comparison::le, false,
                      "NonFiniteState: boom"});
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j.at("trials")[0].at("residual").is_null());
  CHECK(j.at("trials")[0].at("error") == "NonFiniteState: boom");
}

TEST_CASE("command line exit codes") {
  const fs::path good = write_file("good.json", R"({"kind": "relu-rescale", "trials": 3})");
  const fs::path failing =
      write_file("failing.json", R"({"kind": "cnn-rescale", "trials": 2, "tolerances": {"cnn-invariance": 1e-300}})");
  const fs::path broken = write_file("broken.json", R"({"kind": "relu-rescale", "dim": 0})");
  CHECK(cli("run --config " + good.string()) == 0);
  CHECK(cli("run --config " + failing.string()) == 1);
  CHECK(cli("run --config " + broken.string()) == 2);
  CHECK(cli("run --config " + (scratch_dir() / "absent.json").string()) == 2);
  CHECK(cli("run --config " + good.string() + " --kind nonsense") == 2);
  CHECK(cli("run --config " + good.string() + " --format xml") == 2);
  CHECK(cli("run") == 2);

  const fs::path a = scratch_dir() / "a.json";
  const fs::path b = scratch_dir() / "b.json";
  CHECK(cli("run --config " + good.string() + " --seed 5 --out " + a.string()) == 0);
  CHECK(cli("run --config " + good.string() + " --seed 5 --out " + b.string()) == 0);
  CHECK(without_wall_time(read_file(a)) == without_wall_time(read_file(b)));
  CHECK(nlohmann::json::parse(read_file(a)).at("seed") == 5);

  const fs::path c = scratch_dir() / "c.csv";
  CHECK(cli("run --config " + good.string() + " --format csv --out " + c.string()) == 0);
  CHECK(read_file(c).rfind("trial,residual,tolerance,verdict", 0) == 0);
}
