#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr combined

  bool contains(const std::string& needle) const {
    return output.find(needle) != std::string::npos;
  }
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(EVSIM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
    result.output.append(buf, n);
  }
  const int status = ::pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("evsim_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_trips_csv(const std::string& path) {
  std::ofstream out(path);
  out << "tpep_pickup_datetime,tpep_dropoff_datetime,pickup_longitude,"
         "pickup_latitude,dropoff_longitude,dropoff_latitude,trip_distance,"
         "fare_amount\n"
      << "2015-01-15 08:10:00,2015-01-15 08:25:00,-73.97,40.75,-73.95,40.77,"
         "2.1,11.5\n"
      << "2015-01-15 09:00:00,2015-01-15 09:12:00,-73.99,40.73,-73.97,40.75,"
         "1.6,9.0\n"
      << "2015-01-15 18:30:00,2015-01-15 18:55:00,-73.95,40.78,-73.99,40.72,"
         "4.0,18.0\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

}  // namespace

TEST_CASE("help exits cleanly and lists the subcommands") {
  const CliResult r = run_cli("--help");
  CHECK(r.code == 0);
  CHECK(r.contains("ingest"));
  CHECK(r.contains("train"));
  CHECK(r.contains("evaluate"));
  CHECK(r.contains("report"));
  CHECK(r.contains("serve"));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").code == 2);                      // missing subcommand
  CHECK(run_cli("--bogus").code == 2);               // unknown flag
  CHECK(run_cli("evaluate").code == 2);              // missing --policy
  CHECK(run_cli("report --in x --out y --window 0").code == 2);
}

TEST_CASE("ingest reports missing inputs as usage errors") {
  TempDir dir("ingest_missing");
  const CliResult r =
      run_cli("ingest --trips /nonexistent.csv --out " + dir.file("m.json"));
  CHECK(r.code == 2);
  CHECK(r.contains("no such file"));
}

TEST_CASE("ingest builds a model and is byte-stable across reruns") {
  TempDir dir("ingest");
  write_trips_csv(dir.file("trips.csv"));

  const CliResult r = run_cli("ingest --trips " + dir.file("trips.csv") +
                              " --out " + dir.file("a.json"));
  CHECK(r.code == 0);
  CHECK(r.contains("read 3 rows: stored 3, dropped 0"));

  const json model = json::parse(read_file(dir.file("a.json")));
  CHECK(model.at("version") == 1);
  CHECK(model.at("kind") == "empirical");

  const CliResult rerun = run_cli("ingest --trips " + dir.file("trips.csv") +
                                  " --out " + dir.file("b.json"));
  CHECK(rerun.code == 0);
  CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));
}

TEST_CASE("ingest honors a grid config in either layout") {
  TempDir dir("ingest_grid");
  write_trips_csv(dir.file("trips.csv"));
  {
    std::ofstream out(dir.file("bare.json"));
    out << R"({"rows": 4, "cols": 5, "bbox": [-74.03, 40.68, -73.90, 40.88],
               "cell_miles": 1.0})";
  }
  const CliResult r = run_cli("ingest --trips " + dir.file("trips.csv") +
                              " --grid-config " + dir.file("bare.json") +
                              " --out " + dir.file("m.json"));
  CHECK(r.code == 0);
  const json model = json::parse(read_file(dir.file("m.json")));
  CHECK(model.at("grid").at("rows") == 4);
  CHECK(model.at("grid").at("cols") == 5);
}

TEST_CASE("train with zero episodes still writes a loadable checkpoint") {
  TempDir dir("train0");
  const CliResult r = run_cli("train --episodes 0 --out " +
                              dir.file("ckpt.json") +
                              " --set env.horizon_min=360");
  CHECK(r.code == 0);
  CHECK(r.contains("trained 0 episodes"));
  const json ckpt = json::parse(read_file(dir.file("ckpt.json")));
  CHECK(ckpt.contains("policy"));
  CHECK(ckpt.contains("value"));
}

TEST_CASE("evaluate rejects a bad policy spec before running") {
  const CliResult r = run_cli("evaluate --policy heuristic:1.5 --episodes 1");
  CHECK(r.code == 2);
}

TEST_CASE("evaluate writes a report and report exports its tables") {
  TempDir dir("pipeline");
  const CliResult eval = run_cli(
      "evaluate --policy heuristic:0.10 --episodes 2 --seed 4 --out " +
      dir.file("report.json") + " --set env.horizon_min=360");
  CHECK(eval.code == 0);
  CHECK(eval.contains("reward mean"));
  CHECK(eval.contains("report written to"));

  const json report = json::parse(read_file(dir.file("report.json")));
  CHECK(report.at("episodes") == 2);
  CHECK(report.at("policy") == "heuristic:0.1");

  const CliResult rep = run_cli("report --in " + dir.file("report.json") +
                                " --out " + dir.file("tables") +
                                " --window 1");
  CHECK(rep.code == 0);
  CHECK(count_lines(read_file(dir.file("tables/episodes.csv"))) == 3);
  CHECK(count_lines(read_file(dir.file("tables/histogram.csv"))) == 25);
  CHECK(count_lines(read_file(dir.file("tables/rewards.csv"))) == 3);
}

TEST_CASE("a trained checkpoint evaluates end to end") {
  TempDir dir("roundtrip");
  const CliResult train = run_cli("train --episodes 0 --out " +
                                  dir.file("ckpt.json"));
  REQUIRE(train.code == 0);
  const CliResult eval = run_cli("evaluate --policy " + dir.file("ckpt.json") +
                                 " --episodes 1 --out " +
                                 dir.file("report.json") +
                                 " --set env.horizon_min=360");
  CHECK(eval.code == 0);
  const json report = json::parse(read_file(dir.file("report.json")));
  CHECK(report.at("episodes") == 1);
}

TEST_CASE("config overrides are validated") {
  const CliResult r = run_cli(
      "evaluate --policy heuristic:0.10 --episodes 1 --set env.nope=1");
  CHECK(r.code == 2);
  CHECK(r.contains("unknown config key"));
}

TEST_CASE("report requires an existing input document") {
  TempDir dir("report_missing");
  const CliResult r =
      run_cli("report --in /nonexistent/report.json --out " + dir.file("t"));
  CHECK(r.code == 1);  // runtime failure, not a usage error
}
