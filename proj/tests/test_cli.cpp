#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "uavmon/autoenc.hpp"
#include "uavmon/cli.hpp"
#include "uavmon/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "uavmon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  Run r;
  r.rc = uavmon::run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("uavmon_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("synth and preprocess: window count and header") {
  TempDir d("pre");
  auto r = cli({"--out", d / "syn", "synth", "--counts", "10,0,0,0", "--duration", "60"});
  REQUIRE(r.rc == 0);
  CHECK(fs::exists(d / "syn/manifest.json"));
  r = cli({"--out", d / "pp", "preprocess", "--logs", d / "syn/flights", "--obstacles", d / "syn/obstacles.json",
           "--rate-hz", "5", "--window-s", "5"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("230 windows") != std::string::npos);
  const std::string csv = slurp(d / "pp/windows.csv");
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header.find(",v24") != std::string::npos);
  CHECK(header.find(",v25") == std::string::npos);
  CHECK(count_lines(csv) == 231);
  const auto manifest = nlohmann::json::parse(slurp(d / "pp/manifest.json"));
  CHECK(manifest["command"] == "preprocess");
  CHECK(manifest["config"]["window-s"] == "5");
  CHECK(manifest["config"]["overlap-s"] == "2.5");
  CHECK(manifest["summary"]["windows"] == 230);
  CHECK(manifest.contains("wall_clock_s"));
  CHECK(manifest["tool_version"] == uavmon::kToolVersion);
}

TEST_CASE("preprocess reports per-flight failures and continues") {
  TempDir d("prefail");
  REQUIRE(cli({"--out", d / "syn", "synth", "--counts", "2,0,0,0", "--duration", "60"}).rc == 0);
  {
    std::ofstream bad(d / "syn/flights/zz_broken.csv");
    bad << "timestamp_s,channel,x,y,z,r_deg\n0.0,safe,0,0,0,400\n";
  }
  const auto r = cli({"--out", d / "pp", "preprocess", "--logs", d / "syn/flights"});
  CHECK(r.rc == 1);
  CHECK(r.err.find("zz_broken") != std::string::npos);
  CHECK(r.out.find("preprocessed 2 flights") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(d / "pp/manifest.json"));
  CHECK(manifest["failures"].size() == 1);

  const auto missing = cli({"--out", d / "pp2", "preprocess", "--logs", d / "syn/flights", "--require-distances"});
  CHECK(missing.rc == 2);
  CHECK(cli({"--out", d / "pp3", "preprocess", "--logs", d / "syn/flights", "--obstacles", d / "nope.json"}).rc == 2);
}

TEST_CASE("train, calibrate, detect, evaluate") {
  TempDir d("pipe");
  REQUIRE(cli({"--out", d / "syn", "synth", "--counts", "3,1,1,0", "--duration", "150"}).rc == 0);
  REQUIRE(cli({"--out", d / "pp", "preprocess", "--logs", d / "syn/flights", "--obstacles", d / "syn/obstacles.json",
               "--labels", d / "syn/labels.csv"})
              .rc == 0);

  auto r = cli({"--seed", "7", "--out", d / "m1", "train", "--windows", d / "pp/windows.csv", "--epochs", "2"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("epoch 2 loss") != std::string::npos);
  CHECK(r.out.find("epochs 2") != std::string::npos);
  REQUIRE(cli({"--seed", "7", "--out", d / "m2", "train", "--windows", d / "pp/windows.csv", "--epochs", "2",
               "--quiet"})
              .rc == 0);
  CHECK(slurp(d / "m1/model.json") == slurp(d / "m2/model.json"));

  r = cli({"--out", d / "cal", "calibrate", "--model", d / "m1/model.json", "--windows", d / "pp/windows.csv",
           "--quantile", "1.0"});
  REQUIRE(r.rc == 0);
  const auto cal = nlohmann::json::parse(slurp(d / "cal/calibration.json"));
  {
    // quantile 1.0 is the largest nominal loss; all synthetic test windows here
    // are nominal except those near the unsafe approach.
    const auto model = uavmon::load_model(d / "m1/model.json");
    std::ifstream in(d / "pp/windows.csv");
    double mx = 0.0;
    for (const auto& w : uavmon::read_windows_csv(in)) {
      if (w.min_dist > 3.0) mx = std::max(mx, model.reconstruction_loss(w.values));
    }
    CHECK(cal["threshold"].get<double>() >= mx);
  }
  CHECK(count_lines(slurp(d / "cal/histogram.csv")) == 51);
  CHECK_FALSE(fs::exists(d / "cal/model.json"));

  r = cli({"--out", d / "cal2", "calibrate", "--model", d / "m1/model.json", "--set-threshold", "0.3"});
  REQUIRE(r.rc == 0);
  CHECK(uavmon::load_model(d / "cal2/model.json").metadata().threshold == 0.3);

  r = cli({"--out", d / "det", "detect", "--model", d / "cal2/model.json", "--windows", d / "pp/windows.csv"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("theta 0.3") != std::string::npos);
  CHECK(fs::exists(d / "det/alarms.csv"));
  CHECK(fs::exists(d / "det/reports/uu_0000.json"));
  const auto thr = cli({"--out", d / "det_low", "detect", "--model", d / "cal2/model.json", "--windows",
                        d / "pp/windows.csv", "--threshold", "1e-9"});
  CHECK(thr.out.find("detected 5 uncertain of 5") != std::string::npos);

  // Streaming gives the same alarms as the batch run.
  r = cli({"--out", d / "det_s", "detect", "--model", d / "cal2/model.json", "--stream", "--threshold", "1e-9"},
          slurp(d / "pp/windows.csv"));
  REQUIRE(r.rc == 0);
  CHECK(r.out == slurp(d / "det_low/alarms.csv"));

  r = cli({"--out", d / "ev", "evaluate", "--reports", d / "det/reports", "--labels", d / "syn/labels.csv",
           "--ground-truth", "safety"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("ground truth safety") != std::string::npos);
  CHECK(fs::exists(d / "ev/evaluation.json"));
  CHECK(fs::exists(d / "ev/metrics.csv"));

  {
    std::ofstream labels(d / "partial_labels.csv");
    labels << "flight_id,safety,certainty\ncs_0000,safe,certain\n";
  }
  r = cli({"--out", d / "ev2", "evaluate", "--reports", d / "det/reports", "--labels", d / "partial_labels.csv"});
  CHECK(r.rc == 2);
  CHECK(r.err.find("us_0000") != std::string::npos);
  CHECK(cli({"--out", d / "ev3", "evaluate", "--reports", d / "det/reports", "--labels", d / "syn/labels.csv",
             "--ground-truth", "vibes"})
            .rc == 2);
}

TEST_CASE("train refuses when no window is nominal") {
  TempDir d("nonom");
  REQUIRE(cli({"--out", d / "syn", "synth", "--counts", "2,0,0,0", "--duration", "60"}).rc == 0);
  REQUIRE(cli({"--out", d / "pp", "preprocess", "--logs", d / "syn/flights"}).rc == 0);
  {
    std::ofstream dist(d / "pp/distances.csv");
    dist << "flight_id,timestamp_s,distance_m\n";
    for (const char* id : {"cs_0000", "cs_0001"}) dist << id << ",0,0.5\n" << id << ",60,0.5\n";
  }
  const auto r = cli({"--out", d / "m", "train", "--windows", d / "pp/windows.csv"});
  CHECK(r.rc == 2);
  CHECK(r.err.find("zero nominal windows") != std::string::npos);
}

TEST_CASE("fitness") {
  TempDir d("fit");
  REQUIRE(cli({"--out", d / "syn", "synth", "--counts", "2,0,0,0", "--duration", "60"}).rc == 0);
  auto r = cli({"--out", d / "f1", "fitness", "--logs", d / "syn/flights/cs_0000.csv", "--obstacles",
                d / "syn/obstacles.json"});
  REQUIRE(r.rc == 0);
  auto j = nlohmann::json::parse(slurp(d / "f1/fitness.json"));
  CHECK(j["ave_dtw"].get<double>() == 0.0);
  CHECK(j["fitness"].get<double>() == j["sum_dist"].get<double>());
  CHECK(j["max_dtw"].get<double>() == 65.0);

  r = cli({"--out", d / "f2", "fitness", "--logs", d / "syn/flights", "--obstacles", d / "syn/obstacles.json",
           "--max-dtw", "1e-6"});
  REQUIRE(r.rc == 0);
  j = nlohmann::json::parse(slurp(d / "f2/fitness.json"));
  CHECK(j["executions"] == 2);
  CHECK(j["fitness"].get<double>() == doctest::Approx(j["sum_dist"].get<double>() - j["ave_dtw"].get<double>()));
}

TEST_CASE("synth options, config file and errors") {
  TempDir d("syn");
  auto r = cli({"--out", d / "a", "synth", "--counts", "50,50,50"});
  CHECK(r.rc == 2);
  r = cli({"--out", d / "a", "synth", "--counts", "1,1,1,1"});
  REQUIRE(r.rc == 0);
  const std::string labels = slurp(d / "a/labels.csv");
  for (const char* cls : {"safe,certain", "safe,uncertain", "unsafe,uncertain", "unsafe,certain"})
    CHECK(labels.find(cls) != std::string::npos);

  {
    std::ofstream cfg(d / "run.ini");
    cfg << "seed = 5\n[synth]\ncounts = \"2,0,0,0\"\nduration = 60\n";
  }
  r = cli({"--config", d / "run.ini", "--out", d / "b", "synth"});
  REQUIRE(r.rc == 0);
  CHECK(fs::exists(d / "b/flights/cs_0001.csv"));
  CHECK_FALSE(fs::exists(d / "b/flights/cs_0002.csv"));
  const auto manifest = nlohmann::json::parse(slurp(d / "b/manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["config"]["duration"] == "60");

  // Same inputs, same bytes (manifests aside).
  REQUIRE(cli({"--config", d / "run.ini", "--out", d / "c", "synth"}).rc == 0);
  CHECK(slurp(d / "b/flights/cs_0001.csv") == slurp(d / "c/flights/cs_0001.csv"));
  CHECK(slurp(d / "b/labels.csv") == slurp(d / "c/labels.csv"));

  CHECK(cli({"frobnicate"}).rc == 2);
  CHECK(cli({}).rc == 2);
  CHECK(cli({"--help"}).rc == 0);
}
