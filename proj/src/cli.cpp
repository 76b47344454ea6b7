#include "uavmon/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "uavmon/autoenc.hpp"
#include "uavmon/csv.hpp"
#include "uavmon/detector.hpp"
#include "uavmon/evalstats.hpp"
#include "uavmon/flightdata.hpp"
#include "uavmon/geometry.hpp"
#include "uavmon/preprocess.hpp"
#include "uavmon/synthgen.hpp"

namespace uavmon {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Effective value of every option: the given value or its default.
json snapshot(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_type_size() == 0) {
        j[name] = true;
      } else if (res.size() == 1) {
        j[name] = res.front();
      } else {
        j[name] = res;
      }
    } else if (opt->get_type_size() == 0) {
      j[name] = false;
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    } else {
      j[name] = nullptr;
    }
  }
  return j;
}

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed)
      : started_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["tool_version"] = kToolVersion;
    doc_["seed"] = seed;
    doc_["started_utc"] = utc_now();
    doc_["config"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["failures"] = json::array();
  }
  void config(const CLI::App& global, const CLI::App& sub) {
    json c = snapshot(global);
    const json s = snapshot(sub);
    for (auto it = s.begin(); it != s.end(); ++it) c[it.key()] = it.value();
    doc_["config"] = std::move(c);
  }
  void input(const fs::path& p) { doc_["inputs"].push_back(p.string()); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  void failure(const std::string& item, const std::string& message) {
    doc_["failures"].push_back({{"item", item}, {"error", message}});
  }
  std::size_t failures() const { return doc_["failures"].size(); }
  void set(const std::string& key, json value) { doc_["summary"][key] = std::move(value); }
  void write(const fs::path& dir) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    doc_["wall_clock_s"] = secs;
    write_atomic(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point started_;
};

std::vector<fs::path> list_files(const fs::path& p, const std::string& ext) {
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(p)) {
    files.push_back(p);
  } else {
    throw Error("no such file or directory: " + p.string());
  }
  return files;
}

using FlightWindows = std::vector<std::pair<std::string, std::vector<HeadingWindow>>>;

// Groups windows by flight, keeping first-appearance order.
FlightWindows group_by_flight(std::vector<HeadingWindow> windows) {
  FlightWindows groups;
  std::map<std::string, std::size_t> slot;
  for (auto& w : windows) {
    auto [it, fresh] = slot.emplace(w.flight_id, groups.size());
    if (fresh) groups.emplace_back(w.flight_id, std::vector<HeadingWindow>{});
    groups[it->second].second.push_back(std::move(w));
  }
  return groups;
}

std::vector<HeadingWindow> load_windows(const fs::path& path) {
  auto in = open_input(path);
  return read_windows_csv(in);
}

std::map<std::string, DistanceTrace> load_distances(const fs::path& path) {
  auto in = open_input(path);
  return read_distance_traces(in);
}

// --distances, else distances.csv next to the windows file.
fs::path distances_path(const std::string& flag, const fs::path& windows) {
  if (!flag.empty()) return flag;
  return windows.parent_path() / "distances.csv";
}

const DistanceTrace& trace_for(const std::map<std::string, DistanceTrace>& traces, const std::string& id) {
  static const DistanceTrace none;
  auto it = traces.find(id);
  return it == traces.end() ? none : it->second;
}

std::vector<HeadingWindow> nominal_windows(const std::vector<HeadingWindow>& windows,
                                           const std::map<std::string, DistanceTrace>& traces,
                                           const PreprocessConfig& pcfg) {
  std::vector<HeadingWindow> kept;
  for (const auto& [id, group] : group_by_flight(windows)) {
    auto nominal = filter_nominal(group, trace_for(traces, id), pcfg);
    std::move(nominal.begin(), nominal.end(), std::back_inserter(kept));
  }
  return kept;
}

void add_window_flags(CLI::App* sub, PreprocessConfig& p) {
  sub->add_option("--window-s", p.window_length, "Window length in seconds")->capture_default_str();
  sub->add_option("--overlap-s", p.overlap, "Overlap between consecutive windows in seconds")->capture_default_str();
  sub->add_option("--rate-hz", p.sample_rate, "Resampling rate in Hz")->capture_default_str();
}

void add_nominal_flags(CLI::App* sub, PreprocessConfig& p) {
  sub->add_option("--nominal-dist", p.nominal_distance, "Nominal clearance in metres")->capture_default_str();
  sub->add_option("--lookahead-s", p.nominal_lookahead, "Nominal look-ahead in seconds")->capture_default_str();
}

struct Globals {
  std::uint64_t seed = 42;
  std::string out = "out";
};

// ---- preprocess ----

struct PreprocessArgs {
  std::string logs;
  std::string obstacles;
  std::string labels;
  bool require_distances = false;
  PreprocessConfig pcfg;
};

int cmd_preprocess(const PreprocessArgs& a, const Globals& g, Manifest& m, std::ostream& out, std::ostream& err) {
  a.pcfg.validate();
  const fs::path dir = g.out;
  std::vector<ObstacleBox> obstacles;
  if (!a.obstacles.empty()) {
    obstacles = load_obstacles(a.obstacles);
    m.input(a.obstacles);
  } else if (a.require_distances) {
    throw Error("--require-distances given but no obstacle file");
  }
  LabelMap labels;
  if (!a.labels.empty()) {
    labels = load_labels(a.labels);
    m.input(a.labels);
  }
  const int w = a.pcfg.window_samples();
  std::ostringstream windows_csv, distances_csv;
  windows_csv << windows_csv_header(w) << '\n';
  distances_csv << "flight_id,timestamp_s,distance_m\n";
  long flights = 0, windows = 0;
  for (const auto& file : list_files(a.logs, ".csv")) {
    m.input(file);
    try {
      const FlightLog log = load_flight_log(file);
      auto lit = labels.find(log.flight_id);
      const FlightLabels* lab = lit == labels.end() ? nullptr : &lit->second;
      const auto pf = preprocess_flight(log, obstacles, a.pcfg, lab);
      for (const auto& win : pf.windows) write_window_row(windows_csv, win);
      write_distance_traces(distances_csv, log.flight_id, pf.distances, false);
      ++flights;
      windows += static_cast<long>(pf.windows.size());
    } catch (const std::exception& e) {
      err << "error: " << file.string() << ": " << e.what() << '\n';
      m.failure(file.string(), e.what());
    }
  }
  write_atomic(dir / "windows.csv", windows_csv.str());
  write_atomic(dir / "distances.csv", distances_csv.str());
  m.output(dir / "windows.csv");
  m.output(dir / "distances.csv");
  m.set("flights", flights);
  m.set("windows", windows);
  m.set("window_samples", w);
  out << "preprocessed " << flights << " flights into " << windows << " windows (W=" << w << ")\n";
  return m.failures() ? 1 : 0;
}

// ---- train ----

struct TrainArgs {
  std::string windows;
  std::string distances;
  PreprocessConfig pcfg;
  TrainConfig tcfg;
  bool quiet = false;
};

int cmd_train(TrainArgs a, const Globals& g, Manifest& m, std::ostream& out, std::ostream&) {
  a.pcfg.validate();
  a.tcfg.seed = g.seed;
  const auto windows = load_windows(a.windows);
  m.input(a.windows);
  const fs::path dpath = distances_path(a.distances, a.windows);
  const auto traces = load_distances(dpath);
  m.input(dpath);
  const auto nominal = nominal_windows(windows, traces, a.pcfg);
  if (nominal.empty()) throw Error("zero nominal windows");
  Architecture arch;
  arch.input_length = static_cast<int>(nominal.front().values.size());
  if (arch.input_length != a.pcfg.window_samples()) {
    throw ValidationError("window length in the data (" + std::to_string(arch.input_length) +
                          ") does not match --window-s x --rate-hz (" + std::to_string(a.pcfg.window_samples()) + ")");
  }
  EpochCallback cb;
  if (!a.quiet) {
    cb = [&out](int epoch, double loss) { out << "epoch " << epoch << " loss " << csv::format_double(loss) << '\n'; };
  }
  AutoencoderModel model = train(nominal, a.tcfg, arch, cb);
  auto& meta = model.metadata();
  meta.sample_rate = a.pcfg.sample_rate;
  meta.window_length = a.pcfg.window_length;
  meta.overlap = a.pcfg.overlap;
  const fs::path path = fs::path(g.out) / "model.json";
  save_model(model, path);
  m.output(path);
  m.set("nominal_windows", static_cast<long>(nominal.size()));
  m.set("epochs", meta.epochs_trained);
  m.set("final_loss", meta.final_loss ? json(*meta.final_loss) : json(nullptr));
  out << "trained on " << nominal.size() << " nominal windows: epochs " << meta.epochs_trained << ", final loss "
      << (meta.final_loss ? csv::format_double(*meta.final_loss) : "n/a") << '\n';
  return 0;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string model;
  std::string windows;
  std::string distances;
  double quantile = 0.999;
  int bins = 50;
  std::optional<double> set_threshold;
  bool apply = false;
  PreprocessConfig pcfg;
};

int cmd_calibrate(const CalibrateArgs& a, const Globals& g, Manifest& m, std::ostream& out, std::ostream&) {
  AutoencoderModel model = load_model(a.model);
  m.input(a.model);
  const fs::path dir = g.out;
  if (!a.windows.empty()) {
    const auto windows = load_windows(a.windows);
    m.input(a.windows);
    const fs::path dpath = distances_path(a.distances, a.windows);
    const auto traces = load_distances(dpath);
    m.input(dpath);
    const auto nominal = nominal_windows(windows, traces, a.pcfg);
    if (nominal.empty()) throw Error("zero nominal windows");
    const auto losses = model.reconstruction_losses(nominal);
    const Calibration cal = calibrate_threshold(losses, a.quantile, a.bins);
    std::ostringstream hist;
    hist << "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < cal.histogram.counts.size(); ++i) {
      hist << csv::format_double(cal.histogram.edges[i]) << ',' << csv::format_double(cal.histogram.edges[i + 1])
           << ',' << cal.histogram.counts[i] << '\n';
    }
    write_atomic(dir / "histogram.csv", hist.str());
    m.output(dir / "histogram.csv");
    json cj;
    cj["threshold"] = cal.threshold;
    cj["quantile"] = cal.quantile;
    cj["nominal_windows"] = nominal.size();
    write_atomic(dir / "calibration.json", cj.dump(2) + "\n");
    m.output(dir / "calibration.json");
    m.set("threshold", cal.threshold);
    out << "theta " << csv::format_double(cal.threshold) << " (quantile " << csv::format_double(a.quantile)
        << " of " << nominal.size() << " nominal losses)\n";
    if (a.apply) model.metadata().threshold = cal.threshold;
  } else if (!a.set_threshold) {
    throw Error("calibrate needs --windows or --set-threshold");
  }
  if (a.set_threshold) {
    if (!(*a.set_threshold > 0.0)) throw ValidationError("threshold must be positive");
    model.metadata().threshold = *a.set_threshold;
  }
  if (a.set_threshold || a.apply) {
    save_model(model, dir / "model.json");
    m.output(dir / "model.json");
    out << "threshold " << csv::format_double(*model.metadata().threshold) << " written to "
        << (dir / "model.json").string() << '\n';
  }
  return 0;
}

// ---- detect ----

struct DetectArgs {
  std::string model;
  std::string windows;
  std::string log;
  std::string obstacles;
  std::string distances;
  std::optional<double> threshold;
  int n_consecutive = 4;
  double critical = 1.0;
  bool stream = false;
};

DetectorConfig detector_config(const DetectArgs& a, const AutoencoderModel& model) {
  DetectorConfig cfg;
  cfg.threshold = a.threshold ? *a.threshold : model.metadata().threshold.value_or(0.3);
  cfg.n_consecutive = a.n_consecutive;
  cfg.critical_distance = a.critical;
  cfg.validate();
  return cfg;
}

void write_reports(const std::map<std::string, DetectionReport>& reports, const fs::path& dir, Manifest& m) {
  std::ostringstream alarms;
  alarms << alarms_csv_header() << '\n';
  for (const auto& [id, r] : reports) {
    for (const auto& a : r.alarms) write_alarm_row(alarms, id, a);
    const fs::path p = dir / "reports" / (id + ".json");
    write_atomic(p, report_to_json_text(r));
    m.output(p);
  }
  write_atomic(dir / "alarms.csv", alarms.str());
  m.output(dir / "alarms.csv");
}

int cmd_detect(const DetectArgs& a, const Globals& g, Manifest& m, std::istream& in, std::ostream& out,
               std::ostream& err) {
  const AutoencoderModel model = load_model(a.model);
  m.input(a.model);
  const DetectorConfig cfg = detector_config(a, model);
  m.set("threshold", cfg.threshold);
  const fs::path dir = g.out;
  std::map<std::string, DistanceTrace> traces;
  if (!a.distances.empty()) {
    traces = load_distances(a.distances);
    m.input(a.distances);
  } else if (!a.windows.empty() && fs::exists(distances_path("", a.windows))) {
    traces = load_distances(distances_path("", a.windows));
    m.input(distances_path("", a.windows));
  }
  std::map<std::string, DetectionReport> reports;

  if (a.stream) {
    WindowCsvReader reader(in);
    if (reader.window_samples() != model.input_length()) {
      throw ValidationError("stream window length does not match the model");
    }
    std::map<std::string, StreamingDetector> detectors;
    out << alarms_csv_header() << '\n' << std::flush;
    while (auto w = reader.next()) {
      auto it = detectors.find(w->flight_id);
      if (it == detectors.end()) it = detectors.emplace(w->flight_id, StreamingDetector(model, cfg, w->flight_id)).first;
      if (auto alarm = it->second.push(*w)) {
        write_alarm_row(out, w->flight_id, *alarm);
        out << std::flush;
      }
    }
    for (auto& [id, det] : detectors) {
      DetectionReport r = det.report();
      apply_lead_time(r, trace_for(traces, id), cfg);
      reports.emplace(id, std::move(r));
    }
  } else if (!a.windows.empty()) {
    m.input(a.windows);
    for (const auto& [id, group] : group_by_flight(load_windows(a.windows))) {
      try {
        DetectionReport r = detect_stream(model, group, cfg, id);
        apply_lead_time(r, trace_for(traces, id), cfg);
        reports.emplace(id, std::move(r));
      } catch (const std::exception& e) {
        err << "error: flight " << id << ": " << e.what() << '\n';
        m.failure(id, e.what());
      }
    }
  } else if (!a.log.empty()) {
    PreprocessConfig pcfg;
    pcfg.sample_rate = model.metadata().sample_rate;
    pcfg.window_length = model.metadata().window_length;
    pcfg.overlap = model.metadata().overlap;
    std::vector<ObstacleBox> obstacles;
    if (!a.obstacles.empty()) {
      obstacles = load_obstacles(a.obstacles);
      m.input(a.obstacles);
    }
    for (const auto& file : list_files(a.log, ".csv")) {
      m.input(file);
      try {
        const FlightLog log = load_flight_log(file);
        const auto pf = preprocess_flight(log, obstacles, pcfg);
        DetectionReport r = detect_stream(model, pf.windows, cfg, log.flight_id);
        apply_lead_time(r, obstacles.empty() ? trace_for(traces, log.flight_id) : pf.distances, cfg);
        reports.emplace(log.flight_id, std::move(r));
      } catch (const std::exception& e) {
        err << "error: " << file.string() << ": " << e.what() << '\n';
        m.failure(file.string(), e.what());
      }
    }
  } else {
    throw Error("detect needs --windows, --log or --stream");
  }

  write_reports(reports, dir, m);
  long flagged = 0, alarms = 0;
  for (const auto& [id, r] : reports) {
    flagged += r.flight_uncertain;
    alarms += static_cast<long>(r.alarms.size());
  }
  m.set("flights", static_cast<long>(reports.size()));
  m.set("uncertain_flights", flagged);
  if (!a.stream) {
    out << "detected " << flagged << " uncertain of " << reports.size() << " flights (" << alarms
        << " alarms, theta " << csv::format_double(cfg.threshold) << ")\n";
  }
  return m.failures() ? 1 : 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string reports;
  std::string labels;
  std::string ground_truth = "certainty";
  double gamma = 0.95;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, Manifest& m, std::ostream& out, std::ostream&) {
  EvalConfig cfg;
  cfg.gamma = a.gamma;
  cfg.primary_axis = parse_ground_truth(a.ground_truth);
  std::map<std::string, DetectionReport> reports;
  for (const auto& file : list_files(a.reports, ".json")) {
    DetectionReport r = report_from_json_text(read_file(file));
    const std::string id = r.flight_id;
    if (!reports.emplace(id, std::move(r)).second) throw ValidationError("duplicate report for flight " + id);
    m.input(file);
  }
  const LabelMap labels = load_labels(a.labels);
  m.input(a.labels);
  const EvaluationDocument doc = dataset_report(reports, labels, cfg);
  const fs::path dir = g.out;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_atomic(dir / name, text);
    m.output(dir / name);
  };
  emit("evaluation.json", evaluation_to_json_text(doc));
  std::ostringstream s1, s2, s3, s4, s5;
  write_agreement_confusion_csv(s1, doc.agreement.counts);
  emit("agreement_counts.csv", s1.str());
  write_agreement_stats_csv(s2, doc.agreement);
  emit("agreement_stats.csv", s2.str());
  const ConfusionMatrix& cm = cfg.primary_axis == GroundTruth::certainty ? doc.uncertainty_cm : doc.unsafety_cm;
  write_confusion_csv(s3, cm, cfg.primary_axis);
  emit("confusion.csv", s3.str());
  write_metrics_csv(s4, doc);
  emit("metrics.csv", s4.str());
  write_flights_csv(s5, doc);
  emit("flights.csv", s5.str());

  const Metrics& mt = cfg.primary_axis == GroundTruth::certainty ? doc.uncertainty_metrics : doc.unsafety_metrics;
  out << "flights " << doc.flights << ", ground truth " << to_string(cfg.primary_axis) << '\n'
      << "tp " << cm.tp << " fp " << cm.fp << " fn " << cm.fn << " tn " << cm.tn << '\n'
      << "accuracy " << percent(mt.accuracy) << " precision " << percent(mt.precision) << " recall "
      << percent(mt.recall) << " f1 " << percent(mt.f1) << '\n'
      << "label agreement " << percent(doc.agreement.agreement.point) << '\n';
  return 0;
}

// ---- fitness ----

struct FitnessArgs {
  std::vector<std::string> logs;
  std::string obstacles;
  FitnessParams params;
};

int cmd_fitness(const FitnessArgs& a, const Globals& g, Manifest& m, std::ostream& out, std::ostream&) {
  const auto obstacles = load_obstacles(a.obstacles);
  m.input(a.obstacles);
  std::vector<Trajectory> executions;
  for (const auto& item : a.logs) {
    for (const auto& file : list_files(item, ".csv")) {
      executions.push_back(Trajectory::from_log(load_flight_log(file)));
      m.input(file);
    }
  }
  if (executions.empty()) throw Error("no executions given");
  const FitnessResult r = fitness_distance(executions, obstacles, a.params);
  json j;
  j["executions"] = executions.size();
  j["sum_dist"] = r.sum_dist;
  j["ave_dtw"] = r.ave_dtw;
  j["max_dtw"] = a.params.max_dtw;
  j["fitness"] = r.distance;
  const fs::path p = fs::path(g.out) / "fitness.json";
  write_atomic(p, j.dump(2) + "\n");
  m.output(p);
  m.set("fitness", r.distance);
  out << "sum_dist " << csv::format_double(r.sum_dist) << '\n'
      << "ave_dtw " << csv::format_double(r.ave_dtw) << '\n'
      << "fitness " << csv::format_double(r.distance) << '\n';
  return 0;
}

// ---- synth ----

struct SynthArgs {
  std::string counts = "10,10,10,5";
  std::string prefix;
  SynthConfig cfg;
};

int cmd_synth(SynthArgs a, const Globals& g, Manifest& m, std::ostream& out, std::ostream&) {
  a.cfg.seed = g.seed;
  const ClassCounts counts = parse_class_counts(a.counts);
  const SynthDataset data = generate(a.cfg, counts, a.prefix);
  const fs::path dir = g.out;
  write_dataset(data, dir);
  for (const char* name : {"flights", "labels.csv", "obstacles.json", "anomalies.json", "distances.csv"}) {
    m.output(dir / name);
  }
  m.set("flights", static_cast<long>(data.flights.size()));
  out << "generated " << data.flights.size() << " flights in " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"UAV decision-uncertainty monitor", "uavmon"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.set_config("--config", "", "Flat key=value file with option values");

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "Turn flight logs into a windowed heading dataset");
  pre->add_option("--logs", pa.logs, "Directory of flight log CSVs, or one log")->required();
  pre->add_option("--obstacles", pa.obstacles, "Obstacle JSON")->check(CLI::ExistingFile);
  pre->add_option("--labels", pa.labels, "Label CSV")->check(CLI::ExistingFile);
  pre->add_flag("--require-distances", pa.require_distances, "Fail when no obstacle file is given");
  add_window_flags(pre, pa.pcfg);

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train the autoencoder on nominal windows");
  trn->add_option("--windows", ta.windows, "Windowed dataset CSV")->required()->check(CLI::ExistingFile);
  trn->add_option("--distances", ta.distances, "Distance traces CSV (default: next to --windows)");
  add_window_flags(trn, ta.pcfg);
  add_nominal_flags(trn, ta.pcfg);
  trn->add_option("--epochs", ta.tcfg.max_epochs, "Maximum epochs")->capture_default_str();
  trn->add_option("--batch-size", ta.tcfg.batch_size, "Mini-batch size")->capture_default_str();
  trn->add_option("--lr", ta.tcfg.learning_rate, "Adam learning rate")->capture_default_str();
  trn->add_option("--patience", ta.tcfg.patience, "Early-stopping patience in epochs")->capture_default_str();
  trn->add_option("--min-delta", ta.tcfg.min_delta, "Minimum loss improvement")->capture_default_str();
  trn->add_flag("--quiet", ta.quiet, "Do not print per-epoch losses");

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Suggest a threshold from nominal reconstruction losses");
  cal->add_option("--model", ca.model, "Model file")->required()->check(CLI::ExistingFile);
  cal->add_option("--windows", ca.windows, "Windowed dataset CSV")->check(CLI::ExistingFile);
  cal->add_option("--distances", ca.distances, "Distance traces CSV (default: next to --windows)");
  cal->add_option("--quantile", ca.quantile, "Quantile of the nominal losses")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  cal->add_option("--bins", ca.bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);
  cal->add_option("--set-threshold", ca.set_threshold, "Write this threshold into the model metadata");
  cal->add_flag("--apply", ca.apply, "Write the calibrated threshold into the model metadata");
  add_nominal_flags(cal, ca.pcfg);

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "Score windows and raise uncertainty alarms");
  det->add_option("--model", da.model, "Model file")->required()->check(CLI::ExistingFile);
  auto* o_windows = det->add_option("--windows", da.windows, "Windowed dataset CSV")->check(CLI::ExistingFile);
  auto* o_log = det->add_option("--log", da.log, "Flight log CSV or directory of logs");
  auto* o_stream = det->add_flag("--stream", da.stream, "Read windows from standard input, print alarms as they occur");
  o_windows->excludes(o_log)->excludes(o_stream);
  o_log->excludes(o_stream);
  det->add_option("--obstacles", da.obstacles, "Obstacle JSON (with --log)")->check(CLI::ExistingFile);
  det->add_option("--distances", da.distances, "Distance traces CSV for lead times")->check(CLI::ExistingFile);
  det->add_option("--threshold", da.threshold, "Override the model threshold");
  det->add_option("--n-consecutive", da.n_consecutive, "Rolling-mean length")->capture_default_str();
  det->add_option("--critical-dist", da.critical, "Critical obstacle distance in metres")->capture_default_str();

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Compare detection reports with labels");
  ev->add_option("--reports", ea.reports, "Directory of report JSON files")->required();
  ev->add_option("--labels", ea.labels, "Label CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--ground-truth", ea.ground_truth, "certainty or safety")
      ->capture_default_str()
      ->check(CLI::IsMember({"certainty", "safety"}));
  ev->add_option("--gamma", ea.gamma, "Confidence level of the Wilson intervals")->capture_default_str();

  FitnessArgs fa;
  auto* fit = app.add_subcommand("fitness", "Fitness of one test case from its executions");
  fit->add_option("--logs", fa.logs, "Execution logs (files or directories)")->required();
  fit->add_option("--obstacles", fa.obstacles, "Obstacle JSON")->required()->check(CLI::ExistingFile);
  fit->add_option("--max-dtw", fa.params.max_dtw, "Divergence activation threshold")->capture_default_str();
  fit->add_option("--resample-n", fa.params.resample_n, "Arc-length resampling points")->capture_default_str();

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic labeled flight dataset");
  syn->add_option("--counts", sa.counts, "Flights per class: certain-safe,uncertain-safe,uncertain-unsafe,certain-unsafe")
      ->capture_default_str();
  syn->add_option("--prefix", sa.prefix, "Flight id prefix");
  syn->add_option("--duration", sa.cfg.flight_duration, "Flight duration in seconds")->capture_default_str();
  syn->add_option("--min-slew", sa.cfg.min_slew_deg_s, "Slowest turn rate in deg/s")->capture_default_str();
  syn->add_option("--max-slew", sa.cfg.max_slew_deg_s, "Fastest turn rate in deg/s (at most 30)")->capture_default_str();
  syn->add_option("--noise-std", sa.cfg.noise_std, "Heading noise in degrees")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name(), g.seed);
  manifest.config(app, *sub);
  int rc = 0;
  try {
    if (sub == pre) rc = cmd_preprocess(pa, g, manifest, out, err);
    else if (sub == trn) rc = cmd_train(ta, g, manifest, out, err);
    else if (sub == cal) rc = cmd_calibrate(ca, g, manifest, out, err);
    else if (sub == det) rc = cmd_detect(da, g, manifest, in, out, err);
    else if (sub == ev) rc = cmd_evaluate(ea, g, manifest, out, err);
    else if (sub == fit) rc = cmd_fitness(fa, g, manifest, out, err);
    else if (sub == syn) rc = cmd_synth(sa, g, manifest, out, err);
    manifest.write(g.out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}

}  // namespace uavmon
