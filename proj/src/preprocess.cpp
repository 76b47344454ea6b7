#include "uavmon/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uavmon/csv.hpp"

namespace uavmon {

namespace {
constexpr double kTimeEps = 1e-9;
}

int PreprocessConfig::window_samples() const {
  return static_cast<int>(std::lround(sample_rate * window_length));
}

void PreprocessConfig::validate() const {
  if (!(window_length > 0.0) || !(sample_rate > 0.0)) throw ValidationError("window length and rate must be positive");
  if (!(overlap > 0.0) || !(overlap < window_length)) throw ValidationError("overlap must be in (0, window_length)");
  const double w = sample_rate * window_length;
  if (std::abs(w - std::round(w)) > 1e-9 || std::lround(w) < 4) {
    throw ValidationError("sample_rate * window_length must be an integer >= 4");
  }
  if (!(nominal_distance >= 0.0) || !(nominal_lookahead >= 0.0)) {
    throw ValidationError("nominal filter parameters must be non-negative");
  }
}

std::vector<double> unwrap_heading(std::span<const double> degrees) {
  std::vector<double> out(degrees.begin(), degrees.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    double v = degrees[i] + offset;
    while (v - out[i - 1] > 180.0) {
      offset -= 360.0;
      v -= 360.0;
    }
    while (v - out[i - 1] < -180.0) {
      offset += 360.0;
      v += 360.0;
    }
    out[i] = v;
  }
  return out;
}

HeadingSeries resample_uniform(std::span<const LogRecord> records, double rate) {
  if (records.size() < 2) throw ValidationError("resampling needs at least 2 records");
  if (!(rate > 0.0)) throw ValidationError("sample rate must be positive");
  std::vector<double> raw;
  raw.reserve(records.size());
  for (const auto& r : records) raw.push_back(r.r);
  const auto unwrapped = unwrap_heading(raw);

  const double t0 = records.front().timestamp;
  const double t1 = records.back().timestamp;
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) * rate + kTimeEps)) + 1;

  HeadingSeries s;
  s.t.reserve(n);
  s.r.reserve(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = std::min(t0 + static_cast<double>(k) / rate, t1);
    while (seg + 2 < records.size() && records[seg + 1].timestamp < t) ++seg;
    const double ta = records[seg].timestamp, tb = records[seg + 1].timestamp;
    const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
    double v;
    if (w == 0.0) {
      v = unwrapped[seg];
    } else if (w == 1.0) {
      v = unwrapped[seg + 1];
    } else {
      v = unwrapped[seg] + w * (unwrapped[seg + 1] - unwrapped[seg]);
    }
    s.t.push_back(t);
    s.r.push_back(v);
  }
  return s;
}

int window_count(double duration, const PreprocessConfig& config) {
  if (duration + kTimeEps < config.window_length) return 0;
  return static_cast<int>(std::floor((duration - config.window_length) / config.stride() + kTimeEps)) + 1;
}

std::vector<HeadingWindow> make_windows(const HeadingSeries& series, const DistanceTrace& distances,
                                        const PreprocessConfig& config, const std::string& flight_id,
                                        const FlightLabels* labels) {
  config.validate();
  std::vector<HeadingWindow> out;
  if (series.t.empty()) return out;
  const int w = config.window_samples();
  const double t0 = series.t.front();
  const double duration = series.t.back() - t0;
  const int count = window_count(duration, config);
  const double flight_min = distances.minimum();

  for (int i = 0; i < count; ++i) {
    const double start = t0 + i * config.stride();
    const auto first = static_cast<std::size_t>(std::floor((start - t0) * config.sample_rate + kTimeEps));
    if (first + static_cast<std::size_t>(w) > series.r.size()) break;

    HeadingWindow win;
    win.flight_id = flight_id;
    win.index = i;
    win.start = start;
    win.end = start + config.window_length;
    win.values.assign(series.r.begin() + static_cast<std::ptrdiff_t>(first),
                      series.r.begin() + static_cast<std::ptrdiff_t>(first) + w);
    double mean = 0.0;
    for (double v : win.values) mean += v;
    mean /= w;
    for (double& v : win.values) v -= mean;
    win.win_dist = distances.min_over(win.start, win.end);
    win.min_dist = flight_min;
    if (labels) {
      win.safety = labels->safety;
      win.certainty = labels->certainty;
    }
    out.push_back(std::move(win));
  }
  return out;
}

std::vector<HeadingWindow> filter_nominal(std::span<const HeadingWindow> windows, const DistanceTrace& distances,
                                          const PreprocessConfig& config) {
  std::vector<HeadingWindow> out;
  for (const auto& w : windows) {
    if (distances.min_over(w.start, w.end + config.nominal_lookahead) > config.nominal_distance) out.push_back(w);
  }
  return out;
}

PreprocessedFlight preprocess_flight(const FlightLog& log, std::span<const ObstacleBox> obstacles,
                                     const PreprocessConfig& config, const FlightLabels* labels) {
  PreprocessedFlight result;
  if (!obstacles.empty()) {
    result.distances = min_obstacle_distance(Trajectory::from_log(log), obstacles).trace;
  }
  const auto series = resample_uniform(log.safe, config.sample_rate);
  result.windows = make_windows(series, result.distances, config, log.flight_id, labels);
  return result;
}

std::string windows_csv_header(int window_samples) {
  std::string h = "flight_id,index,start_s,end_s,win_dist_m,min_dist_m,safety,certainty";
  for (int i = 0; i < window_samples; ++i) h += ",v" + std::to_string(i);
  return h;
}

void write_window_row(std::ostream& out, const HeadingWindow& w) {
  out << w.flight_id << ',' << w.index << ',' << csv::format_double(w.start) << ',' << csv::format_double(w.end)
      << ',' << csv::format_double(w.win_dist) << ',' << csv::format_double(w.min_dist) << ','
      << (w.safety ? to_string(*w.safety) : "") << ',' << (w.certainty ? to_string(*w.certainty) : "");
  for (double v : w.values) out << ',' << csv::format_double(v);
  out << '\n';
}

void write_windows_csv(std::ostream& out, std::span<const HeadingWindow> windows, int window_samples) {
  out << windows_csv_header(window_samples) << '\n';
  for (const auto& w : windows) write_window_row(out, w);
}

WindowCsvReader::WindowCsvReader(std::istream& in) : in_(in) {
  std::string line;
  while (csv::read_line(in_, line)) {
    ++line_no_;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(csv::trim(line));
    const std::vector<std::string_view> fixed = {"flight_id", "index",      "start_s", "end_s",
                                                 "win_dist_m", "min_dist_m", "safety",  "certainty"};
    if (fields.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), fields.begin())) {
      throw ParseError("windowed dataset: unexpected header", line_no_);
    }
    for (std::size_t i = fixed.size(); i < fields.size(); ++i) {
      if (fields[i] != "v" + std::to_string(i - fixed.size())) {
        throw ParseError("windowed dataset: bad value column '" + std::string(fields[i]) + "'", line_no_);
      }
    }
    window_samples_ = static_cast<int>(fields.size() - fixed.size());
    if (window_samples_ == 0) throw ParseError("windowed dataset: no value columns", line_no_);
    return;
  }
  throw ParseError("windowed dataset: missing header");
}

std::optional<HeadingWindow> WindowCsvReader::next() {
  std::string line;
  while (csv::read_line(in_, line)) {
    ++line_no_;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    const auto f = csv::split(trimmed);
    if (f.size() != static_cast<std::size_t>(8 + window_samples_)) {
      throw ParseError("windowed dataset: expected " + std::to_string(8 + window_samples_) + " fields", line_no_);
    }
    HeadingWindow w;
    w.flight_id = std::string(f[0]);
    w.index = static_cast<int>(csv::parse_int(f[1], line_no_));
    w.start = csv::parse_double(f[2], line_no_);
    w.end = csv::parse_double(f[3], line_no_);
    w.win_dist = csv::parse_double(f[4], line_no_);
    w.min_dist = csv::parse_double(f[5], line_no_);
    try {
      if (!csv::trim(f[6]).empty()) w.safety = parse_safety(f[6]);
      if (!csv::trim(f[7]).empty()) w.certainty = parse_certainty(f[7]);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no_);
    }
    w.values.reserve(static_cast<std::size_t>(window_samples_));
    for (int i = 0; i < window_samples_; ++i) w.values.push_back(csv::parse_double(f[8 + i], line_no_));
    return w;
  }
  return std::nullopt;
}

std::vector<HeadingWindow> read_windows_csv(std::istream& in) {
  WindowCsvReader reader(in);
  std::vector<HeadingWindow> out;
  while (auto w = reader.next()) out.push_back(std::move(*w));
  return out;
}

void write_distance_traces(std::ostream& out, const std::string& flight_id, const DistanceTrace& trace,
                           bool header) {
  if (header) out << "flight_id,timestamp_s,distance_m\n";
  for (std::size_t i = 0; i < trace.times().size(); ++i) {
    out << flight_id << ',' << csv::format_double(trace.times()[i]) << ','
        << csv::format_double(trace.distances()[i]) << '\n';
  }
}

std::map<std::string, DistanceTrace> read_distance_traces(std::istream& in) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> raw;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (csv::read_line(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (!header) {
      if (trimmed != "flight_id,timestamp_s,distance_m") throw ParseError("distance traces: bad header", line_no);
      header = true;
      continue;
    }
    const auto f = csv::split(trimmed);
    if (f.size() != 3) throw ParseError("distance traces: expected 3 fields", line_no);
    auto& [ts, ds] = raw[std::string(f[0])];
    ts.push_back(csv::parse_double(f[1], line_no));
    ds.push_back(csv::parse_double(f[2], line_no));
  }
  std::map<std::string, DistanceTrace> out;
  for (auto& [id, td] : raw) out.emplace(id, DistanceTrace(std::move(td.first), std::move(td.second)));
  return out;
}

}  // namespace uavmon
