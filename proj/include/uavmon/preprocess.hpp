#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uavmon/flightdata.hpp"
#include "uavmon/geometry.hpp"

namespace uavmon {

struct PreprocessConfig {
  double window_length = 5.0;      // s
  double overlap = 2.5;            // s
  double sample_rate = 5.0;        // Hz
  double nominal_distance = 3.0;   // m
  double nominal_lookahead = 50.0; // s

  // Samples per window (sample_rate * window_length).
  int window_samples() const;
  double stride() const { return window_length - overlap; }
  void validate() const;
};

// Removes +-360 jumps so consecutive headings differ by at most 180 degrees.
// The first element is kept as is.
std::vector<double> unwrap_heading(std::span<const double> degrees);

struct HeadingSeries {
  std::vector<double> t;
  std::vector<double> r;  // unwrapped, degrees
};

// Unwraps the records' headings and linearly interpolates them onto a uniform
// grid at `rate` Hz from the first to the last timestamp (no extrapolation).
HeadingSeries resample_uniform(std::span<const LogRecord> records, double rate);

struct HeadingWindow {
  std::string flight_id;
  int index = 0;
  double start = 0.0;
  double end = 0.0;
  std::vector<double> values;  // zero-centered headings, degrees
  double win_dist = 0.0;       // min obstacle distance within [start, end]
  double min_dist = 0.0;       // min obstacle distance over the flight
  std::optional<Safety> safety;
  std::optional<Certainty> certainty;
};

// Number of full windows that fit a series of the given duration.
int window_count(double duration, const PreprocessConfig& config);

// Cuts the series into overlapping windows of W samples. Window i nominally
// starts at t0 + i * stride and takes W consecutive grid samples from the last
// grid point at or before that time. Trailing partial windows are dropped.
std::vector<HeadingWindow> make_windows(const HeadingSeries& series, const DistanceTrace& distances,
                                        const PreprocessConfig& config, const std::string& flight_id,
                                        const FlightLabels* labels = nullptr);

// Keeps windows whose obstacle distance stays above nominal_distance from the
// window start to nominal_lookahead seconds past its end (clipped at flight end).
std::vector<HeadingWindow> filter_nominal(std::span<const HeadingWindow> windows, const DistanceTrace& distances,
                                          const PreprocessConfig& config);

struct PreprocessedFlight {
  std::vector<HeadingWindow> windows;
  DistanceTrace distances;
};

// unwrap -> resample -> window -> annotate, for one flight.
PreprocessedFlight preprocess_flight(const FlightLog& log, std::span<const ObstacleBox> obstacles,
                                     const PreprocessConfig& config, const FlightLabels* labels = nullptr);

// Windowed dataset CSV:
// flight_id,index,start_s,end_s,win_dist_m,min_dist_m,safety,certainty,v0..v{W-1}
std::string windows_csv_header(int window_samples);
void write_window_row(std::ostream& out, const HeadingWindow& w);
void write_windows_csv(std::ostream& out, std::span<const HeadingWindow> windows, int window_samples);

// Incremental reader, used for the streaming detector as well as whole files.
class WindowCsvReader {
 public:
  explicit WindowCsvReader(std::istream& in);
  int window_samples() const { return window_samples_; }
  std::optional<HeadingWindow> next();

 private:
  std::istream& in_;
  int window_samples_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<HeadingWindow> read_windows_csv(std::istream& in);

// Per-flight distance traces: flight_id,timestamp_s,distance_m
void write_distance_traces(std::ostream& out, const std::string& flight_id, const DistanceTrace& trace,
                           bool header);
std::map<std::string, DistanceTrace> read_distance_traces(std::istream& in);

}  // namespace uavmon
