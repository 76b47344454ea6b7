#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uavmon/flightdata.hpp"
#include "uavmon/geometry.hpp"

namespace uavmon {

enum class FlightClass { certain_safe, uncertain_safe, uncertain_unsafe, certain_unsafe };

std::string_view to_string(FlightClass c);
FlightLabels labels_for(FlightClass c, const std::string& flight_id);

struct SynthConfig {
  std::uint64_t seed = 42;
  double flight_duration = 300.0;  // s
  double noise_std = 1.0;          // degrees
  double sample_rate = 5.0;        // Hz

  int min_turns = 2;
  int max_turns = 5;
  double min_turn_deg = 30.0;
  double max_turn_deg = 120.0;
  double min_slew_deg_s = 5.0;
  double max_slew_deg_s = 10.0;

  double min_osc_amplitude = 20.0, max_osc_amplitude = 60.0;  // degrees
  double min_osc_period = 1.0, max_osc_period = 4.0;          // s
  double min_osc_duration = 10.0, max_osc_duration = 30.0;    // s
  double min_unsafe_delay = 20.0, max_unsafe_delay = 60.0;    // s after oscillation onset
  double earliest_onset = 30.0;                               // s

  double safe_clearance = 3.5;  // m; safe flights stay above this
  double critical_distance = 1.0;

  void validate() const;
};

struct ClassCounts {
  int certain_safe = 0;
  int uncertain_safe = 0;
  int uncertain_unsafe = 0;
  int certain_unsafe = 0;
  int total() const { return certain_safe + uncertain_safe + uncertain_unsafe + certain_unsafe; }
};

// Parses "cs,us,uu,cu".
ClassCounts parse_class_counts(const std::string& text);

struct Turn {
  double start = 0.0;     // s
  double delta = 0.0;     // degrees, signed
  double slew = 0.0;      // deg/s, positive
};

struct Oscillation {
  double onset = 0.0;     // s
  double duration = 0.0;  // s
  double amplitude = 0.0; // degrees
  double period = 0.0;    // s
  double end() const { return onset + duration; }
};

// Closed-form heading (unwrapped degrees, before noise).
struct HeadingProfile {
  double initial = 0.0;
  std::vector<Turn> turns;
  std::optional<Oscillation> oscillation;

  double mission_heading(double t) const;  // turns only
  double at(double t) const;               // turns + oscillation
};

struct DistanceProfile {
  double base = 10.0;
  double swing = 0.0;
  double swing_period = 100.0;
  double phase = 0.0;
  std::optional<double> t_unsafe;   // first moment the distance reaches critical
  double ramp = 15.0;               // s of linear approach before t_unsafe
  double floor = 0.5;               // closest approach, m
  double critical = 1.0;

  double at(double t) const;
};

struct SynthFlight {
  std::string flight_id;
  FlightClass flight_class = FlightClass::certain_safe;
  FlightLabels labels;
  HeadingProfile heading;
  DistanceProfile distance_profile;
  FlightLog log;
  DistanceTrace distances;
};

struct SynthDataset {
  std::vector<SynthFlight> flights;
  std::vector<ObstacleBox> obstacles;  // one virtual obstacle shared by all flights
};

// Deterministic in (config.seed, name_prefix, flight index). Flight ids are
// `<prefix><cs|us|uu|cu>_<nnnn>`.
SynthDataset generate(const SynthConfig& config, const ClassCounts& counts, const std::string& name_prefix = "");

// Writes flights/<id>.csv, labels.csv, obstacles.json, anomalies.json and
// distances.csv under dir.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

std::string anomalies_to_json_text(const SynthDataset& data);

}  // namespace uavmon
