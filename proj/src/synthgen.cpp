#include "uavmon/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "uavmon/csv.hpp"
#include "uavmon/preprocess.hpp"
#include "uavmon/rng.hpp"

namespace uavmon {

namespace {

constexpr double kAltitude = 5.0;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* class_code(FlightClass c) {
  switch (c) {
    case FlightClass::certain_safe: return "cs";
    case FlightClass::uncertain_safe: return "us";
    case FlightClass::uncertain_unsafe: return "uu";
    case FlightClass::certain_unsafe: return "cu";
  }
  return "??";
}

bool is_uncertain(FlightClass c) {
  return c == FlightClass::uncertain_safe || c == FlightClass::uncertain_unsafe;
}

bool is_unsafe(FlightClass c) {
  return c == FlightClass::uncertain_unsafe || c == FlightClass::certain_unsafe;
}

double latest_onset(const SynthConfig& c) {
  return c.flight_duration - c.max_osc_duration - c.max_unsafe_delay - 5.0;
}

}  // namespace

std::string_view to_string(FlightClass c) {
  switch (c) {
    case FlightClass::certain_safe: return "certain_safe";
    case FlightClass::uncertain_safe: return "uncertain_safe";
    case FlightClass::uncertain_unsafe: return "uncertain_unsafe";
    case FlightClass::certain_unsafe: return "certain_unsafe";
  }
  return "?";
}

FlightLabels labels_for(FlightClass c, const std::string& flight_id) {
  return {flight_id, is_unsafe(c) ? Safety::unsafe : Safety::safe,
          is_uncertain(c) ? Certainty::uncertain : Certainty::certain};
}

void SynthConfig::validate() const {
  if (!(flight_duration > 0.0) || !(sample_rate > 0.0) || !(noise_std >= 0.0)) {
    throw ValidationError("synth: duration and rate must be positive, noise non-negative");
  }
  if (flight_duration < 30.0) throw ValidationError("synth: flights must last at least 30 s");
  if (min_turns < 0 || max_turns < min_turns) throw ValidationError("synth: bad turn count range");
  if (!(min_slew_deg_s > 0.0) || min_slew_deg_s > max_slew_deg_s || max_slew_deg_s > 30.0) {
    throw ValidationError("synth: slew range must lie in (0, 30] deg/s");
  }
  if (!(min_osc_period > 0.0) || min_osc_duration > max_osc_duration || min_unsafe_delay > max_unsafe_delay) {
    throw ValidationError("synth: bad oscillation ranges");
  }
  if (!(safe_clearance > critical_distance)) throw ValidationError("synth: clearance must exceed critical distance");
}

ClassCounts parse_class_counts(const std::string& text) {
  const auto parts = csv::split(text);
  if (parts.size() != 4) throw ValidationError("class counts must be four comma-separated integers");
  ClassCounts c;
  int* slots[] = {&c.certain_safe, &c.uncertain_safe, &c.uncertain_unsafe, &c.certain_unsafe};
  for (std::size_t i = 0; i < 4; ++i) {
    long long v = 0;
    try {
      v = csv::parse_int(parts[i]);
    } catch (const ParseError&) {
      throw ValidationError("class counts must be integers");
    }
    if (v < 0) throw ValidationError("class counts must be non-negative");
    *slots[i] = static_cast<int>(v);
  }
  return c;
}

double HeadingProfile::mission_heading(double t) const {
  double h = initial;
  for (const auto& turn : turns) {
    const double len = std::abs(turn.delta) / turn.slew;
    h += turn.delta * std::clamp((t - turn.start) / len, 0.0, 1.0);
  }
  return h;
}

double HeadingProfile::at(double t) const {
  double h = mission_heading(t);
  if (oscillation && t >= oscillation->onset && t <= oscillation->end()) {
    h += oscillation->amplitude * std::sin(2.0 * std::numbers::pi * (t - oscillation->onset) / oscillation->period);
  }
  return h;
}

double DistanceProfile::at(double t) const {
  auto cruise = [&](double s) { return base + swing * std::sin(2.0 * std::numbers::pi * s / swing_period + phase); };
  if (!t_unsafe) return cruise(t);
  const double ramp_start = *t_unsafe - ramp;
  if (t <= ramp_start) return cruise(t);
  if (t <= *t_unsafe) {
    const double d0 = cruise(ramp_start);
    return d0 + (critical - d0) * (t - ramp_start) / ramp;
  }
  // Keeps closing in on the obstacle for a few seconds, then hovers there.
  const double settle = 5.0;
  const double u = std::min((t - *t_unsafe) / settle, 1.0);
  return critical + (floor - critical) * u;
}

namespace {

SynthFlight make_flight(const SynthConfig& cfg, FlightClass cls, const std::string& id, Rng& rng) {
  SynthFlight f;
  f.flight_id = id;
  f.flight_class = cls;
  f.labels = labels_for(cls, id);

  const double duration = cfg.flight_duration;
  auto& hp = f.heading;
  hp.initial = rng.uniform(-180.0, 180.0);
  const int turns = rng.uniform_int(cfg.min_turns, cfg.max_turns);
  if (turns > 0) {
    const double lo = 10.0, hi = duration - 20.0;
    const double seg = (hi - lo) / turns;
    for (int i = 0; i < turns; ++i) {
      Turn t;
      const double magnitude = rng.uniform(cfg.min_turn_deg, cfg.max_turn_deg);
      t.delta = rng.uniform() < 0.5 ? -magnitude : magnitude;
      t.slew = rng.uniform(cfg.min_slew_deg_s, cfg.max_slew_deg_s);
      const double len = magnitude / t.slew;
      t.start = lo + seg * i + rng.uniform(0.0, std::max(seg - len, 0.0));
      hp.turns.push_back(t);
    }
  }

  auto& dp = f.distance_profile;
  dp.critical = cfg.critical_distance;
  const double min_cruise = cfg.safe_clearance + 0.5;
  dp.base = rng.uniform(min_cruise + 1.0, min_cruise + 12.0);
  dp.swing = rng.uniform(0.0, dp.base - min_cruise);
  dp.swing_period = rng.uniform(60.0, 200.0);
  dp.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  dp.floor = rng.uniform(0.2, 0.8);

  if (is_uncertain(cls)) {
    Oscillation o;
    o.onset = rng.uniform(cfg.earliest_onset, latest_onset(cfg));
    o.duration = rng.uniform(cfg.min_osc_duration, cfg.max_osc_duration);
    o.amplitude = rng.uniform(cfg.min_osc_amplitude, cfg.max_osc_amplitude);
    o.period = rng.uniform(cfg.min_osc_period, cfg.max_osc_period);
    hp.oscillation = o;
    if (cls == FlightClass::uncertain_unsafe) {
      dp.t_unsafe = o.onset + rng.uniform(cfg.min_unsafe_delay, cfg.max_unsafe_delay);
    }
  } else if (cls == FlightClass::certain_unsafe) {
    dp.t_unsafe = rng.uniform(cfg.earliest_onset + cfg.min_unsafe_delay, duration - 30.0);
  }
  if (dp.t_unsafe && !(*dp.t_unsafe < duration)) throw ValidationError("synth: t_unsafe beyond flight end");

  auto& log = f.log;
  log.flight_id = id;
  log.test_id = id;
  log.execution_index = 0;
  const auto samples = static_cast<std::size_t>(std::floor(duration * cfg.sample_rate + 1e-9)) + 1;
  std::vector<double> times, dists;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate;
    const double noisy = hp.at(t) + (cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0);
    const double d = dp.at(t);
    // The obstacle is a 2 m square at the origin, so x = 1 + d puts the drone
    // exactly d metres from it.
    const double x = 1.0 + d;
    log.desired.push_back({t, Channel::desired, x, 0.0, kAltitude, std::remainder(hp.mission_heading(t), 360.0)});
    log.safe.push_back({t, Channel::safe, x, 0.0, kAltitude, std::remainder(noisy, 360.0)});
    log.position.push_back({t, Channel::position, x, 0.0, kAltitude, std::remainder(noisy, 360.0)});
    times.push_back(t);
    dists.push_back(d);
  }
  f.distances = DistanceTrace(std::move(times), std::move(dists));
  return f;
}

}  // namespace

SynthDataset generate(const SynthConfig& config, const ClassCounts& counts, const std::string& name_prefix) {
  config.validate();
  if (counts.certain_safe < 0 || counts.uncertain_safe < 0 || counts.uncertain_unsafe < 0 ||
      counts.certain_unsafe < 0) {
    throw ValidationError("class counts must be non-negative");
  }
  if (counts.uncertain_safe + counts.uncertain_unsafe > 0 && !(latest_onset(config) > config.earliest_onset)) {
    throw ValidationError("synth: flight too short for the oscillation and unsafe timing constraints");
  }
  if (counts.certain_unsafe > 0 &&
      !(config.flight_duration - 30.0 > config.earliest_onset + config.min_unsafe_delay)) {
    throw ValidationError("synth: flight too short to place the unsafe approach");
  }
  SynthDataset data;
  data.obstacles.push_back({0.0, 0.0, 2.0, 2.0, 20.0, 0.0});
  const std::uint64_t stream = mix_seed(config.seed, fnv1a(name_prefix));
  std::uint64_t index = 0;
  const std::pair<FlightClass, int> plan[] = {{FlightClass::certain_safe, counts.certain_safe},
                                              {FlightClass::uncertain_safe, counts.uncertain_safe},
                                              {FlightClass::uncertain_unsafe, counts.uncertain_unsafe},
                                              {FlightClass::certain_unsafe, counts.certain_unsafe}};
  for (const auto& [cls, n] : plan) {
    for (int i = 0; i < n; ++i) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_%04d", i);
      const std::string id = name_prefix + class_code(cls) + suffix;
      Rng rng(mix_seed(stream, index++));
      data.flights.push_back(make_flight(config, cls, id, rng));
    }
  }
  return data;
}

std::string anomalies_to_json_text(const SynthDataset& data) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& f : data.flights) {
    nlohmann::ordered_json item;
    item["flight_id"] = f.flight_id;
    item["class"] = std::string(to_string(f.flight_class));
    if (const auto& o = f.heading.oscillation) {
      item["oscillation"] = {{"onset_s", o->onset},
                             {"end_s", o->end()},
                             {"amplitude_deg", o->amplitude},
                             {"period_s", o->period}};
    } else {
      item["oscillation"] = nullptr;
    }
    item["t_unsafe_s"] = f.distance_profile.t_unsafe ? nlohmann::ordered_json(*f.distance_profile.t_unsafe)
                                                     : nlohmann::ordered_json(nullptr);
    doc.push_back(std::move(item));
  }
  return doc.dump(1) + "\n";
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "flights");
  LabelMap labels;
  for (const auto& f : data.flights) {
    std::ofstream out(dir / "flights" / (f.flight_id + ".csv"), std::ios::binary);
    write_flight_log(out, f.log);
    labels.emplace(f.flight_id, f.labels);
  }
  {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    write_labels(out, labels);
  }
  {
    std::ofstream out(dir / "obstacles.json", std::ios::binary);
    write_obstacles(out, data.obstacles);
  }
  {
    std::ofstream out(dir / "anomalies.json", std::ios::binary);
    out << anomalies_to_json_text(data);
  }
  {
    std::ofstream out(dir / "distances.csv", std::ios::binary);
    bool header = true;
    for (const auto& f : data.flights) {
      write_distance_traces(out, f.flight_id, f.distances, header);
      header = false;
    }
  }
}

}  // namespace uavmon
