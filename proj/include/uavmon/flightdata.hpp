#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "uavmon/errors.hpp"

namespace uavmon {

enum class Channel { desired, safe, position };

std::string_view to_string(Channel c);
Channel parse_channel(std::string_view token);  // throws ValidationError

struct LogRecord {
  double timestamp = 0.0;  // seconds since flight start
  Channel channel = Channel::safe;
  double x = 0.0, y = 0.0, z = 0.0;
  double r = 0.0;  // heading, degrees, raw range [-180, 180]
};

struct FlightLog {
  std::string flight_id;
  std::string test_id;
  int execution_index = 0;
  std::vector<LogRecord> desired;
  std::vector<LogRecord> safe;
  std::vector<LogRecord> position;

  const std::vector<LogRecord>& channel(Channel c) const;
  std::vector<LogRecord>& channel(Channel c);
  std::size_t record_count() const { return desired.size() + safe.size() + position.size(); }
};

struct LogFormat {
  char delimiter = ',';
  bool header = true;
};

// Flight log CSV: optional "# key=value" metadata lines (flight_id, test_id,
// execution_index), then header `timestamp_s,channel,x,y,z,r_deg` and one row
// per record with channels interleaved. Timestamps are shifted so the earliest
// record is at t = 0.
FlightLog parse_flight_log(std::istream& in, const LogFormat& format = {});
void write_flight_log(std::ostream& out, const FlightLog& log);

// Reads a log file; flight_id defaults to the file stem when not in metadata.
FlightLog load_flight_log(const std::filesystem::path& path);

struct ObstacleBox {
  double cx = 0.0, cy = 0.0;
  double length = 1.0, width = 1.0, height = 1.0;
  double rotation = 0.0;  // degrees, yaw about the vertical axis
};

std::vector<ObstacleBox> parse_obstacles(std::istream& in);
std::vector<ObstacleBox> load_obstacles(const std::filesystem::path& path);
void write_obstacles(std::ostream& out, const std::vector<ObstacleBox>& boxes);
void validate(const ObstacleBox& box);

enum class Safety { safe, unsafe };
enum class Certainty { certain, uncertain };

std::string_view to_string(Safety s);
std::string_view to_string(Certainty c);
Safety parse_safety(std::string_view token);
Certainty parse_certainty(std::string_view token);

struct FlightLabels {
  std::string flight_id;
  Safety safety = Safety::safe;
  Certainty certainty = Certainty::certain;
};

using LabelMap = std::map<std::string, FlightLabels>;

LabelMap parse_labels(std::istream& in);
LabelMap load_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const LabelMap& labels);

}  // namespace uavmon
