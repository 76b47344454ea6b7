#include "uavmon/flightdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "uavmon/csv.hpp"

namespace uavmon {

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::desired: return "desired";
    case Channel::safe: return "safe";
    case Channel::position: return "position";
  }
  return "?";
}

Channel parse_channel(std::string_view token) {
  token = csv::trim(token);
  if (token == "desired") return Channel::desired;
  if (token == "safe") return Channel::safe;
  if (token == "position") return Channel::position;
  throw ValidationError("unknown channel '" + std::string(token) + "'");
}

const std::vector<LogRecord>& FlightLog::channel(Channel c) const {
  switch (c) {
    case Channel::desired: return desired;
    case Channel::safe: return safe;
    case Channel::position: break;
  }
  return position;
}

std::vector<LogRecord>& FlightLog::channel(Channel c) {
  return const_cast<std::vector<LogRecord>&>(std::as_const(*this).channel(c));
}

namespace {

constexpr std::string_view kLogHeader = "timestamp_s,channel,x,y,z,r_deg";

void apply_metadata(FlightLog& log, std::string_view line, std::size_t line_no) {
  line = csv::trim(line.substr(1));
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) return;  // plain comment
  const auto key = csv::trim(line.substr(0, eq));
  const auto value = csv::trim(line.substr(eq + 1));
  if (key == "flight_id") {
    log.flight_id = std::string(value);
  } else if (key == "test_id") {
    log.test_id = std::string(value);
  } else if (key == "execution_index") {
    const auto idx = csv::parse_int(value, line_no);
    if (idx < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative execution_index");
    log.execution_index = static_cast<int>(idx);
  }
}

}  // namespace

FlightLog parse_flight_log(std::istream& in, const LogFormat& format) {
  FlightLog log;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = !format.header;
  std::vector<std::pair<LogRecord, std::size_t>> rows;

  while (csv::read_line(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      apply_metadata(log, trimmed, line_no);
      continue;
    }
    if (!header_seen) {
      if (trimmed != kLogHeader) {
        throw ParseError("expected header '" + std::string(kLogHeader) + "'", line_no);
      }
      header_seen = true;
      continue;
    }
    const auto fields = csv::split(trimmed, format.delimiter);
    if (fields.size() != 6) {
      throw ParseError("expected 6 fields, got " + std::to_string(fields.size()), line_no);
    }
    LogRecord rec;
    rec.timestamp = csv::parse_double(fields[0], line_no);
    try {
      rec.channel = parse_channel(fields[1]);
    } catch (const ValidationError&) {
      throw ParseError("unknown channel '" + std::string(fields[1]) + "'", line_no);
    }
    rec.x = csv::parse_double(fields[2], line_no);
    rec.y = csv::parse_double(fields[3], line_no);
    rec.z = csv::parse_double(fields[4], line_no);
    rec.r = csv::parse_double(fields[5], line_no);
    if (!std::isfinite(rec.timestamp) || !std::isfinite(rec.x) || !std::isfinite(rec.y) ||
        !std::isfinite(rec.z) || !std::isfinite(rec.r)) {
      throw ValidationError("line " + std::to_string(line_no) + ": non-finite value");
    }
    if (rec.r < -180.0 || rec.r > 180.0) {
      throw ValidationError("line " + std::to_string(line_no) + ": heading " +
                            csv::format_double(rec.r) + " outside [-180, 180]");
    }
    rows.emplace_back(rec, line_no);
  }
  if (!header_seen) throw ParseError("missing header");

  double origin = std::numeric_limits<double>::infinity();
  for (const auto& [rec, _] : rows) origin = std::min(origin, rec.timestamp);

  for (auto& [rec, ln] : rows) {
    rec.timestamp -= origin;
    auto& ch = log.channel(rec.channel);
    if (!ch.empty() && !(rec.timestamp > ch.back().timestamp)) {
      throw ValidationError("line " + std::to_string(ln) + ": timestamp not strictly increasing on channel " +
                            std::string(to_string(rec.channel)));
    }
    ch.push_back(rec);
  }
  if (log.safe.empty()) throw ValidationError("flight log has no safe waypoint records");
  return log;
}

void write_flight_log(std::ostream& out, const FlightLog& log) {
  if (!log.flight_id.empty()) out << "# flight_id=" << log.flight_id << '\n';
  if (!log.test_id.empty()) out << "# test_id=" << log.test_id << '\n';
  out << "# execution_index=" << log.execution_index << '\n';
  out << kLogHeader << '\n';

  // Interleave channels by timestamp; ties keep channel order.
  std::vector<const LogRecord*> all;
  all.reserve(log.record_count());
  for (auto c : {Channel::desired, Channel::safe, Channel::position}) {
    for (const auto& r : log.channel(c)) all.push_back(&r);
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const LogRecord* a, const LogRecord* b) { return a->timestamp < b->timestamp; });
  for (const auto* r : all) {
    out << csv::format_double(r->timestamp) << ',' << to_string(r->channel) << ',' << csv::format_double(r->x)
        << ',' << csv::format_double(r->y) << ',' << csv::format_double(r->z) << ','
        << csv::format_double(r->r) << '\n';
  }
}

FlightLog load_flight_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open flight log " + path.string());
  FlightLog log = parse_flight_log(in);
  if (log.flight_id.empty()) log.flight_id = path.stem().string();
  return log;
}

void validate(const ObstacleBox& box) {
  const bool finite = std::isfinite(box.cx) && std::isfinite(box.cy) && std::isfinite(box.rotation);
  if (!finite) throw ValidationError("obstacle has non-finite coordinates");
  if (!(box.length > 0.0) || !(box.width > 0.0) || !(box.height > 0.0)) {
    throw ValidationError("obstacle dimensions must be strictly positive");
  }
}

std::vector<ObstacleBox> parse_obstacles(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("obstacles: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("obstacles: expected a JSON array");
  std::vector<ObstacleBox> boxes;
  for (const auto& item : doc) {
    if (!item.is_object()) throw ParseError("obstacles: expected objects");
    auto number = [&](const char* key) {
      const auto it = item.find(key);
      if (it == item.end() || !it->is_number()) {
        throw ParseError(std::string("obstacles: missing numeric key '") + key + "'");
      }
      return it->get<double>();
    };
    ObstacleBox box{number("cx"), number("cy"), number("length"), number("width"), number("height"),
                    number("rotation")};
    validate(box);
    boxes.push_back(box);
  }
  return boxes;
}

std::vector<ObstacleBox> load_obstacles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open obstacles file " + path.string());
  return parse_obstacles(in);
}

void write_obstacles(std::ostream& out, const std::vector<ObstacleBox>& boxes) {
  auto doc = nlohmann::json::array();
  for (const auto& b : boxes) {
    doc.push_back({{"cx", b.cx},
                   {"cy", b.cy},
                   {"length", b.length},
                   {"width", b.width},
                   {"height", b.height},
                   {"rotation", b.rotation}});
  }
  out << doc.dump(2) << '\n';
}

std::string_view to_string(Safety s) { return s == Safety::safe ? "safe" : "unsafe"; }
std::string_view to_string(Certainty c) { return c == Certainty::certain ? "certain" : "uncertain"; }

Safety parse_safety(std::string_view token) {
  token = csv::trim(token);
  if (token == "safe") return Safety::safe;
  if (token == "unsafe") return Safety::unsafe;
  throw ValidationError("unknown safety label '" + std::string(token) + "'");
}

Certainty parse_certainty(std::string_view token) {
  token = csv::trim(token);
  if (token == "certain") return Certainty::certain;
  if (token == "uncertain") return Certainty::uncertain;
  throw ValidationError("unknown certainty label '" + std::string(token) + "'");
}

LabelMap parse_labels(std::istream& in) {
  LabelMap labels;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (csv::read_line(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (trimmed == "flight_id,safety,certainty") continue;
    }
    const auto fields = csv::split(trimmed);
    if (fields.size() != 3) throw ParseError("expected 3 fields", line_no);
    FlightLabels l;
    l.flight_id = std::string(csv::trim(fields[0]));
    if (l.flight_id.empty()) throw ParseError("empty flight_id", line_no);
    try {
      l.safety = parse_safety(fields[1]);
      l.certainty = parse_certainty(fields[2]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!labels.emplace(l.flight_id, l).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate flight_id '" + l.flight_id + "'");
    }
  }
  return labels;
}

LabelMap load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open labels file " + path.string());
  return parse_labels(in);
}

void write_labels(std::ostream& out, const LabelMap& labels) {
  out << "flight_id,safety,certainty\n";
  for (const auto& [id, l] : labels) {
    out << id << ',' << to_string(l.safety) << ',' << to_string(l.certainty) << '\n';
  }
}

}  // namespace uavmon
