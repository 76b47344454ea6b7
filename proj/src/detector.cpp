#include "uavmon/detector.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "uavmon/csv.hpp"
#include "uavmon/errors.hpp"

namespace uavmon {

void DetectorConfig::validate() const {
  if (!(threshold > 0.0)) throw ValidationError("threshold must be positive");
  if (n_consecutive < 1) throw ValidationError("n_consecutive must be >= 1");
  if (!(critical_distance >= 0.0)) throw ValidationError("critical distance must be non-negative");
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile must be in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Calibration calibrate_threshold(std::span<const double> nominal_losses, double quantile, int bins) {
  if (nominal_losses.empty()) throw ValidationError("calibration needs at least one nominal loss");
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  Calibration c;
  c.quantile = quantile;
  c.threshold = empirical_quantile(nominal_losses, quantile);

  const auto [mn, mx] = std::minmax_element(nominal_losses.begin(), nominal_losses.end());
  const double lo = std::min(0.0, *mn);
  const double hi = *mx > lo ? *mx : lo + 1.0;
  c.histogram.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) c.histogram.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  c.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : nominal_losses) {
    auto bin = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    bin = std::clamp(bin, 0, bins - 1);
    ++c.histogram.counts[static_cast<std::size_t>(bin)];
  }
  return c;
}

StreamingDetector::StreamingDetector(const AutoencoderModel& model, const DetectorConfig& config,
                                     std::string flight_id)
    : model_(&model), config_(config) {
  config_.validate();
  report_.flight_id = std::move(flight_id);
}

std::optional<AlarmEvent> StreamingDetector::push(const HeadingWindow& window) {
  return push_loss(window.index, window.start, window.end, model_->reconstruction_loss(window.values));
}

std::optional<AlarmEvent> StreamingDetector::push_loss(int index, double start, double end, double loss) {
  if (!report_.windows.empty() && index <= report_.windows.back().index) {
    throw ValidationError("window " + std::to_string(index) + " arrived after window " +
                          std::to_string(report_.windows.back().index));
  }
  recent_.push_back(loss);
  if (recent_.size() > static_cast<std::size_t>(config_.n_consecutive)) recent_.pop_front();

  WindowLoss wl{index, start, end, loss, std::nullopt};
  std::optional<AlarmEvent> alarm;
  if (recent_.size() == static_cast<std::size_t>(config_.n_consecutive)) {
    double sum = 0.0;
    for (double l : recent_) sum += l;
    const double mean = sum / static_cast<double>(config_.n_consecutive);
    wl.rolling_mean = mean;
    if (mean > config_.threshold) {
      alarm = AlarmEvent{index, end, mean, loss};
      report_.alarms.push_back(*alarm);
      report_.flight_uncertain = true;
      if (!report_.first_alarm_time) report_.first_alarm_time = end;
    }
  }
  report_.windows.push_back(wl);
  return alarm;
}

DetectionReport detect_stream(const AutoencoderModel& model, std::span<const HeadingWindow> windows,
                              const DetectorConfig& config, const std::string& flight_id) {
  StreamingDetector det(model, config, flight_id);
  const auto losses = model.reconstruction_losses(windows);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    det.push_loss(windows[i].index, windows[i].start, windows[i].end, losses[i]);
  }
  return det.report();
}

LeadTime lead_time_analysis(const DetectionReport& report, const DistanceTrace& distances,
                            const DetectorConfig& config) {
  LeadTime lt;
  lt.first_critical_time = distances.first_below(config.critical_distance);
  if (report.first_alarm_time) {
    if (!distances.empty()) lt.distance_at_first_alarm = distances.nearest(*report.first_alarm_time);
    if (lt.first_critical_time) lt.lead_time = *lt.first_critical_time - *report.first_alarm_time;
  }
  return lt;
}

void apply_lead_time(DetectionReport& report, const DistanceTrace& distances, const DetectorConfig& config) {
  const auto lt = lead_time_analysis(report, distances, config);
  report.first_critical_time = lt.first_critical_time;
  report.lead_time = lt.lead_time;
  report.distance_at_first_alarm = lt.distance_at_first_alarm;
}

std::vector<FlightVerdict> flight_verdicts(const std::map<std::string, DetectionReport>& reports,
                                           const LabelMap& labels) {
  std::vector<std::string> no_report, no_label;
  for (const auto& [id, _] : labels) {
    if (!reports.contains(id)) no_report.push_back(id);
  }
  for (const auto& [id, _] : reports) {
    if (!labels.contains(id)) no_label.push_back(id);
  }
  if (!no_report.empty() || !no_label.empty()) {
    std::string msg = "report/label mismatch;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + what + ":";
      for (const auto& id : ids) msg += " " + id;
      msg += ";";
    };
    list("missing reports", no_report);
    list("missing labels", no_label);
    throw ValidationError(msg);
  }
  std::vector<FlightVerdict> out;
  for (const auto& [id, report] : reports) {
    const auto& l = labels.at(id);
    out.push_back({id, report.flight_uncertain, report.flight_uncertain, l.safety, l.certainty});
  }
  return out;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string report_to_json_text(const DetectionReport& r) {
  nlohmann::ordered_json doc;
  doc["flight_id"] = r.flight_id;
  doc["flight_uncertain"] = r.flight_uncertain;
  doc["first_alarm_time_s"] = opt(r.first_alarm_time);
  doc["first_critical_time_s"] = opt(r.first_critical_time);
  doc["lead_time_s"] = opt(r.lead_time);
  doc["distance_at_first_alarm_m"] = opt(r.distance_at_first_alarm);
  auto alarms = nlohmann::ordered_json::array();
  for (const auto& a : r.alarms) {
    alarms.push_back({{"window_index", a.window_index},
                      {"timestamp_s", a.timestamp},
                      {"loss", a.loss},
                      {"rolling_mean", a.rolling_mean_loss}});
  }
  doc["alarms"] = std::move(alarms);
  auto windows = nlohmann::ordered_json::array();
  for (const auto& w : r.windows) {
    windows.push_back(
        {{"index", w.index}, {"start_s", w.start}, {"end_s", w.end}, {"loss", w.loss}, {"rolling_mean", opt(w.rolling_mean)}});
  }
  doc["windows"] = std::move(windows);
  return doc.dump(1) + "\n";
}

DetectionReport report_from_json_text(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    DetectionReport r;
    r.flight_id = doc.at("flight_id").get<std::string>();
    r.flight_uncertain = doc.at("flight_uncertain").get<bool>();
    r.first_alarm_time = opt_from(doc.at("first_alarm_time_s"));
    r.first_critical_time = opt_from(doc.at("first_critical_time_s"));
    r.lead_time = opt_from(doc.at("lead_time_s"));
    r.distance_at_first_alarm = opt_from(doc.at("distance_at_first_alarm_m"));
    for (const auto& a : doc.at("alarms")) {
      r.alarms.push_back({a.at("window_index").get<int>(), a.at("timestamp_s").get<double>(),
                          a.at("rolling_mean").get<double>(), a.at("loss").get<double>()});
    }
    for (const auto& w : doc.at("windows")) {
      r.windows.push_back({w.at("index").get<int>(), w.at("start_s").get<double>(), w.at("end_s").get<double>(),
                           w.at("loss").get<double>(), opt_from(w.at("rolling_mean"))});
    }
    if (r.flight_uncertain != !r.alarms.empty()) throw ParseError("report: flight_uncertain disagrees with alarms");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid detection report: ") + e.what());
  }
}

std::string alarms_csv_header() { return "flight_id,window_index,timestamp_s,loss,rolling_mean"; }

void write_alarm_row(std::ostream& out, const std::string& flight_id, const AlarmEvent& a) {
  out << flight_id << ',' << a.window_index << ',' << csv::format_double(a.timestamp) << ','
      << csv::format_double(a.loss) << ',' << csv::format_double(a.rolling_mean_loss) << '\n';
}

}  // namespace uavmon
