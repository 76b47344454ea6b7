#pragma once

#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uavmon/autoenc.hpp"
#include "uavmon/flightdata.hpp"
#include "uavmon/geometry.hpp"
#include "uavmon/preprocess.hpp"

namespace uavmon {

struct DetectorConfig {
  double threshold = 0.3;
  int n_consecutive = 4;
  double critical_distance = 1.0;  // m

  void validate() const;
};

struct AlarmEvent {
  int window_index = 0;
  double timestamp = 0.0;  // window end
  double rolling_mean_loss = 0.0;
  double loss = 0.0;
};

struct WindowLoss {
  int index = 0;
  double start = 0.0;
  double end = 0.0;
  double loss = 0.0;
  std::optional<double> rolling_mean;  // absent during warm-up
};

struct DetectionReport {
  std::string flight_id;
  std::vector<WindowLoss> windows;
  std::vector<AlarmEvent> alarms;
  bool flight_uncertain = false;
  std::optional<double> first_alarm_time;
  std::optional<double> first_critical_time;
  std::optional<double> lead_time;
  std::optional<double> distance_at_first_alarm;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<long> counts;
};

struct Calibration {
  double threshold = 0.0;
  double quantile = 0.0;
  Histogram histogram;
};

// Linear-interpolated empirical quantile of the nominal losses, plus a
// histogram of them for inspection.
Calibration calibrate_threshold(std::span<const double> nominal_losses, double quantile = 0.999, int bins = 50);
double empirical_quantile(std::span<const double> values, double q);

// Per-flight streaming detector. Windows must arrive with strictly increasing
// indices; the decision for window i only depends on windows <= i.
class StreamingDetector {
 public:
  StreamingDetector(const AutoencoderModel& model, const DetectorConfig& config, std::string flight_id);

  std::optional<AlarmEvent> push(const HeadingWindow& window);
  // Same as push, for a precomputed loss.
  std::optional<AlarmEvent> push_loss(int index, double start, double end, double loss);

  const DetectionReport& report() const { return report_; }

 private:
  const AutoencoderModel* model_;
  DetectorConfig config_;
  DetectionReport report_;
  std::deque<double> recent_;
};

DetectionReport detect_stream(const AutoencoderModel& model, std::span<const HeadingWindow> windows,
                              const DetectorConfig& config, const std::string& flight_id);

struct LeadTime {
  std::optional<double> first_critical_time;
  std::optional<double> lead_time;
  std::optional<double> distance_at_first_alarm;
};

// Lead time = first time the distance drops below critical_distance minus the
// first alarm time (signed). Distance at first alarm is the nearest trace sample.
LeadTime lead_time_analysis(const DetectionReport& report, const DistanceTrace& distances,
                            const DetectorConfig& config);
void apply_lead_time(DetectionReport& report, const DistanceTrace& distances, const DetectorConfig& config);

struct FlightVerdict {
  std::string flight_id;
  bool predicted_uncertain = false;
  bool predicted_unsafe = false;
  Safety safety = Safety::safe;
  Certainty certainty = Certainty::certain;
};

// The same alarm signal predicts both uncertainty and unsafety. Throws if a
// labeled flight has no report or a report has no label.
std::vector<FlightVerdict> flight_verdicts(const std::map<std::string, DetectionReport>& reports,
                                           const LabelMap& labels);

std::string report_to_json_text(const DetectionReport& report);
DetectionReport report_from_json_text(const std::string& text);

// flight_id,window_index,timestamp_s,loss,rolling_mean
std::string alarms_csv_header();
void write_alarm_row(std::ostream& out, const std::string& flight_id, const AlarmEvent& alarm);

}  // namespace uavmon
