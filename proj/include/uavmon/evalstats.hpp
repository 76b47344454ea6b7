#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uavmon/detector.hpp"
#include "uavmon/flightdata.hpp"

namespace uavmon {

// Rows [TP, FP] / [FN, TN]; positive = uncertain or unsafe depending on axis.
struct ConfusionMatrix {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class GroundTruth { certainty, safety };
std::string_view to_string(GroundTruth g);
GroundTruth parse_ground_truth(std::string_view token);

ConfusionMatrix confusion(std::span<const FlightVerdict> verdicts, GroundTruth axis);
// Keyed predictions vs keyed truth; throws if the id sets differ.
ConfusionMatrix confusion(const std::map<std::string, bool>& predicted, const std::map<std::string, bool>& truth);

// Absent when the denominator is zero.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Metrics metrics(const ConfusionMatrix& cm);

// Inverse standard normal CDF.
double normal_quantile(double p);

struct WilsonInterval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
  double gamma = 0.95;
};

WilsonInterval wilson(long successes, long trials, double gamma = 0.95);

struct SafetyCertaintyCounts {
  long unsafe_uncertain = 0;
  long unsafe_certain = 0;
  long safe_uncertain = 0;
  long safe_certain = 0;
  long total() const { return unsafe_uncertain + unsafe_certain + safe_uncertain + safe_certain; }
};

SafetyCertaintyCounts count_labels(const LabelMap& labels);

struct AgreementStats {
  SafetyCertaintyCounts counts;
  WilsonInterval agreement;
  std::optional<WilsonInterval> unsafe_given_uncertain;
  std::optional<WilsonInterval> uncertain_given_unsafe;
};

AgreementStats agreement_stats(const SafetyCertaintyCounts& counts, double gamma = 0.95);
AgreementStats agreement_stats(const LabelMap& labels, double gamma = 0.95);

struct EvalConfig {
  double gamma = 0.95;
  GroundTruth primary_axis = GroundTruth::certainty;
};

struct LeadTimeSummary {
  long flights = 0;
  std::optional<double> mean_lead_time;
  std::optional<double> median_lead_time;
  std::optional<double> mean_distance_at_first_alarm;
};

LeadTimeSummary summarize_lead_times(std::span<const std::optional<double>> lead_times,
                                     std::span<const std::optional<double>> distances);

struct EvaluationDocument {
  EvalConfig config;
  long flights = 0;
  AgreementStats agreement;
  ConfusionMatrix uncertainty_cm;
  Metrics uncertainty_metrics;
  ConfusionMatrix unsafety_cm;
  Metrics unsafety_metrics;
  LeadTimeSummary lead_times;
  std::vector<FlightVerdict> verdicts;
  std::map<std::string, DetectionReport> reports;
};

EvaluationDocument dataset_report(const std::map<std::string, DetectionReport>& reports, const LabelMap& labels,
                                  const EvalConfig& config = {});

std::string evaluation_to_json_text(const EvaluationDocument& doc);

// Flat tables mirroring the published layout.
void write_agreement_confusion_csv(std::ostream& out, const SafetyCertaintyCounts& counts);
void write_agreement_stats_csv(std::ostream& out, const AgreementStats& stats);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm, GroundTruth axis);
void write_metrics_csv(std::ostream& out, const EvaluationDocument& doc);
void write_flights_csv(std::ostream& out, const EvaluationDocument& doc);

// One decimal place, e.g. "86.8%". "n/a" when absent.
std::string percent(std::optional<double> p);

}  // namespace uavmon
