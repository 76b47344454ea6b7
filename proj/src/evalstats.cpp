#include "uavmon/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "uavmon/csv.hpp"
#include "uavmon/errors.hpp"

namespace uavmon {

std::string_view to_string(GroundTruth g) { return g == GroundTruth::certainty ? "certainty" : "safety"; }

GroundTruth parse_ground_truth(std::string_view token) {
  if (token == "certainty") return GroundTruth::certainty;
  if (token == "safety") return GroundTruth::safety;
  throw ValidationError("ground truth must be 'certainty' or 'safety'");
}

namespace {

void tally(ConfusionMatrix& cm, bool predicted, bool actual) {
  if (predicted && actual) ++cm.tp;
  else if (predicted) ++cm.fp;
  else if (actual) ++cm.fn;
  else ++cm.tn;
}

}  // namespace

ConfusionMatrix confusion(std::span<const FlightVerdict> verdicts, GroundTruth axis) {
  ConfusionMatrix cm;
  for (const auto& v : verdicts) {
    if (axis == GroundTruth::certainty) {
      tally(cm, v.predicted_uncertain, v.certainty == Certainty::uncertain);
    } else {
      tally(cm, v.predicted_unsafe, v.safety == Safety::unsafe);
    }
  }
  return cm;
}

ConfusionMatrix confusion(const std::map<std::string, bool>& predicted, const std::map<std::string, bool>& truth) {
  std::string missing;
  for (const auto& [id, _] : predicted) {
    if (!truth.contains(id)) missing += " " + id;
  }
  for (const auto& [id, _] : truth) {
    if (!predicted.contains(id)) missing += " " + id;
  }
  if (!missing.empty()) throw ValidationError("flight id mismatch:" + missing);
  ConfusionMatrix cm;
  for (const auto& [id, p] : predicted) tally(cm, p, truth.at(id));
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  if (cm.total() > 0) m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must be in (0, 1)");
  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // ... refined with one Halley step against erfc to full double precision.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

WilsonInterval wilson(long successes, long trials, double gamma) {
  if (trials <= 0) throw ValidationError("wilson: trials must be positive");
  if (successes < 0 || successes > trials) throw ValidationError("wilson: successes out of range");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("wilson: gamma must be in (0, 1)");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z = normal_quantile(0.5 + gamma / 2.0);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  WilsonInterval w;
  w.point = p;
  w.gamma = gamma;
  w.low = successes == 0 ? 0.0 : std::clamp(center - half, 0.0, p);
  w.high = successes == trials ? 1.0 : std::clamp(center + half, p, 1.0);
  return w;
}

SafetyCertaintyCounts count_labels(const LabelMap& labels) {
  SafetyCertaintyCounts c;
  for (const auto& [_, l] : labels) {
    const bool unsafe = l.safety == Safety::unsafe;
    const bool uncertain = l.certainty == Certainty::uncertain;
    if (unsafe && uncertain) ++c.unsafe_uncertain;
    else if (unsafe) ++c.unsafe_certain;
    else if (uncertain) ++c.safe_uncertain;
    else ++c.safe_certain;
  }
  return c;
}

AgreementStats agreement_stats(const SafetyCertaintyCounts& counts, double gamma) {
  if (counts.total() <= 0) throw ValidationError("agreement statistics need at least one flight");
  AgreementStats s;
  s.counts = counts;
  s.agreement = wilson(counts.unsafe_uncertain + counts.safe_certain, counts.total(), gamma);
  const long uncertain = counts.unsafe_uncertain + counts.safe_uncertain;
  const long unsafe = counts.unsafe_uncertain + counts.unsafe_certain;
  if (uncertain > 0) s.unsafe_given_uncertain = wilson(counts.unsafe_uncertain, uncertain, gamma);
  if (unsafe > 0) s.uncertain_given_unsafe = wilson(counts.unsafe_uncertain, unsafe, gamma);
  return s;
}

AgreementStats agreement_stats(const LabelMap& labels, double gamma) {
  return agreement_stats(count_labels(labels), gamma);
}

LeadTimeSummary summarize_lead_times(std::span<const std::optional<double>> lead_times,
                                     std::span<const std::optional<double>> distances) {
  LeadTimeSummary s;
  std::vector<double> leads;
  double dist_sum = 0.0;
  long dist_n = 0;
  for (std::size_t i = 0; i < lead_times.size(); ++i) {
    if (!lead_times[i]) continue;
    leads.push_back(*lead_times[i]);
    if (i < distances.size() && distances[i]) {
      dist_sum += *distances[i];
      ++dist_n;
    }
  }
  s.flights = static_cast<long>(leads.size());
  if (!leads.empty()) {
    double sum = 0.0;
    for (double l : leads) sum += l;
    s.mean_lead_time = sum / static_cast<double>(leads.size());
    std::sort(leads.begin(), leads.end());
    const std::size_t mid = leads.size() / 2;
    s.median_lead_time = leads.size() % 2 ? leads[mid] : 0.5 * (leads[mid - 1] + leads[mid]);
  }
  if (dist_n > 0) s.mean_distance_at_first_alarm = dist_sum / static_cast<double>(dist_n);
  return s;
}

EvaluationDocument dataset_report(const std::map<std::string, DetectionReport>& reports, const LabelMap& labels,
                                  const EvalConfig& config) {
  if (reports.empty() && labels.empty()) throw ValidationError("evaluation needs at least one flight");
  EvaluationDocument doc;
  doc.config = config;
  doc.verdicts = flight_verdicts(reports, labels);
  doc.flights = static_cast<long>(doc.verdicts.size());
  doc.agreement = agreement_stats(labels, config.gamma);
  doc.uncertainty_cm = confusion(doc.verdicts, GroundTruth::certainty);
  doc.uncertainty_metrics = metrics(doc.uncertainty_cm);
  doc.unsafety_cm = confusion(doc.verdicts, GroundTruth::safety);
  doc.unsafety_metrics = metrics(doc.unsafety_cm);
  std::vector<std::optional<double>> leads, dists;
  for (const auto& [_, r] : reports) {
    leads.push_back(r.lead_time);
    dists.push_back(r.distance_at_first_alarm);
  }
  doc.lead_times = summarize_lead_times(leads, dists);
  doc.reports = reports;
  return doc;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson to_json(const WilsonInterval& w) {
  return {{"point", w.point}, {"low", w.low}, {"high", w.high}, {"gamma", w.gamma}};
}

ojson to_json(const std::optional<WilsonInterval>& w) { return w ? to_json(*w) : ojson(nullptr); }

ojson to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

ojson to_json(const Metrics& m) {
  return {{"accuracy", opt(m.accuracy)}, {"precision", opt(m.precision)}, {"recall", opt(m.recall)}, {"f1", opt(m.f1)}};
}

}  // namespace

std::string evaluation_to_json_text(const EvaluationDocument& doc) {
  ojson j;
  j["flights"] = doc.flights;
  j["gamma"] = doc.config.gamma;
  j["primary_ground_truth"] = std::string(to_string(doc.config.primary_axis));
  const auto& c = doc.agreement.counts;
  j["safety_certainty"] = {
      {"counts",
       {{"unsafe_uncertain", c.unsafe_uncertain},
        {"unsafe_certain", c.unsafe_certain},
        {"safe_uncertain", c.safe_uncertain},
        {"safe_certain", c.safe_certain}}},
      {"agreement_accuracy", to_json(doc.agreement.agreement)},
      {"p_unsafe_given_uncertain", to_json(doc.agreement.unsafe_given_uncertain)},
      {"p_uncertain_given_unsafe", to_json(doc.agreement.uncertain_given_unsafe)},
  };
  j["uncertainty_detection"] = {{"confusion", to_json(doc.uncertainty_cm)}, {"metrics", to_json(doc.uncertainty_metrics)}};
  j["unsafety_prediction"] = {{"confusion", to_json(doc.unsafety_cm)}, {"metrics", to_json(doc.unsafety_metrics)}};
  j["lead_time"] = {{"flights", doc.lead_times.flights},
                    {"mean_s", opt(doc.lead_times.mean_lead_time)},
                    {"median_s", opt(doc.lead_times.median_lead_time)},
                    {"mean_distance_at_first_alarm_m", opt(doc.lead_times.mean_distance_at_first_alarm)}};
  auto flights = ojson::array();
  for (const auto& v : doc.verdicts) {
    const auto& r = doc.reports.at(v.flight_id);
    flights.push_back({{"flight_id", v.flight_id},
                       {"safety", std::string(to_string(v.safety))},
                       {"certainty", std::string(to_string(v.certainty))},
                       {"predicted_uncertain", v.predicted_uncertain},
                       {"predicted_unsafe", v.predicted_unsafe},
                       {"alarms", r.alarms.size()},
                       {"first_alarm_time_s", opt(r.first_alarm_time)},
                       {"lead_time_s", opt(r.lead_time)},
                       {"distance_at_first_alarm_m", opt(r.distance_at_first_alarm)}});
  }
  j["per_flight"] = std::move(flights);
  return j.dump(1) + "\n";
}

std::string percent(std::optional<double> p) {
  if (!p) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", *p * 100.0);
  return buf;
}

namespace {

std::string share(long count, long total) {
  return std::to_string(count) + " (" + percent(static_cast<double>(count) / static_cast<double>(total)) + ")";
}

std::string fmt(std::optional<double> v) { return v ? csv::format_double(*v) : ""; }

}  // namespace

void write_agreement_confusion_csv(std::ostream& out, const SafetyCertaintyCounts& c) {
  const long total = c.total();
  out << "unsafe,uncertain_true,uncertain_false,sum\n";
  out << "true," << share(c.unsafe_uncertain, total) << ',' << share(c.unsafe_certain, total) << ','
      << share(c.unsafe_uncertain + c.unsafe_certain, total) << '\n';
  out << "false," << share(c.safe_uncertain, total) << ',' << share(c.safe_certain, total) << ','
      << share(c.safe_uncertain + c.safe_certain, total) << '\n';
  out << "sum," << share(c.unsafe_uncertain + c.safe_uncertain, total) << ','
      << share(c.unsafe_certain + c.safe_certain, total) << ',' << share(total, total) << '\n';
}

void write_agreement_stats_csv(std::ostream& out, const AgreementStats& s) {
  auto interval = [](const std::optional<WilsonInterval>& w) {
    if (!w) return std::string("n/a");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[%.1f, %.1f]%%", w->low * 100.0, w->high * 100.0);
    return std::string(buf);
  };
  auto point = [](const std::optional<WilsonInterval>& w) {
    return w ? percent(w->point) : std::string("n/a");
  };
  out << "metric,value\n";
  out << "agreement_accuracy," << percent(s.agreement.point) << '\n';
  out << "p_unsafe_given_uncertain," << point(s.unsafe_given_uncertain) << '\n';
  out << "conf_interval_unsafe_given_uncertain,\"" << interval(s.unsafe_given_uncertain) << "\"\n";
  out << "p_uncertain_given_unsafe," << point(s.uncertain_given_unsafe) << '\n';
  out << "conf_interval_uncertain_given_unsafe,\"" << interval(s.uncertain_given_unsafe) << "\"\n";
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm, GroundTruth axis) {
  const char* label = axis == GroundTruth::certainty ? "uncertain" : "unsafe";
  out << "predicted," << label << "_true," << label << "_false\n";
  out << "true," << cm.tp << ',' << cm.fp << '\n';
  out << "false," << cm.fn << ',' << cm.tn << '\n';
}

void write_metrics_csv(std::ostream& out, const EvaluationDocument& doc) {
  out << "label,accuracy,precision,recall,f1\n";
  auto row = [&](const char* label, const Metrics& m) {
    out << label << ',' << percent(m.accuracy) << ',' << percent(m.precision) << ',' << percent(m.recall) << ','
        << percent(m.f1) << '\n';
  };
  if (doc.config.primary_axis == GroundTruth::certainty) {
    row("uncertainty", doc.uncertainty_metrics);
    row("unsafety", doc.unsafety_metrics);
  } else {
    row("unsafety", doc.unsafety_metrics);
    row("uncertainty", doc.uncertainty_metrics);
  }
}

void write_flights_csv(std::ostream& out, const EvaluationDocument& doc) {
  out << "flight_id,safety,certainty,predicted_uncertain,alarms,first_alarm_time_s,lead_time_s,"
         "distance_at_first_alarm_m\n";
  for (const auto& v : doc.verdicts) {
    const auto& r = doc.reports.at(v.flight_id);
    out << v.flight_id << ',' << to_string(v.safety) << ',' << to_string(v.certainty) << ','
        << (v.predicted_uncertain ? "true" : "false") << ',' << r.alarms.size() << ',' << fmt(r.first_alarm_time)
        << ',' << fmt(r.lead_time) << ',' << fmt(r.distance_at_first_alarm) << '\n';
  }
}

}  // namespace uavmon
