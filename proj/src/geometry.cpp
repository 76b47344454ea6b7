#include "uavmon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace uavmon {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double euclidean(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Trajectory::Trajectory(std::vector<TrajectoryPoint> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ValidationError("trajectory needs at least 2 points");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].t > points_[i - 1].t)) throw ValidationError("trajectory timestamps not strictly increasing");
  }
}

Trajectory Trajectory::from_log(const FlightLog& log) {
  std::vector<TrajectoryPoint> pts;
  pts.reserve(log.position.size());
  for (const auto& r : log.position) pts.push_back({r.timestamp, {r.x, r.y, r.z}});
  return Trajectory(std::move(pts));
}

std::vector<Point3> Trajectory::positions() const {
  std::vector<Point3> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.p);
  return out;
}

double point_box_distance(double px, double py, const ObstacleBox& box) {
  const double yaw = box.rotation * std::numbers::pi / 180.0;
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double dx = px - box.cx, dy = py - box.cy;
  const double local_x = dx * c + dy * s;
  const double local_y = -dx * s + dy * c;
  const double qx = std::max(std::abs(local_x) - 0.5 * box.length, 0.0);
  const double qy = std::max(std::abs(local_y) - 0.5 * box.width, 0.0);
  return std::hypot(qx, qy);
}

DistanceTrace::DistanceTrace(std::vector<double> times, std::vector<double> distances)
    : times_(std::move(times)), distances_(std::move(distances)) {
  if (times_.size() != distances_.size()) throw ValidationError("distance trace size mismatch");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw ValidationError("distance trace times not strictly increasing");
  }
}

double DistanceTrace::minimum() const {
  double m = kInf;
  for (double d : distances_) m = std::min(m, d);
  return m;
}

double DistanceTrace::at(double t) const {
  if (empty()) return kInf;
  if (t <= times_.front()) return distances_.front();
  if (t >= times_.back()) return distances_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto hi = static_cast<std::size_t>(it - times_.begin());
  const auto lo = hi - 1;
  const double d0 = distances_[lo], d1 = distances_[hi];
  if (std::isinf(d0) || std::isinf(d1)) return std::min(d0, d1);
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return d0 + w * (d1 - d0);
}

double DistanceTrace::nearest(double t) const {
  if (empty()) return kInf;
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return distances_.front();
  if (it == times_.end()) return distances_.back();
  const auto hi = static_cast<std::size_t>(it - times_.begin());
  return (t - times_[hi - 1] <= times_[hi] - t) ? distances_[hi - 1] : distances_[hi];
}

double DistanceTrace::min_over(double t0, double t1) const {
  if (empty()) return kInf;
  const double a = std::max(t0, times_.front());
  const double b = std::min(t1, times_.back());
  if (a > b) return kInf;
  double m = std::min(at(a), at(b));
  auto it = std::lower_bound(times_.begin(), times_.end(), a);
  for (; it != times_.end() && *it <= b; ++it) {
    m = std::min(m, distances_[static_cast<std::size_t>(it - times_.begin())]);
  }
  return m;
}

std::optional<double> DistanceTrace::first_below(double threshold) const {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (distances_[i] < threshold) return times_[i];
  }
  return std::nullopt;
}

ObstacleDistance min_obstacle_distance(const Trajectory& traj, std::span<const ObstacleBox> obstacles) {
  if (obstacles.empty()) return {kInf, DistanceTrace{}};
  std::vector<double> times, dists;
  times.reserve(traj.size());
  dists.reserve(traj.size());
  double overall = kInf;
  for (const auto& tp : traj.points()) {
    double d = kInf;
    for (const auto& box : obstacles) d = std::min(d, point_box_distance(tp.p.x, tp.p.y, box));
    times.push_back(tp.t);
    dists.push_back(d);
    overall = std::min(overall, d);
  }
  return {overall, DistanceTrace(std::move(times), std::move(dists))};
}

double sum_dist(std::span<const Point3> points, std::span<const ObstacleBox> obstacles) {
  if (obstacles.empty()) throw ValidationError("sum_dist needs at least one obstacle");
  if (points.empty()) throw ValidationError("sum_dist needs at least one point");
  double best = kInf;
  for (const auto& p : points) {
    double total = 0.0;
    for (const auto& box : obstacles) total += point_box_distance(p.x, p.y, box);
    best = std::min(best, total);
  }
  return best;
}

double sum_dist(const Trajectory& traj, std::span<const ObstacleBox> obstacles) {
  const auto pts = traj.positions();
  return sum_dist(pts, obstacles);
}

double dtw(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw ValidationError("dtw of an empty sequence");
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  // Accumulate from the path start so every cell equals a left-to-right path sum.
  prev[0] = euclidean(a[0], b[0]);
  for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + euclidean(a[0], b[j]);
  for (std::size_t i = 1; i < a.size(); ++i) {
    cur[0] = prev[0] + euclidean(a[i], b[0]);
    for (std::size_t j = 1; j < m; ++j) {
      cur[j] = std::min({prev[j], cur[j - 1], prev[j - 1]}) + euclidean(a[i], b[j]);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

std::vector<Point3> resample_by_arc_length(std::span<const Point3> points, int n) {
  if (points.empty()) throw ValidationError("cannot resample an empty trajectory");
  if (n < 2) throw ValidationError("resample count must be >= 2");
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) cum[i] = cum[i - 1] + euclidean(points[i - 1], points[i]);
  const double total = cum.back();
  std::vector<Point3> out(static_cast<std::size_t>(n), points.front());
  if (total <= 0.0) return out;

  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = (k == n - 1) ? total : total * k / (n - 1);
    while (seg + 2 < points.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double w = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    const auto& p0 = points[seg];
    const auto& p1 = points[seg + 1];
    out[static_cast<std::size_t>(k)] = {p0.x + w * (p1.x - p0.x), p0.y + w * (p1.y - p0.y), p0.z + w * (p1.z - p0.z)};
  }
  return out;
}

std::vector<Point3> average_trajectory(std::span<const Trajectory> trajs, int resample_n) {
  if (trajs.empty()) throw ValidationError("average of zero trajectories");
  std::vector<Point3> sum(static_cast<std::size_t>(resample_n));
  for (const auto& t : trajs) {
    const auto pts = t.positions();
    const auto r = resample_by_arc_length(pts, resample_n);
    for (std::size_t i = 0; i < r.size(); ++i) {
      sum[i].x += r[i].x;
      sum[i].y += r[i].y;
      sum[i].z += r[i].z;
    }
  }
  const double inv = 1.0 / static_cast<double>(trajs.size());
  for (auto& p : sum) p = {p.x * inv, p.y * inv, p.z * inv};
  return sum;
}

double combine_fitness(double sum_dist, double ave_dtw, double max_dtw) {
  return ave_dtw > max_dtw ? sum_dist - ave_dtw : sum_dist;
}

FitnessResult fitness_distance(std::span<const Trajectory> executions, std::span<const ObstacleBox> obstacles,
                               const FitnessParams& params) {
  if (executions.empty()) throw ValidationError("fitness needs at least one execution");
  if (!(params.max_dtw > 0.0)) throw ValidationError("max_dtw must be positive");
  const auto average = average_trajectory(executions, params.resample_n);
  double total_dtw = 0.0;
  for (const auto& t : executions) {
    const auto pts = t.positions();
    const auto resampled = resample_by_arc_length(pts, params.resample_n);
    total_dtw += dtw(resampled, average);
  }
  FitnessResult r;
  r.ave_dtw = total_dtw / static_cast<double>(executions.size());
  r.sum_dist = sum_dist(average, obstacles);
  r.distance = combine_fitness(r.sum_dist, r.ave_dtw, params.max_dtw);
  return r;
}

}  // namespace uavmon
