#pragma once

#include <optional>
#include <span>
#include <vector>

#include "uavmon/flightdata.hpp"

namespace uavmon {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

double euclidean(const Point3& a, const Point3& b);

struct TrajectoryPoint {
  double t = 0.0;
  Point3 p;
};

// Flight trajectory; timestamps strictly increasing, at least two points.
class Trajectory {
 public:
  explicit Trajectory(std::vector<TrajectoryPoint> points);

  // Built from the position channel of a log.
  static Trajectory from_log(const FlightLog& log);

  const std::vector<TrajectoryPoint>& points() const { return points_; }
  std::vector<Point3> positions() const;
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<TrajectoryPoint> points_;
};

// Horizontal distance from (px, py) to the rotated rectangular footprint of
// the box. Zero inside or on the boundary.
double point_box_distance(double px, double py, const ObstacleBox& box);

// Distance to the nearest obstacle at each sample time. Empty trace means
// "no obstacles": every query returns +infinity.
class DistanceTrace {
 public:
  DistanceTrace() = default;
  DistanceTrace(std::vector<double> times, std::vector<double> distances);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& distances() const { return distances_; }
  bool empty() const { return times_.empty(); }

  double minimum() const;
  // Linear interpolation, clamped at the ends.
  double at(double t) const;
  double nearest(double t) const;
  // Minimum over [t0, t1] clipped to the trace's time span; includes the
  // interpolated values at the clipped interval ends. +inf if disjoint.
  double min_over(double t0, double t1) const;
  // First sample time whose distance is strictly below the threshold.
  std::optional<double> first_below(double threshold) const;

 private:
  std::vector<double> times_;
  std::vector<double> distances_;
};

struct ObstacleDistance {
  double minimum;  // +inf when there are no obstacles
  DistanceTrace trace;
};

ObstacleDistance min_obstacle_distance(const Trajectory& traj, std::span<const ObstacleBox> obstacles);

// min over points of the summed distances to all obstacles. Throws on an
// empty obstacle list or an empty point set.
double sum_dist(std::span<const Point3> points, std::span<const ObstacleBox> obstacles);
double sum_dist(const Trajectory& traj, std::span<const ObstacleBox> obstacles);

// Unconstrained dynamic time warping with Euclidean local cost; total
// accumulated cost along the optimal path.
double dtw(std::span<const Point3> a, std::span<const Point3> b);

// Resamples to n points spaced uniformly in normalized arc length.
std::vector<Point3> resample_by_arc_length(std::span<const Point3> points, int n);

// Pointwise mean of the arc-length resampled trajectories.
std::vector<Point3> average_trajectory(std::span<const Trajectory> trajs, int resample_n = 200);

struct FitnessParams {
  double max_dtw = 65.0;
  int resample_n = 200;
};

struct FitnessResult {
  double sum_dist = 0.0;
  double ave_dtw = 0.0;
  double distance = 0.0;
};

// The search fitness: sum_dist - ave_dtw when ave_dtw exceeds max_dtw,
// sum_dist otherwise. Lower means a more interesting test case.
double combine_fitness(double sum_dist, double ave_dtw, double max_dtw);

FitnessResult fitness_distance(std::span<const Trajectory> executions, std::span<const ObstacleBox> obstacles,
                               const FitnessParams& params = {});

}  // namespace uavmon
