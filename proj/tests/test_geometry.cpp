#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "uavmon/geometry.hpp"
#include "uavmon/rng.hpp"

using namespace uavmon;

namespace {

Trajectory line(std::vector<Point3> pts) {
  std::vector<TrajectoryPoint> tp;
  for (std::size_t i = 0; i < pts.size(); ++i) tp.push_back({static_cast<double>(i), pts[i]});
  return Trajectory(std::move(tp));
}

}  // namespace

TEST_CASE("point to box distance examples") {
  CHECK(point_box_distance(5, 0, {0, 0, 2, 2, 10, 0}) == doctest::Approx(4.0));
  CHECK(point_box_distance(0, 0, {0.5, -0.3, 3, 1, 10, 17}) == 0.0);
  CHECK(point_box_distance(2, 0, {0, 0, 2, 2, 10, 45}) == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
  // On the boundary.
  CHECK(point_box_distance(1, 0.3, {0, 0, 2, 2, 10, 0}) == 0.0);
}

TEST_CASE("point to box distance against boundary sampling") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    ObstacleBox box{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.2, 6), rng.uniform(0.2, 6), 10,
                    rng.uniform(-180, 180)};
    const double px = rng.uniform(-12, 12), py = rng.uniform(-12, 12);
    const double d = point_box_distance(px, py, box);
    const double ref = oracle::box_distance_by_sampling(px, py, box, 4000);
    CHECK(d >= 0.0);
    CHECK(d <= ref + 1e-12);
    CHECK(ref - d <= 6.0 / 4000.0);
  }
}

TEST_CASE("point to box distance is rotation invariant") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    ObstacleBox box{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.2, 6), rng.uniform(0.2, 6), 10,
                    rng.uniform(-180, 180)};
    const double px = rng.uniform(-12, 12), py = rng.uniform(-12, 12);
    const double a = rng.uniform(-180, 180);
    const double th = a * std::numbers::pi / 180.0;
    const double dx = px - box.cx, dy = py - box.cy;
    ObstacleBox rotated = box;
    rotated.rotation += a;
    const double qx = box.cx + dx * std::cos(th) - dy * std::sin(th);
    const double qy = box.cy + dx * std::sin(th) + dy * std::cos(th);
    CHECK(point_box_distance(qx, qy, rotated) == doctest::Approx(point_box_distance(px, py, box)).epsilon(1e-9));
  }
}

TEST_CASE("minimum obstacle distance") {
  const ObstacleBox a{0, 0, 2, 2, 10, 0};
  // Straight path 1.2 m beside the box (box edge at y = 1).
  const auto t = line({{-5, 2.2, 3}, {0, 2.2, 3}, {5, 2.2, 3}});
  CHECK(min_obstacle_distance(t, std::vector{a}).minimum == doctest::Approx(1.2).epsilon(1e-9));

  const auto inside = line({{-5, 0, 3}, {0, 0, 3}, {5, 0, 3}});
  CHECK(min_obstacle_distance(inside, std::vector{a}).minimum == 0.0);

  const ObstacleBox b{0, 10, 2, 2, 10, 0};
  const auto between = line({{0, 3, 0}, {0, 3.2, 0}});  // 2.0 from A, 5.8 from B
  const auto od = min_obstacle_distance(between, std::vector{a, b});
  CHECK(od.minimum == doctest::Approx(2.0));
  CHECK(od.trace.distances().size() == 2);

  const auto none = min_obstacle_distance(between, std::vector<ObstacleBox>{});
  CHECK(std::isinf(none.minimum));
  CHECK(none.trace.empty());
  CHECK(std::isinf(none.trace.min_over(0, 10)));
}

TEST_CASE("distance trace queries") {
  const DistanceTrace tr({0, 1, 2, 3}, {5, 3, 0.5, 4});
  CHECK(tr.minimum() == 0.5);
  CHECK(tr.at(1.5) == doctest::Approx(1.75));
  CHECK(tr.at(-3) == 5.0);
  CHECK(tr.nearest(1.4) == 3.0);
  CHECK(tr.min_over(0, 1) == 3.0);
  CHECK(tr.min_over(0.25, 0.75) == doctest::Approx(3.5));
  CHECK(tr.min_over(2.5, 100) == doctest::Approx(2.25));
  CHECK(std::isinf(tr.min_over(10, 20)));
  CHECK(tr.first_below(1.0).value() == 2.0);
  CHECK_FALSE(tr.first_below(0.5).has_value());
}

TEST_CASE("sum_dist") {
  const ObstacleBox a{0, 0, 2, 2, 10, 0};
  const ObstacleBox c{0, 7, 2, 2, 10, 0};
  // (0, 3) is 2 m from A and 3 m from C.
  const std::vector<Point3> one{{0, 3, 0}};
  CHECK(sum_dist(one, std::vector{a, c}) == doctest::Approx(5.0));
  const std::vector<Point3> two{{5, 0, 0}, {4.2, 0, 0}};  // per-point sums 4.0 and 3.2
  CHECK(sum_dist(two, std::vector{a}) == doctest::Approx(3.2));

  const auto t = line({{3, 0, 0}, {4, 0, 0}});
  CHECK(sum_dist(t, std::vector{a}) == doctest::Approx(min_obstacle_distance(t, std::vector{a}).minimum));
  CHECK_THROWS_AS(sum_dist(one, std::vector<ObstacleBox>{}), ValidationError);
}

TEST_CASE("dtw examples and properties") {
  const std::vector<Point3> a{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const std::vector<Point3> b{{0, 0, 0}, {2, 0, 0}};
  CHECK(dtw(a, b) == 1.0);
  CHECK(dtw(a, a) == 0.0);
  CHECK_THROWS(dtw(a, std::vector<Point3>{}));

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    std::vector<Point3> x(1 + rng.below(8)), y(1 + rng.below(8));
    for (auto& p : x) p = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (auto& p : y) p = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    CHECK(dtw(x, y) == dtw(y, x));
    CHECK(dtw(x, y) >= 0.0);
    CHECK(dtw(x, x) == 0.0);
  }
}

TEST_CASE("dtw matches exhaustive path enumeration") {
  Rng rng(17);
  for (int i = 0; i < 60; ++i) {
    std::vector<Point3> x(1 + rng.below(6)), y(1 + rng.below(6));
    for (auto& p : x) p = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    for (auto& p : y) p = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    CHECK(dtw(x, y) == oracle::dtw_by_enumeration(x, y));
  }
}

TEST_CASE("arc-length resampling") {
  const std::vector<Point3> l{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  const auto r = resample_by_arc_length(l, 4);
  REQUIRE(r.size() == 4);
  CHECK(r[1].x == doctest::Approx(1.0));
  CHECK(r[2].x == doctest::Approx(2.0));
  CHECK(r[3].x == 3.0);
  // Degenerate trajectory stays constant.
  const std::vector<Point3> still{{1, 2, 3}, {1, 2, 3}};
  for (const auto& p : resample_by_arc_length(still, 5)) CHECK(p == Point3{1, 2, 3});

  Rng rng(8);
  for (int i = 0; i < 30; ++i) {
    std::vector<Point3> pts(2 + rng.below(30));
    for (auto& p : pts) p = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 5)};
    const auto got = resample_by_arc_length(pts, 57);
    const auto ref = oracle::resample(pts, 57);
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].x == doctest::Approx(ref[k].x).epsilon(1e-9));
      CHECK(got[k].y == doctest::Approx(ref[k].y).epsilon(1e-9));
      CHECK(got[k].z == doctest::Approx(ref[k].z).epsilon(1e-9));
    }
  }
}

TEST_CASE("average trajectory") {
  const auto t = line({{0, 0, 0}, {1, 1, 0}, {3, 1, 0}});
  const std::vector<Trajectory> same{t, t};
  const auto avg = average_trajectory(same, 50);
  const auto r = resample_by_arc_length(t.positions(), 50);
  for (std::size_t i = 0; i < avg.size(); ++i) CHECK(avg[i] == r[i]);

  const std::vector<Trajectory> parallel{line({{0, 0, 0}, {10, 0, 0}}), line({{0, 2, 0}, {10, 2, 0}})};
  for (const auto& p : average_trajectory(parallel)) CHECK(p.y == doctest::Approx(1.0));

  // Three curves against per-index means of independently resampled curves.
  std::vector<Trajectory> curves;
  for (int c = 0; c < 3; ++c) {
    std::vector<Point3> pts;
    for (int k = 0; k < 40; ++k) {
      const double s = k / 39.0;
      pts.push_back({10 * s, (c + 1) * std::sin(3 * s + c), 0.5 * c * s * s});
    }
    curves.push_back(line(pts));
  }
  const auto got = average_trajectory(curves, 200);
  REQUIRE(got.size() == 200);
  std::vector<std::vector<Point3>> rs;
  for (const auto& c : curves) rs.push_back(oracle::resample(c.positions(), 200));
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(got[i].x == doctest::Approx((rs[0][i].x + rs[1][i].x + rs[2][i].x) / 3.0).epsilon(1e-9));
    CHECK(got[i].y == doctest::Approx((rs[0][i].y + rs[1][i].y + rs[2][i].y) / 3.0).epsilon(1e-9));
    CHECK(got[i].z == doctest::Approx((rs[0][i].z + rs[1][i].z + rs[2][i].z) / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("fitness") {
  CHECK(combine_fitness(5, 60, 65) == 5.0);
  CHECK(combine_fitness(5, 70, 65) == -65.0);
  // Monotone in sum_dist.
  for (double ad : {10.0, 80.0}) CHECK(combine_fitness(3, ad, 65) <= combine_fitness(4, ad, 65));

  const std::vector<ObstacleBox> boxes{{0, 0, 2, 2, 10, 0}};
  const auto t = line({{3, -5, 1}, {3, 0, 1}, {4, 5, 1}});
  {
    const std::vector<Trajectory> one{t};
    const auto r = fitness_distance(one, boxes);
    CHECK(r.ave_dtw == 0.0);
    CHECK(r.distance == r.sum_dist);
    CHECK(r.sum_dist == doctest::Approx(2.0).epsilon(1e-3));
  }
  {
    const std::vector<Trajectory> twins{t, t};
    const auto r = fitness_distance(twins, boxes);
    CHECK(r.ave_dtw == 0.0);
    CHECK(r.distance == r.sum_dist);
  }
  {
    // Executions 4 m apart: 200 resampled points each 2 m from the mean.
    const std::vector<Trajectory> diverse{line({{3, -5, 1}, {3, 5, 1}}), line({{7, -5, 1}, {7, 5, 1}})};
    const auto r = fitness_distance(diverse, boxes);
    CHECK(r.ave_dtw == doctest::Approx(400.0));
    CHECK(r.sum_dist == doctest::Approx(4.0));
    CHECK(r.distance == doctest::Approx(4.0 - 400.0));
  }
}
