#include <doctest.h>

#include <cmath>
#include <sstream>

#include "uavmon/preprocess.hpp"
#include "uavmon/rng.hpp"

using namespace uavmon;

namespace {

std::vector<LogRecord> records(const std::vector<double>& t, const std::vector<double>& r) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < t.size(); ++i) out.push_back({t[i], Channel::safe, 0, 0, 0, r[i]});
  return out;
}

HeadingSeries series(double duration, double rate, double (*f)(double)) {
  HeadingSeries s;
  const int n = static_cast<int>(std::lround(duration * rate)) + 1;
  for (int k = 0; k < n; ++k) {
    s.t.push_back(k / rate);
    s.r.push_back(f(k / rate));
  }
  return s;
}

}  // namespace

TEST_CASE("unwrap examples") {
  CHECK(unwrap_heading(std::vector{175.0, -175.0}) == std::vector{175.0, 185.0});
  CHECK(unwrap_heading(std::vector{-170.0, 170.0}) == std::vector{-170.0, -190.0});
  CHECK(unwrap_heading(std::vector{0.0, 10.0, 20.0}) == std::vector{0.0, 10.0, 20.0});
  CHECK(unwrap_heading(std::vector<double>{}).empty());
  // Several full turns.
  const auto u = unwrap_heading(std::vector{170.0, -170.0, -10.0, 170.0, -170.0});
  CHECK(u == std::vector{170.0, 190.0, 350.0, 530.0, 550.0});
}

TEST_CASE("unwrap properties on random sequences") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> raw(2 + rng.below(200));
    for (auto& v : raw) v = rng.uniform(-180, 180);
    const auto u = unwrap_heading(raw);
    REQUIRE(u.size() == raw.size());
    CHECK(u[0] == raw[0]);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double k = (u[i] - raw[i]) / 360.0;
      CHECK(std::abs(k - std::round(k)) < 1e-9);
      if (i > 0) CHECK(std::abs(u[i] - u[i - 1]) <= 180.0);
    }
  }
}

TEST_CASE("uniform resampling") {
  const auto s = resample_uniform(records({0.0, 1.0}, {0.0, 10.0}), 5.0);
  REQUIRE(s.r.size() == 6);
  for (int k = 0; k < 6; ++k) {
    CHECK(s.t[k] == doctest::Approx(0.2 * k));
    CHECK(s.r[k] == doctest::Approx(2.0 * k));
  }
  CHECK_THROWS(resample_uniform(records({0.0}, {1.0}), 5.0));

  std::vector<double> t, r;
  for (int k = 0; k < 50; ++k) {
    t.push_back(k * 0.2);
    r.push_back(std::sin(k * 0.3) * 100.0);
  }
  const auto same = resample_uniform(records(t, r), 5.0);
  REQUIRE(same.r.size() == r.size());
  for (std::size_t k = 0; k < r.size(); ++k) CHECK(same.r[k] == doctest::Approx(r[k]).epsilon(1e-9));

  // Unwrapping happens before interpolation: no sweep through zero.
  const auto wrapped = resample_uniform(records({0.0, 1.0}, {170.0, -170.0}), 2.0);
  CHECK(wrapped.r[1] == doctest::Approx(180.0));
}

TEST_CASE("window layout") {
  PreprocessConfig cfg;
  CHECK(cfg.window_samples() == 25);
  CHECK(window_count(10.0, cfg) == 3);
  CHECK(window_count(60.0, cfg) == 23);
  CHECK(window_count(4.9, cfg) == 0);
  CHECK(window_count(5.0, cfg) == 1);

  const auto s = series(10.0, 5.0, [](double t) { return 10.0 * t; });
  const auto w = make_windows(s, DistanceTrace{}, cfg, "f");
  REQUIRE(w.size() == 3);
  CHECK(w[0].start == 0.0);
  CHECK(w[1].start == 2.5);
  CHECK(w[2].start == 5.0);
  for (const auto& win : w) {
    CHECK(win.values.size() == 25);
    CHECK(win.end - win.start == doctest::Approx(5.0));
    double sum = 0.0;
    for (double v : win.values) sum += v;
    CHECK(std::abs(sum) < 1e-9);
    CHECK(std::isinf(win.win_dist));
  }
  // The ramp has slope 2 per sample; centered values are symmetric about 0.
  CHECK(w[0].values.front() == doctest::Approx(-24.0));
  CHECK(w[0].values.back() == doctest::Approx(24.0));

  const auto flat = make_windows(series(12.0, 5.0, [](double) { return 90.0; }), DistanceTrace{}, cfg, "f");
  for (const auto& win : flat)
    for (double v : win.values) CHECK(v == 0.0);

  CHECK(make_windows(series(3.0, 5.0, [](double) { return 0.0; }), DistanceTrace{}, cfg, "f").empty());
}

TEST_CASE("window count formula holds for random durations") {
  Rng rng(4);
  PreprocessConfig cfg;
  for (int i = 0; i < 300; ++i) {
    const double d = 0.2 * static_cast<double>(rng.below(2000));
    HeadingSeries s;
    for (int k = 0; k * 0.2 <= d + 1e-9; ++k) {
      s.t.push_back(k * 0.2);
      s.r.push_back(rng.uniform(-50, 50));
    }
    const auto w = make_windows(s, DistanceTrace{}, cfg, "f");
    const long expected = d >= 5.0 ? static_cast<long>(std::floor((d - 5.0) / 2.5 + 1e-9)) + 1 : 0;
    CHECK(static_cast<long>(w.size()) == expected);
  }
}

TEST_CASE("window distances and labels") {
  PreprocessConfig cfg;
  const auto s = series(20.0, 5.0, [](double t) { return t; });
  const DistanceTrace tr({0.0, 10.0, 20.0}, {10.0, 2.0, 10.0});
  const FlightLabels lab{"f", Safety::unsafe, Certainty::uncertain};
  const auto w = make_windows(s, tr, cfg, "f", &lab);
  CHECK(w[0].win_dist == doctest::Approx(6.0));
  CHECK(w[0].min_dist == 2.0);
  CHECK(w[3].win_dist == doctest::Approx(2.0));  // 7.5..12.5 contains t = 10
  CHECK(w[0].safety == Safety::unsafe);
  CHECK(w[0].certainty == Certainty::uncertain);
}

TEST_CASE("nominal filter") {
  PreprocessConfig cfg;
  const auto s = series(200.0, 5.0, [](double t) { return std::sin(t); });
  const DistanceTrace constant({0.0, 200.0}, {5.0, 5.0});
  const auto all = make_windows(s, constant, cfg, "f");
  CHECK(filter_nominal(all, constant, cfg).size() == all.size());

  // One window [20, 25]: dip to 2.9 m at end + 20 s = 45 s excludes it, a dip
  // at end + 60 s = 85 s does not.
  HeadingWindow w;
  w.start = 20.0;
  w.end = 25.0;
  const std::vector<HeadingWindow> one{w};
  const DistanceTrace near({0.0, 44.0, 45.0, 46.0, 200.0}, {5.0, 5.0, 2.9, 5.0, 5.0});
  const DistanceTrace far({0.0, 84.0, 85.0, 86.0, 200.0}, {5.0, 5.0, 2.9, 5.0, 5.0});
  CHECK(filter_nominal(one, near, cfg).empty());
  CHECK(filter_nominal(one, far, cfg).size() == 1);

  // Monotone in the clearance threshold.
  const DistanceTrace wavy = [] {
    std::vector<double> t, d;
    for (int k = 0; k <= 200; ++k) {
      t.push_back(k);
      d.push_back(4.0 + 3.0 * std::sin(k / 15.0));
    }
    return DistanceTrace(t, d);
  }();
  const auto ws = make_windows(s, wavy, cfg, "f");
  std::size_t prev = ws.size() + 1;
  for (double th : {0.5, 1.5, 2.5, 3.0, 4.0, 6.0}) {
    PreprocessConfig c = cfg;
    c.nominal_distance = th;
    const auto kept = filter_nominal(ws, wavy, c);
    CHECK(kept.size() <= prev);
    prev = kept.size();
  }
}

TEST_CASE("constant offset leaves windows unchanged") {
  Rng rng(21);
  PreprocessConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> t, r, r2;
    const double offset = rng.uniform(-720, 720);
    for (int k = 0; k < 150; ++k) {
      t.push_back(k * 0.2);
      const double h = rng.uniform(-180, 180);
      r.push_back(h);
      r2.push_back(std::remainder(h + offset, 360.0));
    }
    const auto a = make_windows(resample_uniform(records(t, r), 5.0), DistanceTrace{}, cfg, "f");
    const auto b = make_windows(resample_uniform(records(t, r2), 5.0), DistanceTrace{}, cfg, "f");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < a[i].values.size(); ++k) CHECK(a[i].values[k] == doctest::Approx(b[i].values[k]).epsilon(1e-9));
  }
}

TEST_CASE("config validation") {
  PreprocessConfig c;
  c.overlap = 5.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.sample_rate = 5.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.window_length = 0.6;
  c.overlap = 0.3;
  CHECK_THROWS_AS(c.validate(), ValidationError);  // W = 3
}

TEST_CASE("windowed CSV round trip") {
  PreprocessConfig cfg;
  const auto s = series(20.0, 5.0, [](double t) { return 37.0 * std::sin(t / 3.0); });
  const FlightLabels lab{"f", Safety::safe, Certainty::uncertain};
  const DistanceTrace tr({0.0, 20.0}, {3.0, 7.0});
  const auto w = make_windows(s, tr, cfg, "flight-1", &lab);
  std::ostringstream out;
  write_windows_csv(out, w, 25);
  CHECK(out.str().rfind(windows_csv_header(25), 0) == 0);
  CHECK(windows_csv_header(25).find(",v24") != std::string::npos);
  std::istringstream in(out.str());
  const auto back = read_windows_csv(in);
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(back[i].flight_id == "flight-1");
    CHECK(back[i].index == w[i].index);
    CHECK(back[i].start == w[i].start);
    CHECK(back[i].values == w[i].values);
    CHECK(back[i].win_dist == w[i].win_dist);
    CHECK(back[i].certainty == Certainty::uncertain);
  }

  // Unlabeled windows and infinite distances.
  const auto u = make_windows(s, DistanceTrace{}, cfg, "g");
  std::ostringstream o2;
  write_windows_csv(o2, u, 25);
  std::istringstream i2(o2.str());
  const auto b2 = read_windows_csv(i2);
  CHECK_FALSE(b2[0].safety.has_value());
  CHECK(std::isinf(b2[0].win_dist));

  std::istringstream bad("flight_id,index,start_s,end_s,win_dist_m,min_dist_m,safety,certainty,v0,v1,v2,v3\nf,0,0,5,1,1,,,1,2,3\n");
  CHECK_THROWS_AS(read_windows_csv(bad), ParseError);
}

TEST_CASE("distance trace CSV round trip") {
  const DistanceTrace a({0.0, 0.2, 0.4}, {3.0, 2.5, 1.25});
  const DistanceTrace b({0.0, 1.0}, {9.0, 8.0});
  std::ostringstream out;
  write_distance_traces(out, "a", a, true);
  write_distance_traces(out, "b", b, false);
  std::istringstream in(out.str());
  const auto m = read_distance_traces(in);
  REQUIRE(m.size() == 2);
  CHECK(m.at("a").distances() == a.distances());
  CHECK(m.at("b").times() == b.times());
}
