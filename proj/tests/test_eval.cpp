#include "doctest.h"

#include <vector>

#include "vnf/evalproto.hpp"

using namespace vnf;
using namespace vnf::eval;

namespace {

simrig::Dataset tiny_dataset(const std::string& scene, int frames,
                             uint64_t seed) {
  auto env = simrig::make_scene(scene);
  auto rig = simrig::RigConfig::standard();
  for (auto& st : rig.stacks) {
    st.cam.width = 8;
    st.cam.height = 6;
  }
  auto traj = simrig::make_trajectory(env, "loop", frames, 0.2);
  return simrig::generate_dataset(env, traj, rig, seed);
}

render::DepthScan make_scan(const Vec3& center, double height,
                            const std::vector<double>& depths) {
  render::DepthScan scan;
  scan.sensor_world = {center.x, center.y, height};
  double step = 360.0 / depths.size();
  for (size_t i = 0; i < depths.size(); ++i)
    scan.entries.push_back({i * step, depths[i], depths[i] > 0});
  return scan;
}

}  // namespace

TEST_CASE("global map: point count threshold") {
  simrig::Dataset ds;
  ds.rig = simrig::RigConfig::standard();
  simrig::SensorFrame f;
  f.pose_true = {0, 0, 0};
  f.lidar.push_back({0.f, 0.f, 1.0f});  // one return -> below threshold
  ds.frames.push_back(f);
  auto map1 = build_global_map(ds);
  CHECK(map1.empty());

  ds.frames.push_back(f);  // same return twice -> one voxel
  auto map2 = build_global_map(ds);
  CHECK(map2.occupied.size() == 1);
}

TEST_CASE("global map hugs the scene polygon within one voxel") {
  auto ds = tiny_dataset("smoke-box", 40, 5);
  auto map = build_global_map(ds);
  REQUIRE(!map.empty());
  for (uint64_t key : map.occupied) {
    int x = int(key & 0x1fffffu) - (1 << 20);
    int y = int((key >> 21) & 0x1fffffu) - (1 << 20);
    double cx = (x + 0.5) * map.voxel, cy = (y + 0.5) * map.voxel;
    double d = simrig::clearance(ds.env, cx, cy);
    REQUIRE(d < map.voxel * 1.5 + 3.5 * ds.rig.lidar_noise_std);
  }
}

TEST_CASE("gt_scan: empty map gives all no-return") {
  GlobalMap map;
  auto scan = gt_scan(map, {0, 0, 0}, 0.35, 30.0);
  CHECK(scan.entries.size() == 12);
  for (const auto& e : scan.entries) CHECK_FALSE(e.valid);
}

TEST_CASE("gt_scan: square room map is four-fold symmetric") {
  auto ds = tiny_dataset("smoke-box", 60, 6);
  auto map = build_global_map(ds);
  auto scan = gt_scan(map, {2.0, 2.0, 0}, ds.rig.sensor_height_m, 1.0);
  REQUIRE(scan.entries.size() == 360);
  int valid = 0;
  for (const auto& e : scan.entries)
    if (e.valid) ++valid;
  REQUIRE(valid > 350);
  // scene walls at x=0,4 and y=0,4: compare opposite azimuths
  for (int a : {5, 25, 65, 85}) {
    const auto& e0 = scan.entries[a];
    const auto& e1 = scan.entries[a + 180];
    if (e0.valid && e1.valid)
      CHECK(e0.depth_m == doctest::Approx(e1.depth_m).epsilon(0.08));
  }
}

TEST_CASE("gt_scan matches the brute-force per-voxel ray test") {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    GlobalMap map;
    double h = 0.35;
    int layer = map.coord(h);
    std::vector<std::array<int, 2>> voxels;
    for (int i = 0; i < 60; ++i) {
      int vx = int(rng.uniform_index(200)) - 100;
      int vy = int(rng.uniform_index(200)) - 100;
      if (std::abs(vx) < 5 && std::abs(vy) < 5) continue;  // keep pose clear
      map.occupied.insert(GlobalMap::pack(vx, vy, layer));
      voxels.push_back({vx, vy});
      Vec3 p{(vx + 0.5) * map.voxel, (vy + 0.5) * map.voxel, h};
      if (map.occupied.size() == 1)
        map.bounds = {p, p};
      else
        map.bounds.grow(p);
    }
    REQUIRE(!map.empty());

    auto scan = gt_scan(map, {0.01, 0.007, 0}, h, 7.0);
    for (const auto& e : scan.entries) {
      double rad = deg_to_rad(e.azimuth_deg);
      double dx = std::cos(rad), dy = std::sin(rad);
      double best = std::numeric_limits<double>::infinity();
      for (auto [vx, vy] : voxels) {
        double lo = 0, hi = std::numeric_limits<double>::infinity();
        bool ok = true;
        double bds[2][2] = {{vx * map.voxel, (vx + 1) * map.voxel},
                            {vy * map.voxel, (vy + 1) * map.voxel}};
        double o[2] = {0.01, 0.007}, d[2] = {dx, dy};
        for (int a = 0; a < 2 && ok; ++a) {
          if (std::abs(d[a]) < 1e-15) {
            if (o[a] < bds[a][0] || o[a] >= bds[a][1]) ok = false;
          } else {
            double ta = (bds[a][0] - o[a]) / d[a], tb = (bds[a][1] - o[a]) / d[a];
            lo = std::max(lo, std::min(ta, tb));
            hi = std::min(hi, std::max(ta, tb));
          }
        }
        if (ok && lo < hi) best = std::min(best, lo);
      }
      if (std::isinf(best)) {
        CHECK_FALSE(e.valid);
      } else {
        REQUIRE(e.valid);
        REQUIRE(e.depth_m == doctest::Approx(best).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("collapse_to_2d: band filtering with closed edges") {
  // binary-exact band edges: height 0.5, band 0.25
  std::vector<Vec3> pts{{1, 2, 0.75}, {3, 4, 0.25}, {5, 6, 0.2499},
                        {7, 8, 0.5}, {9, 0, 0.7501}};
  auto out = collapse_to_2d(pts, 0.5, 0.25);
  CHECK(out.size() == 3);  // edges 0.25/0.75 included (closed interval)

  auto none = collapse_to_2d(pts, 5.0, 0.05);
  CHECK(none.empty());

  // count equals a direct filter
  Rng rng(62);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 500; ++i)
    cloud.push_back({rng.uniform(), rng.uniform(), rng.uniform(0, 1)});
  auto got = collapse_to_2d(cloud, 0.5, 0.05);
  size_t expect = 0;
  for (const auto& p : cloud)
    if (std::abs(p.z - 0.5) <= 0.05) ++expect;
  CHECK(got.size() == expect);
}

TEST_CASE("nnd: identical sets, hand pair, and exact brute-force agreement") {
  std::vector<P2> a{{0, 0}, {1, 1}, {2, 0}};
  auto zero = nnd(a, a);
  for (double d : zero) CHECK(d == 0.0);

  CHECK(nnd({{0, 0}}, {{0.05, 0}})[0] == doctest::Approx(0.05).epsilon(1e-12));

  CHECK_THROWS_AS(nnd(a, {}), std::invalid_argument);

  Rng rng(63);
  std::vector<P2> from, to;
  for (int i = 0; i < 1000; ++i) {
    from.push_back({rng.uniform(0, 3), rng.uniform(0, 3)});
    to.push_back({rng.uniform(0, 3), rng.uniform(0, 3)});
  }
  // a few far-away queries exercise the exact fallback
  for (int i = 0; i < 5; ++i)
    from.push_back({rng.uniform(20, 30), rng.uniform(20, 30)});
  auto fast = nnd(from, to);
  for (size_t i = 0; i < from.size(); ++i) {
    double best2 = std::numeric_limits<double>::infinity();
    for (const P2& p : to) {
      double dx = p.x - from[i].x, dy = p.y - from[i].y;
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    REQUIRE(fast[i] == std::sqrt(best2));
  }
}

TEST_CASE("zone metrics: twelve-azimuth hand fixture") {
  Vec3 c{0, 0, 0};
  double h = 0.35;
  auto gt = make_scan(c, h,
                      {0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 1.5, 1.5, 1.5, 2.5, 2.5,
                       2.5});
  auto pred = make_scan(c, h,
                        {0.85, 0.75, 0.95, 0.40, 0.80, 0.86, 1.55, 1.30, 1.58,
                         2.45, 2.54, 2.56});
  auto m = zone_metrics(pred, gt);

  // zone 1: six samples with GT depth 0.8
  REQUIRE(m.acc[0].present);
  CHECK(m.acc[0].count == 6);
  CHECK(m.acc[0].mean_nnd == doctest::Approx(0.71 / 6).epsilon(1e-9));
  CHECK(m.acc[0].inlier_pct == doctest::Approx(100.0 * 4 / 6));
  CHECK(m.acc[0].too_close_pct == doctest::Approx(100.0 / 6));
  CHECK(m.acc[0].too_far_pct == doctest::Approx(100.0 / 6));

  // zone 2 adds the three 1.5 m azimuths
  CHECK(m.acc[1].count == 9);
  CHECK(m.acc[1].mean_nnd == doctest::Approx(1.04 / 9).epsilon(1e-9));
  CHECK(m.acc[1].inlier_pct == doctest::Approx(100.0 * 6 / 9));
  CHECK(m.acc[1].too_close_pct == doctest::Approx(100.0 * 2 / 9));

  // zone 3 holds all twelve
  CHECK(m.acc[2].count == 12);
  CHECK(m.acc[2].mean_nnd == doctest::Approx(1.19 / 12).epsilon(1e-9));
  CHECK(m.acc[2].inlier_pct == doctest::Approx(75.0));
  CHECK(m.acc[2].too_close_pct == doctest::Approx(100.0 * 2 / 12));
  CHECK(m.acc[2].too_far_pct == doctest::Approx(100.0 / 12));

  // the fixture is symmetric: coverage matches accuracy
  for (int z = 0; z < 3; ++z) {
    CHECK(m.cov[z].count == m.acc[z].count);
    CHECK(m.cov[z].mean_nnd == doctest::Approx(m.acc[z].mean_nnd).epsilon(1e-9));
    CHECK(m.cov[z].inlier_pct == doctest::Approx(m.acc[z].inlier_pct));
  }

  // zone nesting and full outlier accounting
  for (int z = 0; z + 1 < 3; ++z) REQUIRE(m.acc[z].count <= m.acc[z + 1].count);
  for (int z = 0; z < 3; ++z)
    REQUIRE(m.acc[z].inlier_pct + m.acc[z].too_close_pct +
                m.acc[z].too_far_pct ==
            doctest::Approx(100.0));
}

TEST_CASE("zone metrics: GT at exactly 1.5 m joins zones 2 and 3 only") {
  Vec3 c{0, 0, 0};
  auto gt = make_scan(c, 0.35, std::vector<double>(12, 1.5));
  auto pred = make_scan(c, 0.35, std::vector<double>(12, 1.52));
  auto m = zone_metrics(pred, gt);
  CHECK_FALSE(m.acc[0].present);
  CHECK(m.acc[1].count == 12);
  CHECK(m.acc[2].count == 12);
  CHECK(m.acc[1].inlier_pct == doctest::Approx(100.0));
}

TEST_CASE("zone metrics: all-inlier prediction scores 100 percent everywhere") {
  Vec3 c{0, 0, 0};
  auto gt = make_scan(c, 0.35,
                      {0.5, 0.9, 1.2, 1.8, 2.2, 3.0, 0.7, 1.1, 1.6, 2.4, 0.6,
                       1.9});
  std::vector<double> pd;
  for (const auto& e : gt.entries) pd.push_back(e.depth_m + 0.02);
  auto pred = make_scan(c, 0.35, pd);
  auto m = zone_metrics(pred, gt);
  for (int z = 0; z < 3; ++z)
    if (m.acc[z].present) {
      REQUIRE(m.acc[z].inlier_pct == doctest::Approx(100.0));
      REQUIRE(m.cov[z].inlier_pct == doctest::Approx(100.0));
    }
}

TEST_CASE("inlier percentage is monotone in the threshold") {
  Vec3 c{0, 0, 0};
  auto gt = make_scan(c, 0.35, std::vector<double>(12, 1.0));
  auto pred = make_scan(c, 0.35,
                        {1.01, 1.03, 1.06, 1.09, 1.12, 1.15, 1.21, 1.28, 1.02,
                         1.04, 1.33, 1.18});
  MetricsAccum accum;
  accum.add(scan_points(pred), gt);
  double prev = -1;
  for (double thresh : {0.02, 0.05, 0.10, 0.20, 0.50}) {
    auto m = accum.finalize(thresh);
    REQUIRE(m.acc[2].inlier_pct >= prev);
    prev = m.acc[2].inlier_pct;
  }
}

TEST_CASE("psnr: infinity flag, hand value, high-precision oracle") {
  std::vector<float> a(300, 0.5f);
  CHECK(std::isinf(psnr(a, a)));

  std::vector<float> b(300, 0.6f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));

  std::vector<float> c(301, 0.5f);
  CHECK_THROWS_AS(psnr(a, c), std::invalid_argument);

  Rng rng(64);
  std::vector<float> x(999), y(999);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = float(rng.uniform());
    y[i] = float(rng.uniform());
  }
  long double mse = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    long double d = (long double)x[i] - (long double)y[i];
    mse += d * d;
  }
  mse /= x.size();
  double ref = double(10.0L * log10l(1.0L / mse));
  CHECK(std::abs(psnr(x, y) - ref) < 1e-9);
}

TEST_CASE("sensor baselines: scanner matches GT, short-range array can be empty") {
  auto ds = tiny_dataset("smoke-box", 60, 8);
  auto map = build_global_map(ds);
  size_t k = ds.frames.size() / 2;
  Vec3 pose{ds.frames[k].pose_true.x, ds.frames[k].pose_true.y, 0};
  auto gt = gt_scan(map, pose, ds.rig.sensor_height_m, 1.0);

  auto lidar_pts = sensor_baseline_points(ds, k, BaselineKind::lidar);
  REQUIRE(!lidar_pts.empty());
  MetricsAccum accum;
  accum.add(lidar_pts, gt);
  auto m = accum.finalize();
  REQUIRE(m.acc[2].present);
  CHECK(m.acc[2].mean_nnd < 0.06);
  CHECK(m.cov[2].mean_nnd < 0.10);

  // a room whose walls all sit beyond the array's 4 m range
  simrig::Environment far_env;
  far_env.name = "far-room";
  far_env.has_floor = false;
  far_env.has_ceiling = false;
  far_env.walls = {{-6, -6, 6, -6, {1, 0, 0}},
                   {6, -6, 6, 6, {0, 1, 0}},
                   {6, 6, -6, 6, {0, 0, 1}},
                   {-6, 6, -6, -6, {1, 1, 0}}};
  auto rig = simrig::RigConfig::standard();
  for (auto& st : rig.stacks) {
    st.cam.width = 8;
    st.cam.height = 6;
  }
  std::vector<simrig::TimedPose> one{{0.0, {0, 0, 0}}};
  auto far_ds = simrig::generate_dataset(far_env, one, rig, 3);
  CHECK(sensor_baseline_points(far_ds, 0, BaselineKind::irs).empty());
}

TEST_CASE("uss baseline arc spans the configured opening angle") {
  auto ds = tiny_dataset("smoke-box", 20, 9);
  size_t k = 0;
  while (k < ds.frames.size() && !ds.frames[k].stacks[0].uss_echo) ++k;
  REQUIRE(k < ds.frames.size());
  auto pts = sensor_baseline_points(ds, k, BaselineKind::uss);
  REQUIRE(!pts.empty());

  // bearings relative to stack 0's axis must span +-half angle
  const auto& stack = ds.rig.stacks[0];
  simrig::Frame3 pose = simrig::stack_world(ds.frames[k].pose_true, stack,
                                            ds.rig.sensor_height_m);
  double min_b = 1e9, max_b = -1e9;
  bool stack0_echo = ds.frames[k].stacks[0].uss_echo;
  REQUIRE(stack0_echo);
  double r0 = ds.frames[k].stacks[0].uss_range_m;
  for (const P2& p : pts) {
    double range = std::hypot(p.x - pose.pos.x, p.y - pose.pos.y);
    if (std::abs(range - r0) > 1e-6) continue;  // other stack's arc
    double b = rad_to_deg(std::atan2(p.y - pose.pos.y, p.x - pose.pos.x)) -
               rad_to_deg(pose.yaw);
    while (b > 180) b -= 360;
    while (b < -180) b += 360;
    min_b = std::min(min_b, b);
    max_b = std::max(max_b, b);
  }
  CHECK(min_b == doctest::Approx(-stack.uss_half_angle_deg).epsilon(0.01));
  CHECK(max_b == doctest::Approx(stack.uss_half_angle_deg).epsilon(0.01));
}

TEST_CASE("ablation report: ties, identity, and ordering lines") {
  ArmResult a{"arm-a", 0.5, 0.6, 40, 45, 10};
  ArmResult b{"arm-b", 0.5, 0.6, 40, 45, 10};
  auto rep = ablation_report({a, b});
  CHECK(rep.to_text().find("arm-a = arm-b") != std::string::npos);

  ArmResult c{"arm-c", 0.25, 0.3, 70, 72, 12.5};
  auto rep2 = ablation_report({a, c});
  CHECK(rep2.to_text().find("arm-a > arm-c") != std::string::npos);
  // input numbers reproduced verbatim in the csv
  auto csv = rep2.to_csv();
  CHECK(csv.find("arm-c,0.25,0.3,70,72,12.5") != std::string::npos);

  CHECK_THROWS_AS(ablation_report({a}), std::invalid_argument);
}
