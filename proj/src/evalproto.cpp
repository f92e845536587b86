#include "vnf/evalproto.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vnf::eval {

std::vector<Vec3> lidar_world_points(const simrig::SensorFrame& frame,
                                     const simrig::RigConfig& rig) {
  std::vector<Vec3> pts;
  pts.reserve(frame.lidar.size());
  const simrig::Pose2& pose = frame.pose_true;
  for (const simrig::LidarBeam& b : frame.lidar) {
    double a = pose.yaw + deg_to_rad(b.azimuth_deg);
    double el = deg_to_rad(b.elevation_deg);
    pts.push_back({pose.x + b.range_m * std::cos(el) * std::cos(a),
                   pose.y + b.range_m * std::cos(el) * std::sin(a),
                   rig.sensor_height_m + b.range_m * std::sin(el)});
  }
  return pts;
}

GlobalMap build_global_map(const simrig::Dataset& ds, double voxel,
                           int min_points) {
  GlobalMap map;
  map.voxel = voxel;
  map.min_points = min_points;
  std::unordered_map<uint64_t, int> counts;
  bool first = true;
  for (const simrig::SensorFrame& f : ds.frames) {
    for (const Vec3& p : lidar_world_points(f, ds.rig)) {
      counts[GlobalMap::pack(map.coord(p.x), map.coord(p.y), map.coord(p.z))]++;
      if (first) {
        map.bounds = {p, p};
        first = false;
      } else {
        map.bounds.grow(p);
      }
    }
  }
  for (auto& [key, n] : counts)
    if (n >= min_points) map.occupied.insert(key);
  return map;
}

render::DepthScan gt_scan(const GlobalMap& map, const Vec3& pose_world_xy,
                          double height_m, double angular_step_deg) {
  VNF_REQUIRE(angular_step_deg > 0, "gt_scan: angular step must be > 0");
  render::DepthScan scan;
  scan.sensor_world = {pose_world_xy.x, pose_world_xy.y, height_m};
  int n = int(std::floor(360.0 / angular_step_deg + 1e-9));
  int layer = map.coord(height_m);
  double reach = map.empty() ? 0.0
                             : std::hypot(map.bounds.extent().x,
                                          map.bounds.extent().y) +
                                   2 * map.voxel;

  for (int i = 0; i < n; ++i) {
    double az = i * angular_step_deg;
    render::DepthScan::Entry e{az, 0.0, false};
    if (!map.empty()) {
      double rad = deg_to_rad(az);
      double dx = std::cos(rad), dy = std::sin(rad);
      double ox = pose_world_xy.x, oy = pose_world_xy.y;
      // 2D voxel walk in the fixed height layer
      int cx = map.coord(ox), cy = map.coord(oy);
      int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
      int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
      constexpr double kInf = std::numeric_limits<double>::infinity();
      double tmx = sx ? ((cx + (sx > 0 ? 1 : 0)) * map.voxel - ox) / dx : kInf;
      double tmy = sy ? ((cy + (sy > 0 ? 1 : 0)) * map.voxel - oy) / dy : kInf;
      double tdx = sx ? map.voxel / std::abs(dx) : kInf;
      double tdy = sy ? map.voxel / std::abs(dy) : kInf;
      double t = 0;
      while (t <= reach) {
        if (map.occupied_at(cx, cy, layer)) {
          e.depth_m = t;
          e.valid = true;
          break;
        }
        if (tmx < tmy) {
          t = tmx;
          tmx += tdx;
          cx += sx;
        } else {
          t = tmy;
          tmy += tdy;
          cy += sy;
        }
      }
    }
    scan.entries.push_back(e);
  }
  return scan;
}

std::vector<P2> collapse_to_2d(const std::vector<Vec3>& points, double height_m,
                               double band_m) {
  std::vector<P2> out;
  for (const Vec3& p : points)
    if (std::abs(p.z - height_m) <= band_m) out.push_back({p.x, p.y});
  return out;
}

std::vector<P2> scan_points(const render::DepthScan& scan) {
  std::vector<P2> out;
  for (const auto& e : scan.entries)
    if (e.valid) {
      double a = deg_to_rad(e.azimuth_deg);
      out.push_back({scan.sensor_world.x + e.depth_m * std::cos(a),
                     scan.sensor_world.y + e.depth_m * std::sin(a)});
    }
  return out;
}

namespace {

constexpr double kBin = 0.03;

struct SpatialHash {
  std::unordered_map<uint64_t, std::vector<int>> bins;
  const std::vector<P2>* pts;

  static uint64_t key(int x, int y) {
    auto u = [](int v) { return uint64_t(uint32_t(v)); };
    return u(x) | (u(y) << 32);
  }
  explicit SpatialHash(const std::vector<P2>& p) : pts(&p) {
    for (int i = 0; i < int(p.size()); ++i)
      bins[key(int(std::floor(p[i].x / kBin)), int(std::floor(p[i].y / kBin)))]
          .push_back(i);
  }

  double brute(const P2& q) const {
    double best2 = std::numeric_limits<double>::infinity();
    for (const P2& p : *pts) {
      double dx = p.x - q.x, dy = p.y - q.y;
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    return std::sqrt(best2);
  }

  // Expanding chebyshev rings; a found candidate is final once the next
  // ring's minimum possible distance exceeds it. Queries that stay empty
  // past the ring cap fall back to the exact scan.
  double nearest(const P2& q) const {
    constexpr int kMaxRing = 64;
    int qx = int(std::floor(q.x / kBin)), qy = int(std::floor(q.y / kBin));
    double best2 = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= kMaxRing; ++r) {
      double ring_min = (r - 1) * kBin;
      if (best2 < std::numeric_limits<double>::infinity() &&
          ring_min * ring_min > best2)
        return std::sqrt(best2);
      for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          auto it = bins.find(key(qx + dx, qy + dy));
          if (it == bins.end()) continue;
          for (int i : it->second) {
            double ddx = (*pts)[i].x - q.x, ddy = (*pts)[i].y - q.y;
            best2 = std::min(best2, ddx * ddx + ddy * ddy);
          }
        }
    }
    // either nothing within the capped rings, or a candidate that the cap
    // kept us from certifying: resolve exactly
    double capped = (kMaxRing - 1) * kBin;
    if (best2 <= capped * capped) return std::sqrt(best2);
    return brute(q);
  }
};

}  // namespace

std::vector<double> nnd(const std::vector<P2>& from,
                        const std::vector<P2>& to) {
  VNF_REQUIRE(!to.empty(), "nnd: target set must not be empty");
  std::vector<double> out(from.size());
  if (from.empty()) return out;
  SpatialHash hash(to);
  for (size_t i = 0; i < from.size(); ++i) out[i] = hash.nearest(from[i]);
  return out;
}

void MetricsAccum::add(const std::vector<P2>& pred_points,
                       const render::DepthScan& gt) {
  const Vec3 c = gt.sensor_world;
  std::vector<P2> gt_points = scan_points(gt);
  int n = int(gt.entries.size());
  VNF_REQUIRE(n > 0, "metrics: ground-truth scan is empty");
  double astep = 360.0 / n;

  auto gt_depth_at_bearing = [&](double bx, double by, double& depth) {
    double az = rad_to_deg(std::atan2(by - c.y, bx - c.x));
    if (az < 0) az += 360.0;
    int idx = int(std::lround(az / astep)) % n;
    if (!gt.entries[idx].valid) return false;
    depth = gt.entries[idx].depth_m;
    return true;
  };

  // accuracy: prediction -> GT
  if (!gt_points.empty()) {
    std::vector<double> d = nnd(pred_points, gt_points);
    for (size_t i = 0; i < pred_points.size(); ++i) {
      double gtd;
      if (!gt_depth_at_bearing(pred_points[i].x, pred_points[i].y, gtd)) {
        ++excluded_pred_;
        continue;
      }
      double pred_range = std::hypot(pred_points[i].x - c.x,
                                     pred_points[i].y - c.y);
      acc_.push_back({d[i], pred_range < gtd, gtd});
    }
  } else {
    excluded_pred_ += int(pred_points.size());
  }

  // coverage: GT -> prediction
  if (pred_points.empty()) {
    excluded_cov_ += int(gt_points.size());
  } else {
    std::vector<double> d = nnd(gt_points, pred_points);
    size_t k = 0;
    for (const auto& e : gt.entries) {
      if (!e.valid) continue;
      const P2& g = gt_points[k];
      double gd = d[k];
      ++k;
      // classify by the nearest prediction's range from the scan center
      double best2 = std::numeric_limits<double>::infinity();
      P2 nearest{0, 0};
      for (const P2& p : pred_points) {
        double dx = p.x - g.x, dy = p.y - g.y;
        double d2 = dx * dx + dy * dy;
        if (d2 < best2) {
          best2 = d2;
          nearest = p;
        }
      }
      double pred_range = std::hypot(nearest.x - c.x, nearest.y - c.y);
      cov_.push_back({gd, pred_range < e.depth_m, e.depth_m});
    }
  }
}

void MetricsAccum::count_no_prediction(const render::DepthScan& pred,
                                       const render::DepthScan& gt) {
  size_t n = std::min(pred.entries.size(), gt.entries.size());
  for (size_t i = 0; i < n; ++i)
    if (gt.entries[i].valid && !pred.entries[i].valid) ++no_prediction_;
}

ScanMetrics MetricsAccum::finalize(double inlier_threshold) const {
  ScanMetrics m;
  m.excluded_pred = excluded_pred_;
  m.excluded_cov = excluded_cov_;
  m.no_prediction = no_prediction_;
  auto fill = [&](const std::vector<Sample>& samples, DirectionZoneStats* out) {
    for (int z = 0; z < 3; ++z) {
      double sum = 0;
      int count = 0, inliers = 0, close = 0, far = 0;
      for (const Sample& s : samples) {
        if (s.gt_depth >= kZoneLimits[z]) continue;  // half-open [0, limit)
        ++count;
        sum += s.nnd;
        if (s.nnd < inlier_threshold)
          ++inliers;
        else if (s.too_close)
          ++close;
        else
          ++far;
      }
      out[z].present = count > 0;
      out[z].count = count;
      if (count > 0) {
        out[z].mean_nnd = sum / count;
        out[z].inlier_pct = 100.0 * inliers / count;
        out[z].too_close_pct = 100.0 * close / count;
        out[z].too_far_pct = 100.0 * far / count;
      }
    }
  };
  fill(acc_, m.acc);
  fill(cov_, m.cov);
  return m;
}

ScanMetrics zone_metrics(const render::DepthScan& pred,
                         const render::DepthScan& gt,
                         double inlier_threshold) {
  MetricsAccum accum;
  accum.add(scan_points(pred), gt);
  accum.count_no_prediction(pred, gt);
  return accum.finalize(inlier_threshold);
}

double psnr(const std::vector<float>& a, const std::vector<float>& b) {
  VNF_REQUIRE(a.size() == b.size() && !a.empty(), "psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = double(a[i]) - double(b[i]);
    mse += d * d;
  }
  mse /= double(a.size());
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<P2> sensor_baseline_points(const simrig::Dataset& ds,
                                       size_t frame_index, BaselineKind kind,
                                       double band_m) {
  VNF_REQUIRE(frame_index < ds.frames.size(), "baseline: bad frame index");
  const simrig::SensorFrame& f = ds.frames[frame_index];
  double height = ds.rig.sensor_height_m;

  if (kind == BaselineKind::lidar)
    return collapse_to_2d(lidar_world_points(f, ds.rig), height, band_m);

  std::vector<Vec3> pts;
  for (int s = 0; s < 2; ++s) {
    const simrig::SensorStack& stack = ds.rig.stacks[s];
    simrig::Frame3 pose = simrig::stack_world(f.pose_true, stack, height);
    if (kind == BaselineKind::irs) {
      for (int z = 0; z < simrig::kIrsZones; ++z) {
        const simrig::IrsReading& r = f.stacks[s].irs[z];
        if (!r.valid) continue;
        Vec3 dir = simrig::dir_to_world(pose, simrig::irs_zone_dir_cam(stack, z));
        pts.push_back(pose.pos + dir * double(r.range_m));
      }
    } else {  // uss: an arc of points across the cone at the measured range
      if (!f.stacks[s].uss_echo) continue;
      double half = deg_to_rad(stack.uss_half_angle_deg);
      const int kArc = 51;
      for (int i = 0; i < kArc; ++i) {
        double a = -half + 2 * half * i / (kArc - 1);
        Vec3 dir = simrig::dir_to_world(pose, {std::cos(a), std::sin(a), 0});
        pts.push_back(pose.pos + dir * double(f.stacks[s].uss_range_m));
      }
    }
  }
  return collapse_to_2d(pts, height, band_m);
}

std::string AblationReport::to_text() const {
  std::ostringstream os;
  os << "arm                          mean_acc  mean_cov  inl_acc%  inl_cov%  steps/s\n";
  for (const ArmResult& a : arms) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s %8.3f  %8.3f  %8.1f  %8.1f  %7.2f\n",
                  a.name.c_str(), a.mean_acc, a.mean_cov, a.inlier_acc,
                  a.inlier_cov, a.steps_per_sec);
    os << buf;
  }
  os << "\npairwise zone-3 mean accuracy orderings (lower is better):\n";
  for (size_t i = 0; i < arms.size(); ++i)
    for (size_t j = i + 1; j < arms.size(); ++j) {
      const char* rel = arms[i].mean_acc < arms[j].mean_acc
                            ? "<"
                            : (arms[i].mean_acc > arms[j].mean_acc ? ">" : "=");
      os << "  " << arms[i].name << " " << rel << " " << arms[j].name << "\n";
    }
  return os.str();
}

std::string AblationReport::to_csv() const {
  std::ostringstream os;
  os << "arm,mean_acc,mean_cov,inlier_acc,inlier_cov,steps_per_sec\n";
  for (const ArmResult& a : arms)
    os << a.name << "," << format_g(a.mean_acc) << "," << format_g(a.mean_cov)
       << "," << format_g(a.inlier_acc) << "," << format_g(a.inlier_cov) << ","
       << format_g(a.steps_per_sec) << "\n";
  return os.str();
}

std::string AblationReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const ArmResult& a : arms)
    j.push_back({{"arm", a.name},
                 {"mean_acc", a.mean_acc},
                 {"mean_cov", a.mean_cov},
                 {"inlier_acc", a.inlier_acc},
                 {"inlier_cov", a.inlier_cov},
                 {"steps_per_sec", a.steps_per_sec}});
  return j.dump(2);
}

AblationReport ablation_report(const std::vector<ArmResult>& arms) {
  VNF_REQUIRE(arms.size() >= 2, "ablation_report: need at least two runs");
  return AblationReport{arms};
}

namespace {

void csv_direction(std::ostringstream& os, const char* dir,
                   const DirectionZoneStats* z) {
  const char* zone_names[3] = {"0-1m", "0-2m", "0-100m"};
  for (int i = 0; i < 3; ++i) {
    os << dir << "," << zone_names[i] << "," << (z[i].present ? 1 : 0) << ","
       << z[i].count << "," << format_g(z[i].mean_nnd) << ","
       << format_g(z[i].inlier_pct) << "," << format_g(z[i].too_close_pct)
       << "," << format_g(z[i].too_far_pct) << "\n";
  }
}

}  // namespace

void write_metrics_csv(const ScanMetrics& m, const std::string& path) {
  std::ostringstream os;
  os << "direction,zone,present,count,mean_nnd_m,inlier_pct,too_close_pct,too_far_pct\n";
  csv_direction(os, "accuracy", m.acc);
  csv_direction(os, "coverage", m.cov);
  os << "excluded,pred," << m.excluded_pred << ",,,,,\n";
  os << "excluded,coverage," << m.excluded_cov << ",,,,,\n";
  std::ofstream out(path);
  VNF_REQUIRE(out.good(), "write_metrics_csv: cannot open " + path);
  out << os.str();
}

std::string metrics_to_json(const ScanMetrics& m) {
  nlohmann::json j;
  const char* zone_names[3] = {"zone1_0_1m", "zone2_0_2m", "zone3_0_100m"};
  auto dir_json = [&](const DirectionZoneStats* z) {
    nlohmann::json d;
    for (int i = 0; i < 3; ++i) {
      if (!z[i].present) {
        d[zone_names[i]] = nullptr;
        continue;
      }
      d[zone_names[i]] = {{"count", z[i].count},
                          {"mean_nnd_m", z[i].mean_nnd},
                          {"inlier_pct", z[i].inlier_pct},
                          {"too_close_pct", z[i].too_close_pct},
                          {"too_far_pct", z[i].too_far_pct}};
    }
    return d;
  };
  j["accuracy"] = dir_json(m.acc);
  j["coverage"] = dir_json(m.cov);
  j["excluded_pred"] = m.excluded_pred;
  j["excluded_cov"] = m.excluded_cov;
  return j.dump(2);
}

}  // namespace vnf::eval
