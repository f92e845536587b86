#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vnf/common.hpp"
#include "vnf/render.hpp"
#include "vnf/simrig.hpp"

// Mapping evaluation: a voxelized global map built from the range scanner,
// 360-degree ground-truth scans inside it, nearest-neighbor distances in
// both directions (prediction->GT is accuracy, GT->prediction is coverage),
// zone statistics with a 10 cm inlier threshold, and instantaneous sensor
// baselines for comparison.
namespace vnf::eval {

constexpr double kInlierThreshold = 0.10;
inline const double kZoneLimits[3] = {1.0, 2.0, 100.0};  // zones by GT depth

struct P2 {
  double x = 0, y = 0;
};

struct GlobalMap {
  double voxel = 0.03;
  int min_points = 2;
  std::unordered_set<uint64_t> occupied;
  Aabb bounds{{0, 0, 0}, {0, 0, 0}};
  bool empty() const { return occupied.empty(); }

  static uint64_t pack(int x, int y, int z) {
    auto u = [](int v) { return uint64_t(uint32_t(v + (1 << 20))) & 0x1fffffu; };
    return u(x) | (u(y) << 21) | (u(z) << 42);
  }
  int coord(const double v) const { return int(std::floor(v / voxel)); }
  bool occupied_at(int x, int y, int z) const {
    return occupied.count(pack(x, y, z)) > 0;
  }
};

std::vector<Vec3> lidar_world_points(const simrig::SensorFrame& frame,
                                     const simrig::RigConfig& rig);

// World-frame voxelization of all scanner returns; voxels below the point
// count threshold are dropped as noise.
GlobalMap build_global_map(const simrig::Dataset& ds, double voxel = 0.03,
                           int min_points = 2);

// Ground truth at a test pose: per azimuth, the distance to the first map
// voxel the horizontal ray enters; no-return when it exits the map.
render::DepthScan gt_scan(const GlobalMap& map, const Vec3& pose_world_xy,
                          double height_m, double angular_step_deg);

// Keeps points with |z - height| <= band and drops the vertical coordinate.
std::vector<P2> collapse_to_2d(const std::vector<Vec3>& points, double height_m,
                               double band_m = 0.05);

std::vector<P2> scan_points(const render::DepthScan& scan);

// Per-point Euclidean nearest-neighbor distances, accelerated by a uniform
// spatial hash on 3 cm bins with an exact ring-expansion stop rule.
std::vector<double> nnd(const std::vector<P2>& from, const std::vector<P2>& to);

struct DirectionZoneStats {
  bool present = false;
  int count = 0;
  double mean_nnd = 0;
  double inlier_pct = 0;
  double too_close_pct = 0;  // of all evaluated points in the zone
  double too_far_pct = 0;
};

struct ScanMetrics {
  DirectionZoneStats acc[3];
  DirectionZoneStats cov[3];
  int excluded_pred = 0;  // prediction points with no GT zone
  int excluded_cov = 0;   // GT points with no prediction set to measure against
  int no_prediction = 0;  // azimuths where GT exists but the scan had no return
};

// Pools (prediction points, GT scan) pairs, possibly across test poses, and
// computes zone metrics once at the end.
class MetricsAccum {
 public:
  void add(const std::vector<P2>& pred_points, const render::DepthScan& gt);
  void count_no_prediction(const render::DepthScan& pred,
                           const render::DepthScan& gt);
  ScanMetrics finalize(double inlier_threshold = kInlierThreshold) const;

 private:
  struct Sample {
    double nnd;
    bool too_close;
    double gt_depth;
  };
  std::vector<Sample> acc_, cov_;
  int excluded_pred_ = 0, excluded_cov_ = 0, no_prediction_ = 0;
};

// Scan-vs-scan convenience wrapper.
ScanMetrics zone_metrics(const render::DepthScan& pred,
                         const render::DepthScan& gt,
                         double inlier_threshold = kInlierThreshold);

// 10*log10(1 / MSE) for images in [0,1]; +infinity when identical.
double psnr(const std::vector<float>& a, const std::vector<float>& b);

enum class BaselineKind { lidar, irs, uss };

// Instantaneous sensor measurements of one frame collapsed to the 2D
// evaluation plane. The wide-cone sensor is rendered as an arc of points
// across its opening angle at the measured range.
std::vector<P2> sensor_baseline_points(const simrig::Dataset& ds,
                                       size_t frame_index, BaselineKind kind,
                                       double band_m = 0.05);

struct ArmResult {
  std::string name;
  double mean_acc = 0, mean_cov = 0;      // zone 3, meters (lower is better)
  double inlier_acc = 0, inlier_cov = 0;  // zone 3, percent (higher is better)
  double steps_per_sec = 0;
};

struct AblationReport {
  std::vector<ArmResult> arms;
  std::string to_text() const;
  std::string to_csv() const;
  std::string to_json() const;
};

AblationReport ablation_report(const std::vector<ArmResult>& arms);

void write_metrics_csv(const ScanMetrics& m, const std::string& path);
std::string metrics_to_json(const ScanMetrics& m);

}  // namespace vnf::eval
