#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vnf/common.hpp"

// Synthetic environments and analytic sensor models standing in for the
// robot hardware: extruded polygonal scenes with exact raycasting, two
// forward sensor stacks (camera + wide-cone ultrasonic + 8x8 infrared
// ranging array), a planar range scanner for ground truth, an optional
// dense depth camera, and deterministic dataset generation.
namespace vnf::simrig {

struct Wall {
  double x1, y1, x2, y2;
  double color[3];
};

struct Environment {
  std::string name;
  std::vector<Wall> walls;  // extruded from floor_z to ceiling_z
  double floor_z = 0.0;
  double ceiling_z = 2.0;
  bool has_floor = true;
  bool has_ceiling = true;
  double floor_color[3] = {0.45, 0.42, 0.38};
  double ceiling_color[3] = {0.82, 0.82, 0.80};
  bool striped_walls = true;  // 0.5 m shade bands along each wall

  Aabb world_box() const;
};

// Bundled scenes: "mini-office" (cluttered), "mini-commons" (large, sparse),
// "smoke-box" (tiny room for fast tests).
Environment make_scene(const std::string& id);
std::vector<std::string> scene_ids();

struct RaycastHit {
  bool hit = false;
  double distance = 0;
  double color[3] = {0, 0, 0};
};

// Nearest ray intersection against walls (within the height range) and the
// floor/ceiling planes. Exact 64-bit arithmetic, no acceleration structure.
RaycastHit raycast(const Environment& env, const Vec3& origin,
                   const Vec3& dir);

struct Pose2 {
  double x = 0, y = 0, yaw = 0;  // yaw in radians
};

struct TimedPose {
  double t = 0;
  Pose2 pose;
};

struct CameraIntrinsics {
  int width = 64, height = 48;
  double hfov_deg = 87.0;

  double fx() const { return (width / 2.0) / std::tan(deg_to_rad(hfov_deg) / 2); }
  double fy() const { return fx(); }
  double cx() const { return (width - 1) / 2.0; }
  double cy() const { return (height - 1) / 2.0; }
};

// Camera frame: +x forward, +y left, +z up. Pixel u grows to the right,
// v grows downward; the optical axis leaves through (cx, cy).
Vec3 pixel_dir_cam(const CameraIntrinsics& intr, double u, double v);

struct SensorStack {
  double mount_dx = 0.10;
  double mount_dy = 0.135;       // +-0.135: stacks about 0.27 m apart
  double mount_yaw_deg = 14.5;   // +-14.5 degrees off the driving direction
  CameraIntrinsics cam;
  double cam_noise_std = 0.01;
  double uss_half_angle_deg = 25.0;
  double uss_max_range_m = 5.0;
  double uss_noise_std = 0.02;
  double irs_fov_deg = 45.0;
  double irs_max_range_m = 4.0;
  double irs_noise_std = 0.01;
  double irs_dropout = 0.05;
  double depth_max_range_m = 10.0;
  double depth_noise_std = 0.01;
};

struct RigConfig {
  std::array<SensorStack, 2> stacks;
  double sensor_height_m = 0.35;
  double lidar_angular_step_deg = 1.0;
  double lidar_max_range_m = 50.0;
  double lidar_noise_std = 0.01;
  std::vector<double> lidar_elevations_deg = {0.0};

  static RigConfig standard();
};

// World frame of one mounted sensor stack.
struct Frame3 {
  Vec3 pos;
  double yaw = 0;
};

Frame3 stack_world(const Pose2& robot, const SensorStack& stack,
                   double sensor_height);
Vec3 dir_to_world(const Frame3& f, const Vec3& local);

constexpr int kIrsZones = 64;  // 8x8

// Zone direction in the stack's camera frame (row-major zone id, row 0 on
// top, column 0 on the left of the image).
Vec3 irs_zone_dir_cam(const SensorStack& stack, int zone);
// Camera pixel the zone's ray passes through.
void irs_zone_pixel(const SensorStack& stack, int zone, int& u, int& v);

struct IrsReading {
  float range_m = 0;
  bool valid = false;
  bool operator==(const IrsReading&) const = default;
};

struct StackFrame {
  std::vector<float> cam_rgb;  // height*width*3, row-major, [0,1]
  float uss_range_m = 0;
  bool uss_echo = false;
  std::array<IrsReading, kIrsZones> irs;
  std::vector<float> depth_m;  // height*width; <= 0 marks invalid
};

struct LidarBeam {
  float azimuth_deg = 0;  // robot frame
  float elevation_deg = 0;
  float range_m = 0;
};

struct SensorFrame {
  double timestamp = 0;
  Pose2 pose_true;  // simulator ground truth
  Pose2 pose_used;  // with injected noise when configured; what training sees
  std::array<StackFrame, 2> stacks;
  std::vector<LidarBeam> lidar;
};

// ---- individual sensor models ----

// Per-pixel raycast colors with additive gaussian noise, clamped to [0,1];
// pixels whose rays miss everything are background black.
std::vector<float> sense_camera(const Environment& env, const Frame3& pose,
                                const CameraIntrinsics& intr, double noise_std,
                                Rng& rng);

// Minimum distance over a dense horizontal fan of 129 rays across the cone.
// No echo when nothing inside the cone lies within max range.
std::optional<double> sense_uss(const Environment& env, const Frame3& pose,
                                double half_angle_deg, double max_range_m,
                                double noise_std, Rng& rng);

std::array<IrsReading, kIrsZones> sense_irs(const Environment& env,
                                            const Frame3& pose,
                                            const SensorStack& stack,
                                            Rng& rng);

std::vector<LidarBeam> sense_lidar(const Environment& env, const Pose2& robot,
                                   const RigConfig& rig, Rng& rng);

std::vector<float> sense_depth_camera(const Environment& env,
                                      const Frame3& pose,
                                      const CameraIntrinsics& intr,
                                      double max_range_m, double noise_std,
                                      Rng& rng);

// ---- trajectories ----

// Presets: "loop" (perimeter circuit), "line" (straight out and back),
// "sweep" (lawnmower passes). Poses are collision-checked against walls.
std::vector<TimedPose> make_trajectory(const Environment& env,
                                       const std::string& preset, int frames,
                                       double dt);
std::vector<std::string> trajectory_ids();

double clearance(const Environment& env, double x, double y);

// ---- dataset ----

struct PoseNoise {
  double sigma_xy_m = 0;
  double sigma_yaw_deg = 0;
  bool enabled() const { return sigma_xy_m > 0 || sigma_yaw_deg > 0; }
};

struct Dataset {
  std::string scene;
  Environment env;
  RigConfig rig;
  SceneFrame frame;  // world <-> unit cube
  uint64_t seed = 0;
  PoseNoise pose_noise;
  std::vector<SensorFrame> frames;

  double irs_valid_fraction() const;
};

Dataset generate_dataset(const Environment& env,
                         const std::vector<TimedPose>& trajectory,
                         const RigConfig& rig, uint64_t seed,
                         const PoseNoise& noise = {});

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// P6 binary image IO used for the camera frames.
void write_ppm(const std::string& path, const std::vector<float>& rgb,
               int width, int height);
std::vector<float> read_ppm(const std::string& path, int& width, int& height);

}  // namespace vnf::simrig
