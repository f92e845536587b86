#include "vnf/simrig.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vnf::simrig {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kPathMargin = 0.25;

void add_rect(std::vector<Wall>& walls, double x1, double y1, double x2,
              double y2, double r, double g, double b) {
  walls.push_back({x1, y1, x2, y1, {r, g, b}});
  walls.push_back({x2, y1, x2, y2, {r, g, b}});
  walls.push_back({x2, y2, x1, y2, {r, g, b}});
  walls.push_back({x1, y2, x1, y1, {r, g, b}});
}

double point_segment_dist(double px, double py, const Wall& w) {
  double ex = w.x2 - w.x1, ey = w.y2 - w.y1;
  double len2 = ex * ex + ey * ey;
  double u = len2 > 0 ? ((px - w.x1) * ex + (py - w.y1) * ey) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  double cx = w.x1 + u * ex, cy = w.y1 + u * ey;
  return std::hypot(px - cx, py - cy);
}

}  // namespace

Aabb Environment::world_box() const {
  VNF_REQUIRE(!walls.empty(), "environment has no walls");
  Aabb box{{walls[0].x1, walls[0].y1, floor_z}, {walls[0].x1, walls[0].y1,
                                                 ceiling_z}};
  for (const Wall& w : walls) {
    box.grow({w.x1, w.y1, floor_z});
    box.grow({w.x2, w.y2, ceiling_z});
  }
  return box;
}

Environment make_scene(const std::string& id) {
  Environment env;
  env.name = id;
  // pure extruded walls: keeps range sensors consistent with the planar
  // evaluation (no floor/ceiling returns shadowing the nearest wall)
  env.has_floor = false;
  env.has_ceiling = false;
  auto& w = env.walls;
  if (id == "mini-office") {
    // 9 x 8 m room, cluttered center: desks, cupboard, chair boxes
    w.push_back({0, 0, 9, 0, {0.75, 0.30, 0.25}});
    w.push_back({9, 0, 9, 8, {0.30, 0.55, 0.75}});
    w.push_back({9, 8, 0, 8, {0.35, 0.65, 0.35}});
    w.push_back({0, 8, 0, 0, {0.70, 0.60, 0.25}});
    add_rect(w, 2.2, 2.2, 3.6, 3.0, 0.55, 0.40, 0.28);
    add_rect(w, 5.4, 2.4, 6.9, 3.2, 0.30, 0.35, 0.55);
    add_rect(w, 2.2, 5.0, 3.7, 5.8, 0.50, 0.28, 0.45);
    add_rect(w, 5.6, 4.8, 6.8, 5.7, 0.28, 0.50, 0.50);
    add_rect(w, 4.2, 3.2, 4.7, 3.7, 0.60, 0.55, 0.30);
    add_rect(w, 6.5, 5.9, 7.0, 6.4, 0.45, 0.45, 0.60);
    add_rect(w, 1.6, 6.2, 2.1, 6.7, 0.55, 0.50, 0.45);
  } else if (id == "mini-commons") {
    // 18 x 12 m common area, sparse islands far apart
    w.push_back({0, 0, 18, 0, {0.70, 0.32, 0.28}});
    w.push_back({18, 0, 18, 12, {0.28, 0.52, 0.72}});
    w.push_back({18, 12, 0, 12, {0.34, 0.62, 0.34}});
    w.push_back({0, 12, 0, 0, {0.68, 0.58, 0.26}});
    add_rect(w, 3.0, 3.2, 5.2, 4.4, 0.55, 0.35, 0.30);   // couch cluster
    add_rect(w, 13.0, 8.0, 15.4, 9.6, 0.32, 0.42, 0.58); // kitchen corner
    add_rect(w, 8.2, 4.6, 9.4, 5.6, 0.52, 0.48, 0.30);   // table
    add_rect(w, 11.0, 2.6, 12.2, 3.6, 0.36, 0.52, 0.46); // table
  } else if (id == "smoke-box") {
    // 4 x 4 m test room with one center block
    w.push_back({0, 0, 4, 0, {0.75, 0.30, 0.25}});
    w.push_back({4, 0, 4, 4, {0.30, 0.55, 0.75}});
    w.push_back({4, 4, 0, 4, {0.35, 0.65, 0.35}});
    w.push_back({0, 4, 0, 0, {0.70, 0.60, 0.25}});
    add_rect(w, 2.2, 1.2, 2.7, 1.7, 0.50, 0.40, 0.55);
  } else {
    fail_invalid("unknown scene id: " + id);
  }
  return env;
}

std::vector<std::string> scene_ids() {
  return {"mini-office", "mini-commons", "smoke-box"};
}

RaycastHit raycast(const Environment& env, const Vec3& origin,
                   const Vec3& dir) {
  VNF_REQUIRE(dir.norm() > 0, "raycast: direction must be nonzero");
  if (origin.z >= env.floor_z && origin.z <= env.ceiling_z) {
    for (const Wall& w : env.walls)
      VNF_REQUIRE(point_segment_dist(origin.x, origin.y, w) > kRayEps,
                  "raycast: origin inside a wall");
  }

  RaycastHit best;
  best.distance = std::numeric_limits<double>::infinity();

  for (const Wall& w : env.walls) {
    double ex = w.x2 - w.x1, ey = w.y2 - w.y1;
    double det = -dir.x * ey + ex * dir.y;
    if (std::abs(det) < 1e-15) continue;  // parallel
    double rx = w.x1 - origin.x, ry = w.y1 - origin.y;
    double t = (-rx * ey + ex * ry) / det;
    double u = (dir.x * ry - dir.y * rx) / det;
    if (t <= kRayEps || u < 0 || u > 1) continue;
    double z = origin.z + t * dir.z;
    if (z < env.floor_z || z > env.ceiling_z) continue;
    if (t < best.distance) {
      best.hit = true;
      best.distance = t;
      double shade = 1.0;
      if (env.striped_walls) {
        double along = u * std::hypot(ex, ey);
        shade = (int(std::floor(along / 0.5)) % 2 == 0) ? 1.0 : 0.72;
      }
      for (int c = 0; c < 3; ++c) best.color[c] = clamp01(w.color[c] * shade);
    }
  }

  auto try_plane = [&](double zp, const double* color, bool checker) {
    if (std::abs(dir.z) < 1e-15) return;
    double t = (zp - origin.z) / dir.z;
    if (t <= kRayEps || t >= best.distance) return;
    best.hit = true;
    best.distance = t;
    double px = origin.x + t * dir.x, py = origin.y + t * dir.y;
    double shade = 1.0;
    if (checker)
      shade = ((int(std::floor(px)) + int(std::floor(py))) & 1) ? 0.82 : 1.12;
    for (int c = 0; c < 3; ++c) best.color[c] = clamp01(color[c] * shade);
  };
  if (env.has_floor) try_plane(env.floor_z, env.floor_color, true);
  if (env.has_ceiling) try_plane(env.ceiling_z, env.ceiling_color, false);

  if (!best.hit) best.distance = 0;
  return best;
}

Vec3 pixel_dir_cam(const CameraIntrinsics& intr, double u, double v) {
  Vec3 d{1.0, -(u - intr.cx()) / intr.fx(), -(v - intr.cy()) / intr.fy()};
  return d.normalized();
}

RigConfig RigConfig::standard() {
  RigConfig rig;
  rig.stacks[0].mount_dy = 0.135;
  rig.stacks[0].mount_yaw_deg = 14.5;
  rig.stacks[1].mount_dy = -0.135;
  rig.stacks[1].mount_yaw_deg = -14.5;
  return rig;
}

Frame3 stack_world(const Pose2& robot, const SensorStack& stack,
                   double sensor_height) {
  double cy = std::cos(robot.yaw), sy = std::sin(robot.yaw);
  Frame3 f;
  f.pos = {robot.x + cy * stack.mount_dx - sy * stack.mount_dy,
           robot.y + sy * stack.mount_dx + cy * stack.mount_dy, sensor_height};
  f.yaw = robot.yaw + deg_to_rad(stack.mount_yaw_deg);
  return f;
}

Vec3 dir_to_world(const Frame3& f, const Vec3& local) {
  double cy = std::cos(f.yaw), sy = std::sin(f.yaw);
  return {cy * local.x - sy * local.y, sy * local.x + cy * local.y, local.z};
}

Vec3 irs_zone_dir_cam(const SensorStack& stack, int zone) {
  VNF_REQUIRE(zone >= 0 && zone < kIrsZones, "irs zone out of range");
  int r = zone / 8, c = zone % 8;
  double fov = deg_to_rad(stack.irs_fov_deg);
  double ty = std::tan((0.5 - (c + 0.5) / 8.0) * fov);  // left positive
  double tz = std::tan((0.5 - (r + 0.5) / 8.0) * fov);  // up positive
  return Vec3{1.0, ty, tz}.normalized();
}

void irs_zone_pixel(const SensorStack& stack, int zone, int& u, int& v) {
  Vec3 d = irs_zone_dir_cam(stack, zone);
  const CameraIntrinsics& intr = stack.cam;
  u = int(std::lround(intr.cx() - intr.fx() * d.y / d.x));
  v = int(std::lround(intr.cy() - intr.fy() * d.z / d.x));
  u = std::clamp(u, 0, intr.width - 1);
  v = std::clamp(v, 0, intr.height - 1);
}

std::vector<float> sense_camera(const Environment& env, const Frame3& pose,
                                const CameraIntrinsics& intr, double noise_std,
                                Rng& rng) {
  std::vector<float> img(size_t(intr.width) * intr.height * 3, 0.f);
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      Vec3 dir = dir_to_world(pose, pixel_dir_cam(intr, u, v));
      RaycastHit hit = raycast(env, pose.pos, dir);
      float* px = img.data() + (size_t(v) * intr.width + u) * 3;
      for (int c = 0; c < 3; ++c) {
        double val = hit.hit ? hit.color[c] : 0.0;
        if (noise_std > 0) val += rng.normal(0, noise_std);
        px[c] = float(clamp01(val));
      }
    }
  return img;
}

std::optional<double> sense_uss(const Environment& env, const Frame3& pose,
                                double half_angle_deg, double max_range_m,
                                double noise_std, Rng& rng) {
  const int kFan = 129;
  double half = deg_to_rad(half_angle_deg);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kFan; ++i) {
    double a = -half + 2 * half * i / (kFan - 1);
    Vec3 dir = dir_to_world(pose, {std::cos(a), std::sin(a), 0});
    RaycastHit hit = raycast(env, pose.pos, dir);
    if (hit.hit) best = std::min(best, hit.distance);
  }
  if (best > max_range_m) return std::nullopt;
  return std::max(0.01, best + rng.normal(0, noise_std));
}

std::array<IrsReading, kIrsZones> sense_irs(const Environment& env,
                                            const Frame3& pose,
                                            const SensorStack& stack,
                                            Rng& rng) {
  std::array<IrsReading, kIrsZones> out;
  for (int z = 0; z < kIrsZones; ++z) {
    Vec3 dir = dir_to_world(pose, irs_zone_dir_cam(stack, z));
    RaycastHit hit = raycast(env, pose.pos, dir);
    double drop = rng.uniform();
    double noise = rng.normal(0, stack.irs_noise_std);
    IrsReading r;
    if (hit.hit && hit.distance <= stack.irs_max_range_m &&
        drop >= stack.irs_dropout) {
      r.valid = true;
      r.range_m = float(std::max(0.01, hit.distance + noise));
    }
    out[z] = r;
  }
  return out;
}

std::vector<LidarBeam> sense_lidar(const Environment& env, const Pose2& robot,
                                   const RigConfig& rig, Rng& rng) {
  std::vector<LidarBeam> beams;
  Vec3 origin{robot.x, robot.y, rig.sensor_height_m};
  int n = int(std::floor(360.0 / rig.lidar_angular_step_deg + 1e-9));
  for (double elev : rig.lidar_elevations_deg) {
    double el = deg_to_rad(elev);
    for (int i = 0; i < n; ++i) {
      double az = i * rig.lidar_angular_step_deg;
      double a = robot.yaw + deg_to_rad(az);
      Vec3 dir{std::cos(el) * std::cos(a), std::cos(el) * std::sin(a),
               std::sin(el)};
      RaycastHit hit = raycast(env, origin, dir);
      double noise = rng.normal(0, rig.lidar_noise_std);
      if (hit.hit && hit.distance <= rig.lidar_max_range_m) {
        beams.push_back({float(az), float(elev),
                         float(std::max(0.01, hit.distance + noise))});
      }
    }
  }
  return beams;
}

std::vector<float> sense_depth_camera(const Environment& env,
                                      const Frame3& pose,
                                      const CameraIntrinsics& intr,
                                      double max_range_m, double noise_std,
                                      Rng& rng) {
  std::vector<float> depth(size_t(intr.width) * intr.height, -1.f);
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      Vec3 dir = dir_to_world(pose, pixel_dir_cam(intr, u, v));
      RaycastHit hit = raycast(env, pose.pos, dir);
      double noise = rng.normal(0, noise_std);
      if (hit.hit && hit.distance <= max_range_m)
        depth[size_t(v) * intr.width + u] =
            float(std::max(0.01, hit.distance + noise));
    }
  return depth;
}

double clearance(const Environment& env, double x, double y) {
  double best = std::numeric_limits<double>::infinity();
  for (const Wall& w : env.walls)
    best = std::min(best, point_segment_dist(x, y, w));
  return best;
}

namespace {

std::vector<TimedPose> polyline_path(const std::vector<std::pair<double, double>>& pts,
                                     bool closed, int frames, double dt) {
  std::vector<double> seg_len;
  double total = 0;
  int n = int(pts.size());
  int segs = closed ? n : n - 1;
  for (int i = 0; i < segs; ++i) {
    auto [ax, ay] = pts[i];
    auto [bx, by] = pts[(i + 1) % n];
    seg_len.push_back(std::hypot(bx - ax, by - ay));
    total += seg_len.back();
  }
  std::vector<TimedPose> out;
  for (int f = 0; f < frames; ++f) {
    double s = closed ? total * f / frames
                      : total * f / std::max(1, frames - 1);
    s = std::min(s, total - 1e-9);
    int i = 0;
    while (i + 1 < segs && s > seg_len[i]) {
      s -= seg_len[i];
      ++i;
    }
    auto [ax, ay] = pts[i];
    auto [bx, by] = pts[(i + 1) % n];
    double u = seg_len[i] > 0 ? s / seg_len[i] : 0;
    TimedPose tp;
    tp.t = f * dt;
    tp.pose.x = ax + u * (bx - ax);
    tp.pose.y = ay + u * (by - ay);
    tp.pose.yaw = std::atan2(by - ay, bx - ax);
    out.push_back(tp);
  }
  return out;
}

}  // namespace

std::vector<TimedPose> make_trajectory(const Environment& env,
                                       const std::string& preset, int frames,
                                       double dt) {
  VNF_REQUIRE(frames > 0, "trajectory: need at least one frame");
  Aabb box = env.world_box();
  double inset = std::min(1.0, 0.22 * std::min(box.extent().x, box.extent().y));
  double x0 = box.lo.x + inset, x1 = box.hi.x - inset;
  double y0 = box.lo.y + inset, y1 = box.hi.y - inset;
  double ym = 0.5 * (y0 + y1);

  std::vector<TimedPose> traj;
  if (preset == "loop") {
    traj = polyline_path({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, true,
                         frames, dt);
  } else if (preset == "line") {
    traj = polyline_path({{x0, ym}, {x1, ym}, {x0, ym}}, false, frames, dt);
  } else if (preset == "sweep") {
    traj = polyline_path({{x0, y0}, {x1, y0}, {x1, ym}, {x0, ym}, {x0, y1},
                          {x1, y1}},
                         false, frames, dt);
  } else {
    fail_invalid("unknown trajectory preset: " + preset);
  }

  for (size_t i = 0; i < traj.size(); ++i)
    VNF_REQUIRE(clearance(env, traj[i].pose.x, traj[i].pose.y) >= kPathMargin,
                "trajectory: pose " + std::to_string(i) + " collides");
  return traj;
}

std::vector<std::string> trajectory_ids() { return {"loop", "line", "sweep"}; }

double Dataset::irs_valid_fraction() const {
  size_t valid = 0, total = 0;
  for (const SensorFrame& f : frames)
    for (const StackFrame& s : f.stacks)
      for (const IrsReading& r : s.irs) {
        ++total;
        if (r.valid) ++valid;
      }
  return total ? double(valid) / double(total) : 0.0;
}

Dataset generate_dataset(const Environment& env,
                         const std::vector<TimedPose>& trajectory,
                         const RigConfig& rig, uint64_t seed,
                         const PoseNoise& noise) {
  VNF_REQUIRE(!trajectory.empty(), "generate_dataset: empty trajectory");
  Dataset ds;
  ds.scene = env.name;
  ds.env = env;
  ds.rig = rig;
  ds.seed = seed;
  ds.pose_noise = noise;
  ds.frame = SceneFrame::from_box(env.world_box());

  Rng master(seed);
  double prev_t = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < trajectory.size(); ++i) {
    VNF_REQUIRE(trajectory[i].t > prev_t,
                "generate_dataset: timestamps must strictly increase");
    prev_t = trajectory[i].t;
    VNF_REQUIRE(clearance(env, trajectory[i].pose.x, trajectory[i].pose.y) >=
                    kPathMargin,
                "generate_dataset: pose " + std::to_string(i) + " collides");

    Rng rng = master.fork(i);
    SensorFrame frame;
    frame.timestamp = trajectory[i].t;
    frame.pose_true = trajectory[i].pose;
    frame.pose_used = frame.pose_true;
    if (noise.enabled()) {
      frame.pose_used.x += rng.normal(0, noise.sigma_xy_m);
      frame.pose_used.y += rng.normal(0, noise.sigma_xy_m);
      frame.pose_used.yaw += rng.normal(0, deg_to_rad(noise.sigma_yaw_deg));
    }

    for (int s = 0; s < 2; ++s) {
      const SensorStack& stack = rig.stacks[s];
      Frame3 pose = stack_world(frame.pose_true, stack, rig.sensor_height_m);
      StackFrame& sf = frame.stacks[s];
      sf.cam_rgb = sense_camera(env, pose, stack.cam, stack.cam_noise_std, rng);
      auto echo = sense_uss(env, pose, stack.uss_half_angle_deg,
                            stack.uss_max_range_m, stack.uss_noise_std, rng);
      sf.uss_echo = echo.has_value();
      sf.uss_range_m = echo ? float(*echo) : 0.f;
      sf.irs = sense_irs(env, pose, stack, rng);
      sf.depth_m = sense_depth_camera(env, pose, stack.cam,
                                      stack.depth_max_range_m,
                                      stack.depth_noise_std, rng);
    }
    frame.lidar = sense_lidar(env, frame.pose_true, rig, rng);
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

// ---- persistence ----

void write_ppm(const std::string& path, const std::vector<float>& rgb,
               int width, int height) {
  VNF_REQUIRE(int(rgb.size()) == width * height * 3, "write_ppm: bad shape");
  std::ofstream out(path, std::ios::binary);
  VNF_REQUIRE(out.good(), "write_ppm: cannot open " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> bytes(rgb.size());
  for (size_t i = 0; i < rgb.size(); ++i)
    bytes[i] = (unsigned char)std::clamp(int(std::lround(rgb[i] * 255.0)), 0,
                                         255);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
}

std::vector<float> read_ppm(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  VNF_REQUIRE(in.good(), "read_ppm: cannot open " + path);
  std::string magic;
  int maxval;
  in >> magic >> width >> height >> maxval;
  VNF_REQUIRE(magic == "P6" && maxval == 255, "read_ppm: unsupported format");
  in.get();
  std::vector<unsigned char> bytes(size_t(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  VNF_REQUIRE(in.gcount() == std::streamsize(bytes.size()),
              "read_ppm: truncated file");
  std::vector<float> rgb(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) rgb[i] = bytes[i] / 255.0f;
  return rgb;
}

namespace {

json rig_to_json(const RigConfig& rig) {
  json j;
  j["sensor_height_m"] = rig.sensor_height_m;
  j["lidar_angular_step_deg"] = rig.lidar_angular_step_deg;
  j["lidar_max_range_m"] = rig.lidar_max_range_m;
  j["lidar_noise_std"] = rig.lidar_noise_std;
  j["lidar_elevations_deg"] = rig.lidar_elevations_deg;
  for (int s = 0; s < 2; ++s) {
    const SensorStack& st = rig.stacks[s];
    json k;
    k["mount_dx"] = st.mount_dx;
    k["mount_dy"] = st.mount_dy;
    k["mount_yaw_deg"] = st.mount_yaw_deg;
    k["cam_width"] = st.cam.width;
    k["cam_height"] = st.cam.height;
    k["cam_hfov_deg"] = st.cam.hfov_deg;
    k["cam_noise_std"] = st.cam_noise_std;
    k["uss_half_angle_deg"] = st.uss_half_angle_deg;
    k["uss_max_range_m"] = st.uss_max_range_m;
    k["uss_noise_std"] = st.uss_noise_std;
    k["irs_fov_deg"] = st.irs_fov_deg;
    k["irs_max_range_m"] = st.irs_max_range_m;
    k["irs_noise_std"] = st.irs_noise_std;
    k["irs_dropout"] = st.irs_dropout;
    k["depth_max_range_m"] = st.depth_max_range_m;
    k["depth_noise_std"] = st.depth_noise_std;
    j["stacks"].push_back(k);
  }
  return j;
}

RigConfig rig_from_json(const json& j) {
  RigConfig rig;
  rig.sensor_height_m = j.at("sensor_height_m");
  rig.lidar_angular_step_deg = j.at("lidar_angular_step_deg");
  rig.lidar_max_range_m = j.at("lidar_max_range_m");
  rig.lidar_noise_std = j.at("lidar_noise_std");
  rig.lidar_elevations_deg = j.at("lidar_elevations_deg").get<std::vector<double>>();
  for (int s = 0; s < 2; ++s) {
    const json& k = j.at("stacks").at(s);
    SensorStack& st = rig.stacks[s];
    st.mount_dx = k.at("mount_dx");
    st.mount_dy = k.at("mount_dy");
    st.mount_yaw_deg = k.at("mount_yaw_deg");
    st.cam.width = k.at("cam_width");
    st.cam.height = k.at("cam_height");
    st.cam.hfov_deg = k.at("cam_hfov_deg");
    st.cam_noise_std = k.at("cam_noise_std");
    st.uss_half_angle_deg = k.at("uss_half_angle_deg");
    st.uss_max_range_m = k.at("uss_max_range_m");
    st.uss_noise_std = k.at("uss_noise_std");
    st.irs_fov_deg = k.at("irs_fov_deg");
    st.irs_max_range_m = k.at("irs_max_range_m");
    st.irs_noise_std = k.at("irs_noise_std");
    st.irs_dropout = k.at("irs_dropout");
    st.depth_max_range_m = k.at("depth_max_range_m");
    st.depth_noise_std = k.at("depth_noise_std");
  }
  return rig;
}

std::string frame_dir(const std::string& root, size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return root + "/frames/" + buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir + "/frames");

  json meta;
  meta["scene"] = ds.scene;
  meta["seed"] = ds.seed;
  meta["units"] = "meters";
  meta["n_frames"] = ds.frames.size();
  meta["frame_center"] = {ds.frame.center.x, ds.frame.center.y,
                          ds.frame.center.z};
  meta["frame_side"] = ds.frame.side;
  meta["pose_noise_sigma_xy_m"] = ds.pose_noise.sigma_xy_m;
  meta["pose_noise_sigma_yaw_deg"] = ds.pose_noise.sigma_yaw_deg;
  meta["rig"] = rig_to_json(ds.rig);
  json jenv;
  jenv["name"] = ds.env.name;
  jenv["floor_z"] = ds.env.floor_z;
  jenv["ceiling_z"] = ds.env.ceiling_z;
  jenv["has_floor"] = ds.env.has_floor;
  jenv["has_ceiling"] = ds.env.has_ceiling;
  jenv["striped_walls"] = ds.env.striped_walls;
  jenv["floor_color"] = {ds.env.floor_color[0], ds.env.floor_color[1],
                         ds.env.floor_color[2]};
  jenv["ceiling_color"] = {ds.env.ceiling_color[0], ds.env.ceiling_color[1],
                           ds.env.ceiling_color[2]};
  for (const Wall& w : ds.env.walls)
    jenv["walls"].push_back({w.x1, w.y1, w.x2, w.y2, w.color[0], w.color[1],
                             w.color[2]});
  meta["env"] = jenv;
  {
    std::ofstream out(dir + "/meta.json");
    VNF_REQUIRE(out.good(), "save_dataset: cannot write meta.json");
    out << meta.dump(2) << "\n";
  }

  {
    std::ofstream out(dir + "/poses.csv");
    out << "t,x,y,yaw,x_used,y_used,yaw_used\n";
    for (const SensorFrame& f : ds.frames)
      out << format_g(f.timestamp, 17) << "," << format_g(f.pose_true.x, 17)
          << "," << format_g(f.pose_true.y, 17) << ","
          << format_g(f.pose_true.yaw, 17) << ","
          << format_g(f.pose_used.x, 17) << "," << format_g(f.pose_used.y, 17)
          << "," << format_g(f.pose_used.yaw, 17) << "\n";
  }

  for (size_t i = 0; i < ds.frames.size(); ++i) {
    const SensorFrame& f = ds.frames[i];
    std::string fdir = frame_dir(dir, i);
    fs::create_directories(fdir);
    for (int s = 0; s < 2; ++s) {
      const StackFrame& sf = f.stacks[s];
      const CameraIntrinsics& intr = ds.rig.stacks[s].cam;
      std::string idx = std::to_string(s);
      write_ppm(fdir + "/cam" + idx + ".ppm", sf.cam_rgb, intr.width,
                intr.height);
      {
        std::ofstream out(fdir + "/uss" + idx + ".csv");
        out << "range_m,echo\n";
        out << format_g(sf.uss_range_m) << "," << (sf.uss_echo ? 1 : 0) << "\n";
      }
      {
        std::ofstream out(fdir + "/irs" + idx + ".csv");
        out << "zone,range_m,valid\n";
        for (int z = 0; z < kIrsZones; ++z)
          out << z << "," << format_g(sf.irs[z].range_m) << ","
              << (sf.irs[z].valid ? 1 : 0) << "\n";
      }
      {
        std::ofstream out(fdir + "/depth" + idx + ".bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(sf.depth_m.data()),
                  std::streamsize(sf.depth_m.size() * sizeof(float)));
      }
    }
    {
      std::ofstream out(fdir + "/lidar.csv");
      out << "azimuth_deg,elevation_deg,range_m\n";
      for (const LidarBeam& b : f.lidar)
        out << format_g(b.azimuth_deg) << "," << format_g(b.elevation_deg)
            << "," << format_g(b.range_m) << "\n";
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  std::ifstream meta_in(dir + "/meta.json");
  VNF_REQUIRE(meta_in.good(), "load_dataset: missing meta.json in " + dir);
  json meta = json::parse(meta_in);

  Dataset ds;
  ds.scene = meta.at("scene");
  ds.seed = meta.at("seed");
  ds.frame.center = {meta.at("frame_center").at(0), meta.at("frame_center").at(1),
                     meta.at("frame_center").at(2)};
  ds.frame.side = meta.at("frame_side");
  ds.pose_noise.sigma_xy_m = meta.at("pose_noise_sigma_xy_m");
  ds.pose_noise.sigma_yaw_deg = meta.at("pose_noise_sigma_yaw_deg");
  ds.rig = rig_from_json(meta.at("rig"));
  const json& jenv = meta.at("env");
  ds.env.name = jenv.at("name");
  ds.env.floor_z = jenv.at("floor_z");
  ds.env.ceiling_z = jenv.at("ceiling_z");
  ds.env.has_floor = jenv.at("has_floor");
  ds.env.has_ceiling = jenv.at("has_ceiling");
  ds.env.striped_walls = jenv.at("striped_walls");
  for (int c = 0; c < 3; ++c) {
    ds.env.floor_color[c] = jenv.at("floor_color").at(c);
    ds.env.ceiling_color[c] = jenv.at("ceiling_color").at(c);
  }
  for (const json& w : jenv.at("walls"))
    ds.env.walls.push_back(
        {w.at(0), w.at(1), w.at(2), w.at(3), {w.at(4), w.at(5), w.at(6)}});

  size_t n = meta.at("n_frames");
  std::vector<std::array<double, 7>> poses;
  {
    std::ifstream in(dir + "/poses.csv");
    VNF_REQUIRE(in.good(), "load_dataset: missing poses.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      auto cells = split_csv(line);
      VNF_REQUIRE(cells.size() == 7, "load_dataset: malformed poses.csv");
      std::array<double, 7> row;
      for (int i = 0; i < 7; ++i) row[i] = std::stod(cells[i]);
      poses.push_back(row);
    }
  }
  VNF_REQUIRE(poses.size() == n, "load_dataset: pose count mismatch");

  for (size_t i = 0; i < n; ++i) {
    SensorFrame f;
    f.timestamp = poses[i][0];
    f.pose_true = {poses[i][1], poses[i][2], poses[i][3]};
    f.pose_used = {poses[i][4], poses[i][5], poses[i][6]};
    std::string fdir = frame_dir(dir, i);
    for (int s = 0; s < 2; ++s) {
      StackFrame& sf = f.stacks[s];
      std::string idx = std::to_string(s);
      int w = 0, h = 0;
      sf.cam_rgb = read_ppm(fdir + "/cam" + idx + ".ppm", w, h);
      VNF_REQUIRE(w == ds.rig.stacks[s].cam.width &&
                      h == ds.rig.stacks[s].cam.height,
                  "load_dataset: image size mismatch");
      {
        std::ifstream in(fdir + "/uss" + idx + ".csv");
        VNF_REQUIRE(in.good(), "load_dataset: missing uss csv");
        std::string line;
        std::getline(in, line);
        std::getline(in, line);
        auto cells = split_csv(line);
        sf.uss_range_m = float(std::stod(cells[0]));
        sf.uss_echo = cells[1] == "1";
      }
      {
        std::ifstream in(fdir + "/irs" + idx + ".csv");
        VNF_REQUIRE(in.good(), "load_dataset: missing irs csv");
        std::string line;
        std::getline(in, line);
        for (int z = 0; z < kIrsZones; ++z) {
          std::getline(in, line);
          auto cells = split_csv(line);
          sf.irs[z].range_m = float(std::stod(cells[1]));
          sf.irs[z].valid = cells[2] == "1";
        }
      }
      {
        std::ifstream in(fdir + "/depth" + idx + ".bin", std::ios::binary);
        VNF_REQUIRE(in.good(), "load_dataset: missing depth bin");
        sf.depth_m.resize(size_t(w) * h);
        in.read(reinterpret_cast<char*>(sf.depth_m.data()),
                std::streamsize(sf.depth_m.size() * sizeof(float)));
      }
    }
    {
      std::ifstream in(fdir + "/lidar.csv");
      VNF_REQUIRE(in.good(), "load_dataset: missing lidar csv");
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        auto cells = split_csv(line);
        f.lidar.push_back({float(std::stod(cells[0])), float(std::stod(cells[1])),
                           float(std::stod(cells[2]))});
      }
    }
    ds.frames.push_back(std::move(f));
  }
  return ds;
}

}  // namespace vnf::simrig
