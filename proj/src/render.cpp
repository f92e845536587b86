#include "vnf/render.hpp"

#include <fstream>
#include <limits>

namespace vnf::render {

bool clip_to_cube(Ray& ray) {
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
  double d[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < 0 || o[a] > 1) return false;
    } else {
      double ta = (0.0 - o[a]) / d[a], tb = (1.0 - o[a]) / d[a];
      lo = std::max(lo, std::min(ta, tb));
      hi = std::min(hi, std::max(ta, tb));
    }
  }
  if (lo >= hi) return false;
  ray.t_near = std::max(lo, 0.0);
  ray.t_far = hi;
  return true;
}

RaySamples march_ray(const Ray& ray, const occgrid::OccupancyGrid* grid,
                     double step, int max_samples) {
  VNF_REQUIRE(step > 0, "march_ray: step must be positive");
  VNF_REQUIRE(ray.t_near < ray.t_far, "march_ray: t_near must precede t_far");
  RaySamples s;
  s.origin = ray.origin;
  s.dir = ray.dir;
  int total = int(std::floor((ray.t_far - ray.t_near) / step));
  for (int j = 0; j < total && s.count() < max_samples; ++j) {
    double d = ray.t_near + (j + 0.5) * step;
    Vec3 p = ray.origin + ray.dir * d;
    if (grid && !grid->is_occupied(p)) continue;
    s.depth.push_back(d);
    s.pos.push_back(p);
  }
  int m = s.count();
  s.delta.resize(m);
  for (int j = 0; j + 1 < m; ++j) s.delta[j] = s.depth[j + 1] - s.depth[j];
  if (m > 0) s.delta[m - 1] = step;
  return s;
}

DepthScan render_scan(const field::RadianceField<float>& f,
                      const occgrid::OccupancyGrid* grid,
                      const SceneFrame& frame, const Vec3& pose_world_xy,
                      double height_m, double angular_step_deg,
                      double step, int max_samples) {
  VNF_REQUIRE(angular_step_deg > 0, "render_scan: angular step must be > 0");
  Vec3 center_world{pose_world_xy.x, pose_world_xy.y, height_m};
  Vec3 origin = frame.to_unit(center_world);
  VNF_REQUIRE(origin.x >= 0 && origin.x <= 1 && origin.y >= 0 &&
                  origin.y <= 1 && origin.z >= 0 && origin.z <= 1,
              "render_scan: pose outside scene box");

  DepthScan scan;
  scan.sensor_world = center_world;
  int n = int(std::floor(360.0 / angular_step_deg + 1e-9));
  scan.entries.reserve(n);
  const double bg[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    double az = i * angular_step_deg;
    double rad = deg_to_rad(az);
    Ray ray;
    ray.origin = origin;
    ray.dir = {std::cos(rad), std::sin(rad), 0.0};
    DepthScan::Entry e{az, 0.0, false};
    if (clip_to_cube(ray)) {
      RaySamples s = march_ray(ray, grid, step, max_samples);
      if (s.count() > 0) {
        RayRender<float> rr = render_ray(f, s, /*want_color=*/false, bg);
        e.depth_m = frame.unit_to_meters(rr.result.depth);
        e.valid = true;
      }
    }
    scan.entries.push_back(e);
  }
  return scan;
}

void write_scan_csv(const DepthScan& scan, const std::string& path) {
  std::ofstream out(path);
  VNF_REQUIRE(out.good(), "write_scan_csv: cannot open " + path);
  out << "azimuth_deg,depth_m,valid\n";
  for (const auto& e : scan.entries)
    out << format_g(e.azimuth_deg) << "," << format_g(e.depth_m) << ","
        << (e.valid ? 1 : 0) << "\n";
}

BiasProbe measure_rendering_bias(const std::vector<double>& depths,
                                 const std::vector<double>& sigmas) {
  VNF_REQUIRE(depths.size() == sigmas.size() && !depths.empty(),
              "measure_rendering_bias: profile shape mismatch");
  RaySamples s;
  s.depth = depths;
  int m = s.count();
  s.delta.resize(m);
  for (int j = 0; j + 1 < m; ++j) s.delta[j] = depths[j + 1] - depths[j];
  s.delta[m - 1] = m > 1 ? s.delta[m - 2] : 1.0;

  double mass = 0, centroid = 0;
  for (int j = 0; j < m; ++j) {
    VNF_REQUIRE(sigmas[j] >= 0, "measure_rendering_bias: profile must be >= 0");
    mass += sigmas[j];
    centroid += sigmas[j] * depths[j];
  }
  VNF_REQUIRE(mass > 0, "measure_rendering_bias: profile must not be all zero");

  const double bg[3] = {0, 0, 0};
  RenderResult r = composite<double>(s, sigmas, {}, bg);
  return {r.depth, centroid / mass};
}

}  // namespace vnf::render
