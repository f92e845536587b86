#pragma once

#include <vector>

#include "vnf/common.hpp"
#include "vnf/field.hpp"
#include "vnf/occgrid.hpp"

// Occupancy-accelerated ray marching and volume rendering. Compositing
// follows the emission-absorption model: T_j = exp(-sum σ_l δ_l),
// ω_j = T_j (1 - e^{-σ_j δ_j}), color = Σ ω_j c_j, depth = Σ ω_j d_j with
// no renormalization of the weight mass.
namespace vnf::render {

// Fixed-step marching defaults: unit-cube diagonal / 1024.
inline double default_step() { return std::sqrt(3.0) / 1024.0; }
constexpr int kMaxSamples = 1024;

struct Ray {
  Vec3 origin;  // unit-cube coords
  Vec3 dir;     // unit
  double t_near = 0.0;
  double t_far = 0.0;
};

// Clips [0, inf) against the unit cube; false if the ray misses it.
bool clip_to_cube(Ray& ray);

struct RaySamples {
  Vec3 origin, dir;
  std::vector<double> depth;  // strictly increasing
  std::vector<double> delta;  // d_{j+1} - d_j, last one = step
  std::vector<Vec3> pos;
  int count() const { return int(depth.size()); }
};

// Fixed-step samples over [t_near, t_far], skipping unoccupied cells.
// A null grid means no skipping. Zero samples is a valid result.
RaySamples march_ray(const Ray& ray, const occgrid::OccupancyGrid* grid,
                     double step, int max_samples = kMaxSamples);

struct RenderResult {
  double rgb[3] = {0, 0, 0};
  double depth = 0.0;               // Σ ω_j d_j, normalized units
  double weight_sum = 0.0;          // Σ ω_j
  double final_transmittance = 1.0; // T_{M+1}
  bool hit = false;                 // false when M == 0 (background)
};

// Direct evaluation of the compositing equations given per-sample densities
// and optional colors (3 per sample). Accumulation runs in double.
template <class Real>
RenderResult composite(const RaySamples& s, const std::vector<Real>& sigma,
                       const std::vector<Real>& rgb,
                       const double background[3]) {
  RenderResult r;
  int m = s.count();
  if (m == 0) {
    for (int c = 0; c < 3; ++c) r.rgb[c] = background[c];
    return r;
  }
  bool with_color = !rgb.empty();
  double T = 1.0;
  double col[3] = {0, 0, 0}, dep = 0, wsum = 0;
  for (int j = 0; j < m; ++j) {
    double att = std::exp(-double(sigma[j]) * s.delta[j]);
    double Tn = T * att;
    double w = T - Tn;
    if (with_color)
      for (int c = 0; c < 3; ++c) col[c] += w * double(rgb[size_t(j) * 3 + c]);
    dep += w * s.depth[j];
    wsum += w;
    T = Tn;
  }
  for (int c = 0; c < 3; ++c) r.rgb[c] = col[c];
  r.depth = dep;
  r.weight_sum = wsum;
  r.final_transmittance = T;
  r.hit = true;
  return r;
}

// Gradients of (dL/dcolor, dL/ddepth) through the compositing equations
// back to per-sample densities and colors. One reverse sweep with suffix
// sums; dσ_k = δ_k (T_{k+1} v_k - Σ_{j>k} ω_j v_j) summed over channels.
template <class Real>
void composite_backward(const RaySamples& s, const std::vector<Real>& sigma,
                        const std::vector<Real>& rgb, const double dcolor[3],
                        double ddepth, std::vector<Real>& dsigma,
                        std::vector<Real>& drgb) {
  int m = s.count();
  dsigma.assign(m, Real(0));
  bool with_color = !rgb.empty() && dcolor;
  drgb.assign(with_color ? size_t(m) * 3 : 0, Real(0));
  if (m == 0) return;

  std::vector<double> w(m), Tnext(m);
  double T = 1.0;
  for (int j = 0; j < m; ++j) {
    double att = std::exp(-double(sigma[j]) * s.delta[j]);
    Tnext[j] = T * att;
    w[j] = T - Tnext[j];
    T = Tnext[j];
  }

  double rc[3] = {0, 0, 0}, rd = 0;  // suffix sums of ω_j v_j
  for (int k = m - 1; k >= 0; --k) {
    double acc = ddepth * (Tnext[k] * s.depth[k] - rd);
    if (with_color) {
      for (int c = 0; c < 3; ++c) {
        double ck = double(rgb[size_t(k) * 3 + c]);
        acc += dcolor[c] * (Tnext[k] * ck - rc[c]);
        drgb[size_t(k) * 3 + c] = Real(dcolor[c] * w[k]);
        rc[c] += w[k] * ck;
      }
    }
    dsigma[k] = Real(acc * s.delta[k]);
    rd += w[k] * s.depth[k];
  }
}

template <class Real>
struct RayRender {
  RenderResult result;
  field::FieldTape<Real> tape;
  std::vector<Real> sigma, rgb;
};

// Queries the field along the samples and composites. want_color=false
// skips the color head (depth-only rendering, e.g. scans).
template <class Real>
RayRender<Real> render_ray(const field::RadianceField<Real>& f,
                           const RaySamples& s, bool want_color,
                           const double background[3]) {
  RayRender<Real> rr;
  if (s.count() == 0) {
    rr.result = composite<Real>(s, {}, {}, background);
    return rr;
  }
  if (want_color) {
    std::vector<Vec3> dirs(s.pos.size(), s.dir);
    field::query_radiance(f, s.pos, dirs, rr.sigma, rr.rgb, &rr.tape);
  } else {
    field::query_density(f, s.pos, rr.sigma, &rr.tape);
  }
  rr.result = composite(s, rr.sigma, rr.rgb, background);
  return rr;
}

// Backward through compositing and the field into parameter grads.
template <class Real>
void render_ray_backward(const field::RadianceField<Real>& f,
                         const RaySamples& s, const RayRender<Real>& rr,
                         const double dcolor[3], double ddepth,
                         field::FieldGrads<Real>& grads) {
  if (s.count() == 0) return;
  std::vector<Real> dsigma, drgb;
  composite_backward(s, rr.sigma, rr.rgb, dcolor, ddepth, dsigma, drgb);
  field::field_backward(f, rr.tape, dsigma, drgb, grads);
}

struct DepthScan {
  Vec3 sensor_world;  // scan center at camera height, world coords
  struct Entry {
    double azimuth_deg;
    double depth_m;
    bool valid;
  };
  std::vector<Entry> entries;
};

// 360-degree horizontal depth scan rendered from the field at a fixed
// height; depths converted back to meters through the scene frame.
DepthScan render_scan(const field::RadianceField<float>& f,
                      const occgrid::OccupancyGrid* grid,
                      const SceneFrame& frame, const Vec3& pose_world_xy,
                      double height_m, double angular_step_deg,
                      double step = default_step(),
                      int max_samples = kMaxSamples);

void write_scan_csv(const DepthScan& scan, const std::string& path);

struct BiasProbe {
  double rendered_depth;
  double profile_center;
};

// Renders a positive density profile sampled along one ray and reports the
// rendered depth against the profile's center of symmetry (its density
// centroid). Diagnostic for the depth-underestimation property.
BiasProbe measure_rendering_bias(const std::vector<double>& depths,
                                 const std::vector<double>& sigmas);

}  // namespace vnf::render
