#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vnf {

[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw std::invalid_argument(msg);
}

#define VNF_REQUIRE(cond, msg) \
  do {                         \
    if (!(cond)) ::vnf::fail_invalid(msg); \
  } while (0)

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0 ? *this / n : Vec3{0, 0, 0};
  }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Aabb {
  Vec3 lo, hi;
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * 0.5; }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
  void grow(const Vec3& p) {
    lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
  }
};

// Uniform world <-> unit-cube mapping shared by field, grid and renderer.
// One isotropic scale keeps directions and relative distances intact:
// meters = normalized * side.
struct SceneFrame {
  Vec3 center;
  double side = 1.0;

  static SceneFrame from_box(const Aabb& box, double margin = 1.05) {
    Vec3 e = box.extent();
    SceneFrame f;
    f.center = box.center();
    f.side = std::max({e.x, e.y, e.z}) * margin;
    return f;
  }
  Vec3 to_unit(const Vec3& w) const {
    return (w - center) / side + Vec3{0.5, 0.5, 0.5};
  }
  Vec3 to_world(const Vec3& u) const {
    return (u - Vec3{0.5, 0.5, 0.5}) * side + center;
  }
  double meters_to_unit(double m) const { return m / side; }
  double unit_to_meters(double u) const { return u * side; }
};

// Deterministic, platform-independent RNG (splitmix64 core). std::mt19937
// with library distributions is reproducible only per libstdc++ version;
// dataset bytes must not depend on that.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // [0,n)
  uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mean, double std) { return mean + std * normal(); }

  // Independent substream, e.g. one per frame.
  Rng fork(uint64_t stream) const {
    Rng r;
    r.state_ = state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    r.next_u64();
    return r;
  }

  uint64_t raw_state() const { return state_; }
  void set_raw_state(uint64_t s) { state_ = s; have_spare_ = false; }

 private:
  uint64_t state_;
  double spare_ = 0;
  bool have_spare_ = false;
};

// Static chunking with in-order completion; result merging done by the
// caller in chunk order so thread count does not change float sums.
inline void parallel_for_chunks(int64_t n, int threads,
                                const std::function<void(int64_t, int64_t, int)>& fn) {
  if (threads <= 1 || n < 2) {
    fn(0, n, 0);
    return;
  }
  int nt = std::min<int64_t>(threads, n);
  int64_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) {
    int64_t b = t * chunk, e = std::min<int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([=, &fn] { fn(b, e, t); });
  }
  for (auto& th : pool) th.join();
}

inline std::string format_g(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline bool is_finite(double v) { return std::isfinite(v); }

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline double deg_to_rad(double d) { return d * M_PI / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / M_PI; }

}  // namespace vnf
