#include "vnf/occgrid.hpp"

#include <fstream>
#include <limits>

#include "json.hpp"

namespace vnf::occgrid {

double bayes_update(double prior, double p_m_occ, double p_m_emp,
                    bool* anomaly) {
  VNF_REQUIRE(prior >= 0 && prior <= 1 && p_m_occ >= 0 && p_m_occ <= 1 &&
                  p_m_emp >= 0 && p_m_emp <= 1,
              "bayes_update: inputs must be probabilities");
  double denom = p_m_occ * prior + p_m_emp * (1.0 - prior);
  if (denom <= 0) {
    if (anomaly) *anomaly = true;
    return prior;
  }
  double post = p_m_occ * prior / denom;
  return std::clamp(post, kProbFloor, 1.0 - kProbFloor);
}

double project_density(double sigma, double zeta, double sigma_t) {
  VNF_REQUIRE(sigma >= 0, "project_density: sigma must be >= 0");
  VNF_REQUIRE(zeta > 0 && sigma_t > 0,
              "project_density: zeta and sigma_t must be positive");
  if (sigma <= 0) return 0.0;
  double r = std::pow(sigma_t / sigma, zeta);
  if (!std::isfinite(r)) return 0.0;  // overflowed ratio: sigma vanishingly small
  return 1.0 / (1.0 + r);
}

OccupancyGrid::OccupancyGrid(int resolution, GridKind kind)
    : res_(resolution), kind_(kind) {
  VNF_REQUIRE(resolution >= 1, "occupancy grid: resolution must be >= 1");
  float init = kind == GridKind::virus ? 0.5f : 1.0f;
  cell_.assign(size_t(res_) * res_ * res_, init);
}

bool OccupancyGrid::cell_of(const Vec3& p, int& x, int& y, int& z) const {
  if (p.x < 0 || p.x >= 1 || p.y < 0 || p.y >= 1 || p.z < 0 || p.z >= 1)
    return false;
  x = int(p.x * res_);
  y = int(p.y * res_);
  z = int(p.z * res_);
  x = std::min(x, res_ - 1);
  y = std::min(y, res_ - 1);
  z = std::min(z, res_ - 1);
  return true;
}

bool OccupancyGrid::is_occupied(const Vec3& p, double tau_occ) const {
  int x, y, z;
  if (!cell_of(p, x, y, z)) return false;
  float v = cell_[index_of(x, y, z)];
  if (kind_ == GridKind::virus) return v >= tau_occ;
  return v > ngp_thresh_;
}

double OccupancyGrid::occupied_fraction() const {
  size_t n = 0;
  for (float v : cell_) {
    if (kind_ == GridKind::virus ? v >= tau_occ_ : v > ngp_thresh_) ++n;
  }
  return double(n) / double(cell_.size());
}

void OccupancyGrid::nerf_update(const DensityFn& density, int sample_count,
                                DensityProjectionParams& params, Rng& rng) {
  VNF_REQUIRE(sample_count > 0, "nerf_update: sample_count must be positive");
  size_t total = cell_.size();
  std::vector<size_t> picked(sample_count);
  int n_occ = sample_count / 2;
  for (int i = 0; i < sample_count; ++i) {
    size_t idx = rng.uniform_index(total);
    if (i < n_occ) {
      // draw from currently occupied cells, rejection with a cap
      for (int tries = 0; tries < 64; ++tries) {
        if (cell_[idx] >= tau_occ_) break;
        idx = rng.uniform_index(total);
      }
    }
    picked[i] = idx;
  }

  std::vector<Vec3> centers(sample_count);
  for (int i = 0; i < sample_count; ++i) {
    size_t idx = picked[i];
    int x = int(idx % res_), y = int((idx / res_) % res_),
        z = int(idx / (size_t(res_) * res_));
    centers[i] = {(x + 0.5) / res_, (y + 0.5) / res_, (z + 0.5) / res_};
  }
  std::vector<float> sigma;
  density(centers, sigma);

  double mean = 0;
  for (float s : sigma) mean += s;
  mean /= sample_count;
  params.sigma_t = std::min(params.sigma_t_max, std::max(mean, 1e-12));

  for (int i = 0; i < sample_count; ++i) {
    double p = project_density(sigma[i], params.zeta, params.sigma_t);
    bool anomaly = false;
    float& c = cell_[picked[i]];
    c = float(bayes_update(c, p, 1.0 - p, &anomaly));
    if (anomaly) ++anomaly_count_;
  }
  ++update_count_;
}

void walk_cells(const Vec3& origin, const Vec3& dir, double t0, double t1,
                int res,
                const std::function<bool(int, int, int, double, double)>& fn) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double lo = t0, hi = t1;
  double o[3] = {origin.x, origin.y, origin.z};
  double d[3] = {dir.x, dir.y, dir.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < 0 || o[a] >= 1) return;
    } else {
      double ta = (0.0 - o[a]) / d[a], tb = (1.0 - o[a]) / d[a];
      lo = std::max(lo, std::min(ta, tb));
      hi = std::min(hi, std::max(ta, tb));
    }
  }
  if (lo >= hi) return;

  double t = lo;
  int c[3], step[3];
  double tmax[3], tdelta[3];
  for (int a = 0; a < 3; ++a) {
    double p = o[a] + d[a] * t;
    c[a] = std::clamp(int(std::floor(p * res)), 0, res - 1);
    if (d[a] > 0) {
      step[a] = 1;
      tmax[a] = (double(c[a] + 1) / res - o[a]) / d[a];
      tdelta[a] = 1.0 / (res * d[a]);
    } else if (d[a] < 0) {
      step[a] = -1;
      tmax[a] = (double(c[a]) / res - o[a]) / d[a];
      tdelta[a] = -1.0 / (res * d[a]);
    } else {
      step[a] = 0;
      tmax[a] = kInf;
      tdelta[a] = kInf;
    }
  }

  while (t < hi) {
    int axis = 0;
    if (tmax[1] < tmax[axis]) axis = 1;
    if (tmax[2] < tmax[axis]) axis = 2;
    double tn = tmax[axis];
    double te = std::min(tn, hi);
    if (te > t) {
      if (!fn(c[0], c[1], c[2], t, te)) return;
    }
    if (tn >= hi) break;
    c[axis] += step[axis];
    if (c[axis] < 0 || c[axis] >= res) break;
    t = tn;
    tmax[axis] += tdelta[axis];
  }
}

void OccupancyGrid::depth_update(const Vec3& origin,
                                 const std::vector<GridRay>& rays,
                                 const InverseSensorModelParams& ism) {
  double h = double(ism.thickness_cells) / res_;
  for (const GridRay& ray : rays) {
    if (!ray.valid) continue;
    double d = ray.depth;
    walk_cells(origin, ray.dir, 0.0, d + h, res_,
               [&](int x, int y, int z, double te, double tx) {
                 if (te > d + h) return false;
                 float& c = cell_[index_of(x, y, z)];
                 bool anomaly = false;
                 if (tx < d - h)
                   c = float(bayes_update(c, ism.p_emp, 1.0 - ism.p_emp,
                                          &anomaly));
                 else
                   c = float(bayes_update(c, ism.p_occ, 1.0 - ism.p_occ,
                                          &anomaly));
                 if (anomaly) ++anomaly_count_;
                 return true;
               });
  }
  ++update_count_;
}

void OccupancyGrid::instantngp_update(const DensityFn& density,
                                      int64_t train_step, Rng& rng) {
  for (float& v : cell_) v *= 0.95f;

  size_t total = cell_.size();
  size_t count = train_step < 256 ? total : total / 4;
  constexpr size_t kChunk = 1 << 15;
  std::vector<Vec3> centers;
  std::vector<size_t> idxs;
  std::vector<float> sigma;
  size_t done = 0;
  while (done < count) {
    size_t n = std::min(kChunk, count - done);
    centers.resize(n);
    idxs.resize(n);
    for (size_t i = 0; i < n; ++i) {
      size_t idx = train_step < 256 ? done + i : rng.uniform_index(total);
      idxs[i] = idx;
      int x = int(idx % res_), y = int((idx / res_) % res_),
          z = int(idx / (size_t(res_) * res_));
      centers[i] = {(x + 0.5) / res_, (y + 0.5) / res_, (z + 0.5) / res_};
    }
    density(centers, sigma);
    for (size_t i = 0; i < n; ++i)
      cell_[idxs[i]] = std::max(cell_[idxs[i]], sigma[i]);
    done += n;
  }
  ++update_count_;
}

void OccupancyGrid::export_raster(const std::string& bin_path,
                                  const std::string& json_path,
                                  const SceneFrame& frame) const {
  std::ofstream bin(bin_path, std::ios::binary);
  VNF_REQUIRE(bin.good(), "export_raster: cannot open " + bin_path);
  bin.write(reinterpret_cast<const char*>(cell_.data()),
            std::streamsize(cell_.size() * sizeof(float)));

  Vec3 lo = frame.to_world({0, 0, 0}), hi = frame.to_world({1, 1, 1});
  nlohmann::json j;
  j["resolution"] = res_;
  j["order"] = "row-major x-fastest";
  j["dtype"] = "float32-le";
  j["kind"] = kind_ == GridKind::virus ? "virus" : "instantngp";
  j["box_lo"] = {lo.x, lo.y, lo.z};
  j["box_hi"] = {hi.x, hi.y, hi.z};
  std::ofstream js(json_path);
  VNF_REQUIRE(js.good(), "export_raster: cannot open " + json_path);
  js << j.dump(2) << "\n";
}

}  // namespace vnf::occgrid
