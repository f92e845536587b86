#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vnf/common.hpp"

// Probabilistic occupancy grid over the unit cube. Cells hold occupancy
// probabilities in [0,1] and are dual-updated: densities projected through
// a soft step with an adaptive threshold, and free/hit evidence from
// range rays via an inverse sensor model. The instantngp variant keeps the
// base method's density-EMA cells and fixed threshold instead.
namespace vnf::occgrid {

constexpr double kProbFloor = 1e-4;

enum class GridKind { virus, instantngp };

struct DensityProjectionParams {
  double zeta = 4.0;
  double sigma_t_max = 10.0;
  double sigma_t = 10.0;  // running threshold, in (0, sigma_t_max]
};

struct InverseSensorModelParams {
  double p_occ = 0.7;   // hit likelihood at the measured range
  double p_emp = 0.35;  // miss likelihood strictly before it
  int thickness_cells = 1;
  double max_range_m = 4.0;
};

// Posterior of Bayes' rule for one cell, clamped away from 0 and 1 so no
// cell ever saturates irrecoverably. Both likelihoods zero is an anomaly:
// the prior is returned unchanged and the caller counts it.
double bayes_update(double prior, double p_m_occ, double p_m_emp,
                    bool* anomaly = nullptr);

// Density -> occupancy likelihood, 1 / (1 + (sigma_t/sigma)^zeta); 0 at 0.
double project_density(double sigma, double zeta, double sigma_t);

// One range ray in normalized units.
struct GridRay {
  Vec3 dir;        // unit
  double depth = 0;  // normalized distance to the measured surface
  bool valid = false;
};

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int resolution, GridKind kind);

  int resolution() const { return res_; }
  GridKind kind() const { return kind_; }
  const std::vector<float>& cells() const { return cell_; }
  std::vector<float>& cells() { return cell_; }

  size_t index_of(int x, int y, int z) const {
    return (size_t(z) * res_ + y) * res_ + x;
  }
  // Half-open binning: p in [k/R, (k+1)/R) lands in cell k; any coordinate
  // outside [0,1) is out of the grid.
  bool cell_of(const Vec3& p, int& x, int& y, int& z) const;

  bool is_occupied(const Vec3& p, double tau_occ) const;
  double occupancy_threshold() const { return tau_occ_; }
  void set_occupancy_threshold(double t) { tau_occ_ = t; }
  bool is_occupied(const Vec3& p) const { return is_occupied(p, tau_occ_); }

  uint64_t update_count() const { return update_count_; }
  uint64_t anomaly_count() const { return anomaly_count_; }

  // Fraction of cells at or above the marching threshold.
  double occupied_fraction() const;

  // Batch density query: centers -> sigmas, in normalized density units.
  using DensityFn =
      std::function<void(const std::vector<Vec3>&, std::vector<float>&)>;

  // Density-projection update: sample_count cells (half uniform, half from
  // currently occupied cells), sigma_t <- min(sigma_t_max, batch mean).
  void nerf_update(const DensityFn& density, int sample_count,
                   DensityProjectionParams& params, Rng& rng);

  // Inverse-sensor-model update from one sensor pose. Cells wholly before
  // depth - h are driven toward empty, cells within +-h of the depth toward
  // occupied, nothing at or beyond depth + h is touched.
  void depth_update(const Vec3& origin, const std::vector<GridRay>& rays,
                    const InverseSensorModelParams& ism);

  // Base-method schedule: all cells during the first 256 training steps,
  // a quarter afterwards; cells hold max(decay * old, sigma), thresholded
  // by a fixed density.
  void instantngp_update(const DensityFn& density, int64_t train_step,
                         Rng& rng);
  void set_instantngp_threshold(double t) { ngp_thresh_ = t; }
  double instantngp_threshold() const { return ngp_thresh_; }

  // Raster export: row-major (x fastest) little-endian float32 plus a JSON
  // sidecar carrying resolution and the world bounding box.
  void export_raster(const std::string& bin_path, const std::string& json_path,
                     const SceneFrame& frame) const;

 private:
  int res_ = 0;
  GridKind kind_ = GridKind::virus;
  std::vector<float> cell_;
  double tau_occ_ = 0.5;
  double ngp_thresh_ = 0.5;
  uint64_t update_count_ = 0;
  uint64_t anomaly_count_ = 0;
};

// Visits every cell the segment [t0, t1] of the ray passes through, in
// order, with the per-cell parameter interval. Callback returns false to
// stop. Exposed for the renderer and the traversal oracle tests.
void walk_cells(const Vec3& origin, const Vec3& dir, double t0, double t1,
                int res,
                const std::function<bool(int, int, int, double, double)>& fn);

}  // namespace vnf::occgrid
