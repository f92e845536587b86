#pragma once

#include <string>
#include <vector>

#include "vnf/common.hpp"
#include "vnf/diffnet.hpp"
#include "vnf/evalproto.hpp"
#include "vnf/field.hpp"
#include "vnf/occgrid.hpp"
#include "vnf/render.hpp"
#include "vnf/simrig.hpp"

// Training: squared color error plus point-like depth supervision from the
// ranging array and a one-sided hinge for the wide-cone sensor, all summed
// per batch. The occupancy grid is refreshed on a fixed cadence from field
// densities and per frame from range rays. Offline mode sees the whole
// dataset from step zero; online mode consumes frames as a virtual playback
// clock reaches their timestamps.
namespace vnf::train {

enum class Mode { offline, online };

struct TrainConfig {
  int batch_size = 1024;
  int steps = 2000;
  double lr_start = 1e-2;
  double lr_end = 1e-3;
  double eps_uss_m = 0.1;
  double w_color = 1.0, w_irs = 1.0, w_uss = 1.0;
  uint64_t seed = 0;
  Mode mode = Mode::offline;
  double playback_speed = 1.0;
  double online_dt = 0.05;  // simulated seconds advanced per training step

  double march_step_div = 1024.0;  // marching step = cube diagonal / div
  int max_samples = 1024;

  bool use_cam = true, use_uss = true, use_irs = true, use_rgbd = false;
  int rgbd_grid_decimation = 8;

  occgrid::GridKind grid_kind = occgrid::GridKind::virus;
  int grid_resolution = 128;
  double tau_occ = 0.5;
  double ngp_density_threshold = 0.5;
  int grid_update_every = 16;
  int grid_samples = 1024;
  occgrid::DensityProjectionParams projection;
  occgrid::InverseSensorModelParams ism;

  // hash grid + nets
  hashenc::HashGridConfig hash;

  int eval_every = 0;   // timeline scan-metric cadence, 0 = off
  int psnr_every = 0;   // timeline psnr cadence, 0 = off
  int eval_poses = 3;
  double eval_angular_step_deg = 2.0;
  int threads = 1;

  double march_step() const { return std::sqrt(3.0) / march_step_div; }
};

struct LossReport {
  double sum_c = 0, sum_irs = 0, sum_uss = 0;
  int n_rays = 0;        // rays in the batch (color-active)
  int n_irs = 0;         // rays carrying point-like depth
  int n_uss = 0;         // rays carrying a wide-cone reading
  int n_uss_active = 0;  // of those, rays inside the hinge
  bool applied = true;   // false when a non-finite loss skipped the step

  double mean_c() const { return n_rays ? sum_c / n_rays : 0.0; }
  double mean_irs() const { return n_irs ? sum_irs / n_irs : 0.0; }
  double mean_uss() const { return n_uss ? sum_uss / n_uss : 0.0; }
  double mean_total() const { return mean_c() + mean_irs() + mean_uss(); }
  double sum_total() const { return sum_c + sum_irs + sum_uss; }
};

// ---- the three loss terms (sums over the batch, per the rendering model) ----

// sum_i ||c_hat_i - c_i||^2 over rgb triplets
double color_loss(const std::vector<double>& rendered,
                  const std::vector<double>& target);

// sum over rays with a valid point-like depth: (d_hat - d)^2; depth < 0
// marks "no measurement"
double irs_loss(const std::vector<double>& rendered_m,
                const std::vector<double>& measured_m);

// sum over rays predicting closer than measurement - eps (strict hinge)
double uss_loss(const std::vector<double>& rendered_m,
                const std::vector<double>& measured_m, double eps_m);

struct RayRecord {
  render::Ray ray;  // normalized coords, clipped to the cube
  float target_rgb[3] = {0, 0, 0};
  float irs_depth_m = -1;
  float uss_depth_m = -1;
};

struct TimelineRow {
  int64_t step = 0;
  double wall_time_s = 0;
  double l_c = 0, l_irs = 0, l_uss = 0, l_tot = 0;
  double steps_per_sec = 0;
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double nnd_acc_z3 = std::numeric_limits<double>::quiet_NaN();
  double nnd_cov_z3 = std::numeric_limits<double>::quiet_NaN();
};

struct Summary {
  std::vector<TimelineRow> timeline;
  double steps_per_sec = 0;
  double final_nnd_acc_z3 = std::numeric_limits<double>::quiet_NaN();
  double final_nnd_cov_z3 = std::numeric_limits<double>::quiet_NaN();
  LossReport last;
};

class Trainer {
 public:
  Trainer(const simrig::Dataset& ds, const TrainConfig& cfg);

  LossReport train_step();
  Summary run();

  // scan-metrics snapshot against the scanner global map (zone 3)
  void eval_nnd_z3(double& acc, double& cov);
  double eval_psnr();

  // rendered camera view at a frame pose (for psnr and inspection)
  std::vector<float> render_image(size_t frame_idx, int stack) const;

  render::DepthScan scan_at(const Vec3& pose_xy) const;

  size_t frames_available() const { return frames_available_; }
  int64_t step_count() const { return step_; }
  double sigma_t() const { return projection_.sigma_t; }

  struct ResumeState {
    int64_t step = 0;
    uint64_t rng_state = 0;
    double sim_now = 0;
    double sigma_t = 0;
    uint64_t depth_rr_next = 0;
    uint64_t frames_available = 0;
  };
  ResumeState resume_state() const {
    return {step_, rng_.raw_state(), sim_now_, projection_.sigma_t,
            depth_rr_next_, frames_available_};
  }
  void set_resume_state(const ResumeState& s) {
    step_ = s.step;
    rng_.set_raw_state(s.rng_state);
    sim_now_ = s.sim_now;
    projection_.sigma_t = s.sigma_t;
    depth_rr_next_ = s.depth_rr_next;
    frames_available_ = std::min<size_t>(s.frames_available,
                                         ds_->frames.size());
  }

  const simrig::Dataset& dataset() const { return *ds_; }
  const TrainConfig& config() const { return cfg_; }

  field::RadianceField<float> field_;
  occgrid::OccupancyGrid grid_;
  diffnet::MlpAdam<float> opt_density_, opt_color_;
  std::vector<diffnet::AdamState<float>> opt_tables_;
  Rng rng_;
  int64_t step_ = 0;
  double sim_now_ = 0;

  // serialized alongside parameters for exact resume
  occgrid::DensityProjectionParams projection_;

 private:
  void sample_batch(std::vector<RayRecord>& batch);
  void apply_depth_update(size_t frame_idx);
  void maybe_update_grid();
  void advance_clock_and_consume();
  double lr_at(int64_t step) const;
  occgrid::OccupancyGrid::DensityFn density_fn();

  const simrig::Dataset* ds_;
  TrainConfig cfg_;
  size_t frames_available_ = 0;
  size_t depth_rr_next_ = 0;  // offline round-robin cursor
  std::vector<std::vector<int16_t>> irs_pixel_zone_;  // per stack, v*W+u -> zone
  field::FieldGrads<float> grads_;
  render::RayRender<float> scratch_;
  eval::GlobalMap gt_map_;
  mutable std::vector<render::DepthScan> gt_scan_cache_;
  std::vector<size_t> eval_pose_frames_;
};

void write_timeline_csv(const std::vector<TimelineRow>& rows,
                        const std::string& path);

Summary run_offline(Trainer& trainer);
Summary run_online(Trainer& trainer);

}  // namespace vnf::train
