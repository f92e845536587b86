#include "vnf/train.hpp"

#include <chrono>
#include <fstream>

namespace vnf::train {

double color_loss(const std::vector<double>& rendered,
                  const std::vector<double>& target) {
  VNF_REQUIRE(rendered.size() == target.size() && rendered.size() % 3 == 0,
              "color_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    double d = rendered[i] - target[i];
    s += d * d;
  }
  return s;
}

double irs_loss(const std::vector<double>& rendered_m,
                const std::vector<double>& measured_m) {
  VNF_REQUIRE(rendered_m.size() == measured_m.size(),
              "irs_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < rendered_m.size(); ++i) {
    if (measured_m[i] < 0) continue;
    double d = rendered_m[i] - measured_m[i];
    s += d * d;
  }
  return s;
}

double uss_loss(const std::vector<double>& rendered_m,
                const std::vector<double>& measured_m, double eps_m) {
  VNF_REQUIRE(rendered_m.size() == measured_m.size(),
              "uss_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < rendered_m.size(); ++i) {
    if (measured_m[i] < 0) continue;
    if (rendered_m[i] < measured_m[i] - eps_m) {  // strict hinge
      double d = rendered_m[i] - measured_m[i];
      s += d * d;
    }
  }
  return s;
}

Trainer::Trainer(const simrig::Dataset& ds, const TrainConfig& cfg)
    : field_(field::field_init<float>(cfg.hash, cfg.seed)),
      grid_(cfg.grid_resolution, cfg.grid_kind),
      rng_(cfg.seed),
      projection_(cfg.projection),
      ds_(&ds),
      cfg_(cfg) {
  VNF_REQUIRE(!ds.frames.empty(), "trainer: dataset has no frames");
  VNF_REQUIRE(cfg.batch_size > 0, "trainer: batch size must be positive");
  grid_.set_occupancy_threshold(cfg.tau_occ);
  grid_.set_instantngp_threshold(cfg.ngp_density_threshold);
  projection_.sigma_t = projection_.sigma_t_max;

  opt_density_.init_like(field_.density_net);
  opt_color_.init_like(field_.color_net);
  opt_tables_.resize(field_.tables.level.size());
  for (size_t l = 0; l < field_.tables.level.size(); ++l)
    opt_tables_[l].init(field_.tables.level[l].size());
  grads_.init_like(field_);

  // per-stack map from pixel to ranging-array zone
  irs_pixel_zone_.resize(2);
  for (int s = 0; s < 2; ++s) {
    const simrig::SensorStack& stack = ds.rig.stacks[s];
    irs_pixel_zone_[s].assign(size_t(stack.cam.width) * stack.cam.height, -1);
    for (int z = 0; z < simrig::kIrsZones; ++z) {
      int u, v;
      simrig::irs_zone_pixel(stack, z, u, v);
      irs_pixel_zone_[s][size_t(v) * stack.cam.width + u] = int16_t(z);
    }
  }

  sim_now_ = ds.frames.front().timestamp;
  if (cfg.mode == Mode::offline) {
    frames_available_ = ds.frames.size();
  } else {
    frames_available_ = 0;
    advance_clock_and_consume();  // at playback start: the first frame only
  }

  gt_map_ = eval::build_global_map(ds);
  int n_eval = std::max(1, cfg.eval_poses);
  for (int i = 0; i < n_eval; ++i)
    eval_pose_frames_.push_back(size_t((ds.frames.size() * (2 * i + 1)) /
                                       (2 * n_eval)));
  gt_scan_cache_.resize(ds.frames.size());
}

double Trainer::lr_at(int64_t step) const {
  if (cfg_.steps <= 1) return cfg_.lr_start;
  double f = double(step) / double(cfg_.steps - 1);
  return cfg_.lr_start * std::pow(cfg_.lr_end / cfg_.lr_start, f);
}

occgrid::OccupancyGrid::DensityFn Trainer::density_fn() {
  return [this](const std::vector<Vec3>& pts, std::vector<float>& out) {
    field::query_density(field_, pts, out);
  };
}

void Trainer::sample_batch(std::vector<RayRecord>& batch) {
  batch.clear();
  batch.reserve(cfg_.batch_size);
  const simrig::Dataset& ds = *ds_;
  while (int(batch.size()) < cfg_.batch_size) {
    size_t f = rng_.uniform_index(frames_available_);
    int s = int(rng_.uniform_index(2));
    const simrig::SensorStack& stack = ds.rig.stacks[s];
    int u = int(rng_.uniform_index(stack.cam.width));
    int v = int(rng_.uniform_index(stack.cam.height));
    const simrig::SensorFrame& frame = ds.frames[f];
    simrig::Frame3 pose =
        simrig::stack_world(frame.pose_used, stack, ds.rig.sensor_height_m);

    Vec3 dcam = simrig::pixel_dir_cam(stack.cam, u, v);
    RayRecord r;
    r.ray.origin = ds.frame.to_unit(pose.pos);
    r.ray.dir = simrig::dir_to_world(pose, dcam);
    if (!render::clip_to_cube(r.ray)) continue;

    const float* px =
        frame.stacks[s].cam_rgb.data() + (size_t(v) * stack.cam.width + u) * 3;
    for (int c = 0; c < 3; ++c) r.target_rgb[c] = px[c];

    if (cfg_.use_irs) {
      int16_t zone = irs_pixel_zone_[s][size_t(v) * stack.cam.width + u];
      if (zone >= 0 && frame.stacks[s].irs[zone].valid)
        r.irs_depth_m = frame.stacks[s].irs[zone].range_m;
    }
    if (cfg_.use_rgbd) {
      float d = frame.stacks[s].depth_m[size_t(v) * stack.cam.width + u];
      if (d > 0) r.irs_depth_m = d;
    }
    if (cfg_.use_uss && frame.stacks[s].uss_echo) {
      double cone = std::acos(std::clamp(dcam.x, -1.0, 1.0));
      if (cone <= deg_to_rad(stack.uss_half_angle_deg))
        r.uss_depth_m = frame.stacks[s].uss_range_m;
    }
    batch.push_back(r);
  }
}

void Trainer::apply_depth_update(size_t frame_idx) {
  if (grid_.kind() != occgrid::GridKind::virus) return;
  if (!cfg_.use_irs && !cfg_.use_rgbd) return;
  const simrig::Dataset& ds = *ds_;
  const simrig::SensorFrame& frame = ds.frames[frame_idx];
  for (int s = 0; s < 2; ++s) {
    const simrig::SensorStack& stack = ds.rig.stacks[s];
    simrig::Frame3 pose =
        simrig::stack_world(frame.pose_used, stack, ds.rig.sensor_height_m);
    Vec3 origin = ds.frame.to_unit(pose.pos);
    std::vector<occgrid::GridRay> rays;
    if (cfg_.use_irs) {
      for (int z = 0; z < simrig::kIrsZones; ++z) {
        const simrig::IrsReading& r = frame.stacks[s].irs[z];
        if (!r.valid) continue;
        Vec3 dir = simrig::dir_to_world(pose, simrig::irs_zone_dir_cam(stack, z));
        rays.push_back({dir, ds.frame.meters_to_unit(r.range_m), true});
      }
    }
    if (cfg_.use_rgbd) {
      int dec = std::max(1, cfg_.rgbd_grid_decimation);
      for (int v = dec / 2; v < stack.cam.height; v += dec)
        for (int u = dec / 2; u < stack.cam.width; u += dec) {
          float d = frame.stacks[s].depth_m[size_t(v) * stack.cam.width + u];
          if (d <= 0) continue;
          Vec3 dir = simrig::dir_to_world(pose,
                                          simrig::pixel_dir_cam(stack.cam, u, v));
          rays.push_back({dir, ds.frame.meters_to_unit(d), true});
        }
    }
    if (!rays.empty()) grid_.depth_update(origin, rays, cfg_.ism);
  }
}

void Trainer::maybe_update_grid() {
  if (cfg_.grid_update_every <= 0 || step_ % cfg_.grid_update_every != 0)
    return;
  if (grid_.kind() == occgrid::GridKind::virus) {
    grid_.nerf_update(density_fn(), cfg_.grid_samples, projection_, rng_);
  } else {
    grid_.instantngp_update(density_fn(), step_, rng_);
  }
}

void Trainer::advance_clock_and_consume() {
  const auto& frames = ds_->frames;
  while (frames_available_ < frames.size() &&
         frames[frames_available_].timestamp <= sim_now_ + 1e-12) {
    apply_depth_update(frames_available_);
    ++frames_available_;
  }
  if (frames_available_ == 0) frames_available_ = 1;  // clock before first frame
}

LossReport Trainer::train_step() {
  if (cfg_.mode == Mode::online) advance_clock_and_consume();

  double lr = lr_at(step_);
  opt_density_.set_lr(float(lr));
  opt_color_.set_lr(float(lr));
  for (auto& st : opt_tables_) st.lr = float(lr);

  std::vector<RayRecord> batch;
  sample_batch(batch);

  grads_.zero();
  LossReport report;
  report.n_rays = int(batch.size());
  const double bg[3] = {0, 0, 0};
  const double side = ds_->frame.side;

  struct Shard {
    field::FieldGrads<float>* grads;
    double sum_c = 0, sum_irs = 0, sum_uss = 0;
    int n_irs = 0, n_uss = 0, n_uss_active = 0;
  };
  int threads = std::max(1, cfg_.threads);
  std::vector<field::FieldGrads<float>> extra_grads;
  if (threads > 1) {
    extra_grads.resize(threads - 1);
    for (auto& g : extra_grads) {
      g.init_like(field_);
    }
  }
  std::vector<Shard> shards(threads);
  shards[0].grads = &grads_;
  for (int t = 1; t < threads; ++t) shards[t].grads = &extra_grads[t - 1];

  parallel_for_chunks(int64_t(batch.size()), threads,
                      [&](int64_t b, int64_t e, int tid) {
    Shard& sh = shards[tid];
    for (int64_t i = b; i < e; ++i) {
      const RayRecord& r = batch[i];
      render::RaySamples samples =
          render::march_ray(r.ray, &grid_, cfg_.march_step(), cfg_.max_samples);
      render::RayRender<float> rr =
          render::render_ray(field_, samples, cfg_.use_cam, bg);

      double dC[3] = {0, 0, 0};
      double dDm = 0;
      if (cfg_.use_cam) {
        for (int c = 0; c < 3; ++c) {
          double d = rr.result.rgb[c] - double(r.target_rgb[c]);
          sh.sum_c += d * d;
          dC[c] = cfg_.w_color * 2.0 * d;
        }
      }
      double depth_m = rr.result.depth * side;
      if (r.irs_depth_m >= 0) {
        ++sh.n_irs;
        double d = depth_m - double(r.irs_depth_m);
        sh.sum_irs += d * d;
        dDm += cfg_.w_irs * 2.0 * d;
      }
      if (r.uss_depth_m >= 0) {
        ++sh.n_uss;
        double d = depth_m - double(r.uss_depth_m);
        if (depth_m < double(r.uss_depth_m) - cfg_.eps_uss_m) {
          ++sh.n_uss_active;
          sh.sum_uss += d * d;
          dDm += cfg_.w_uss * 2.0 * d;
        }
      }
      if (samples.count() > 0)
        render::render_ray_backward(field_, samples, rr,
                                    cfg_.use_cam ? dC : nullptr, dDm * side,
                                    *sh.grads);
    }
  });

  for (int t = 0; t < threads; ++t) {
    report.sum_c += shards[t].sum_c;
    report.sum_irs += shards[t].sum_irs;
    report.sum_uss += shards[t].sum_uss;
    report.n_irs += shards[t].n_irs;
    report.n_uss += shards[t].n_uss;
    report.n_uss_active += shards[t].n_uss_active;
  }
  for (int t = 1; t < threads; ++t) {
    auto& g = extra_grads[t - 1];
    for (int l = 0; l < field_.density_net.layer_count(); ++l) {
      for (size_t i = 0; i < g.density.dw[l].size(); ++i)
        grads_.density.dw[l][i] += g.density.dw[l][i];
      for (size_t i = 0; i < g.density.db[l].size(); ++i)
        grads_.density.db[l][i] += g.density.db[l][i];
    }
    for (int l = 0; l < field_.color_net.layer_count(); ++l) {
      for (size_t i = 0; i < g.color.dw[l].size(); ++i)
        grads_.color.dw[l][i] += g.color.dw[l][i];
      for (size_t i = 0; i < g.color.db[l].size(); ++i)
        grads_.color.db[l][i] += g.color.db[l][i];
    }
    for (size_t l = 0; l < g.tables.level.size(); ++l)
      for (size_t i = 0; i < g.tables.level[l].size(); ++i)
        grads_.tables.level[l][i] += g.tables.level[l][i];
  }

  bool finite = std::isfinite(report.sum_total());
  if (finite) {
    for (int l = 0; l < field_.density_net.layer_count() && finite; ++l)
      finite = kernels::all_finite(grads_.density.dw[l].data(),
                                   grads_.density.dw[l].size()) &&
               kernels::all_finite(grads_.density.db[l].data(),
                                   grads_.density.db[l].size());
    for (int l = 0; l < field_.color_net.layer_count() && finite; ++l)
      finite = kernels::all_finite(grads_.color.dw[l].data(),
                                   grads_.color.dw[l].size()) &&
               kernels::all_finite(grads_.color.db[l].data(),
                                   grads_.color.db[l].size());
    for (size_t l = 0; l < grads_.tables.level.size() && finite; ++l)
      finite = kernels::all_finite(grads_.tables.level[l].data(),
                                   grads_.tables.level[l].size());
  }

  if (finite) {
    if (cfg_.use_cam) opt_color_.apply(field_.color_net, grads_.color);
    opt_density_.apply(field_.density_net, grads_.density);
    for (size_t l = 0; l < opt_tables_.size(); ++l)
      diffnet::adam_apply(opt_tables_[l], field_.tables.level[l].data(),
                          grads_.tables.level[l].data(),
                          field_.tables.level[l].size());
  } else {
    report.applied = false;
    std::fprintf(stderr,
                 "step %lld: non-finite loss or gradients, step skipped\n",
                 (long long)step_);
  }

  step_ += 1;
  maybe_update_grid();
  if (cfg_.mode == Mode::offline && grid_.kind() == occgrid::GridKind::virus &&
      (cfg_.use_irs || cfg_.use_rgbd)) {
    apply_depth_update(depth_rr_next_ % ds_->frames.size());
    ++depth_rr_next_;
  }
  if (cfg_.mode == Mode::online)
    sim_now_ += cfg_.online_dt * cfg_.playback_speed;

  return report;
}

render::DepthScan Trainer::scan_at(const Vec3& pose_xy) const {
  return render::render_scan(field_, &grid_, ds_->frame, pose_xy,
                             ds_->rig.sensor_height_m,
                             cfg_.eval_angular_step_deg, cfg_.march_step(),
                             cfg_.max_samples);
}

void Trainer::eval_nnd_z3(double& acc, double& cov) {
  eval::MetricsAccum accum;
  for (size_t fidx : eval_pose_frames_) {
    if (cfg_.mode == Mode::online && fidx >= frames_available_)
      continue;  // only already visited poses
    const simrig::Pose2& p = ds_->frames[fidx].pose_true;
    if (gt_scan_cache_[fidx].entries.empty())
      gt_scan_cache_[fidx] = eval::gt_scan(gt_map_, {p.x, p.y, 0},
                                           ds_->rig.sensor_height_m,
                                           cfg_.eval_angular_step_deg);
    render::DepthScan pred = scan_at({p.x, p.y, 0});
    accum.add(eval::scan_points(pred), gt_scan_cache_[fidx]);
  }
  eval::ScanMetrics m = accum.finalize();
  acc = m.acc[2].present ? m.acc[2].mean_nnd
                         : std::numeric_limits<double>::quiet_NaN();
  cov = m.cov[2].present ? m.cov[2].mean_nnd
                         : std::numeric_limits<double>::quiet_NaN();
}

std::vector<float> Trainer::render_image(size_t frame_idx, int stack) const {
  const simrig::Dataset& ds = *ds_;
  VNF_REQUIRE(frame_idx < ds.frames.size(), "render_image: bad frame index");
  const simrig::SensorStack& st = ds.rig.stacks[stack];
  simrig::Frame3 pose = simrig::stack_world(ds.frames[frame_idx].pose_used, st,
                                            ds.rig.sensor_height_m);
  std::vector<float> img(size_t(st.cam.width) * st.cam.height * 3, 0.f);
  const double bg[3] = {0, 0, 0};
  for (int v = 0; v < st.cam.height; ++v)
    for (int u = 0; u < st.cam.width; ++u) {
      render::Ray ray;
      ray.origin = ds.frame.to_unit(pose.pos);
      ray.dir = simrig::dir_to_world(pose, simrig::pixel_dir_cam(st.cam, u, v));
      float* px = img.data() + (size_t(v) * st.cam.width + u) * 3;
      if (!render::clip_to_cube(ray)) continue;
      render::RaySamples s =
          render::march_ray(ray, &grid_, cfg_.march_step(), cfg_.max_samples);
      render::RayRender<float> rr = render::render_ray(field_, s, true, bg);
      for (int c = 0; c < 3; ++c) px[c] = float(rr.result.rgb[c]);
    }
  return img;
}

double Trainer::eval_psnr() {
  size_t fidx = std::min(frames_available_, ds_->frames.size()) / 2;
  std::vector<float> img = render_image(fidx, 0);
  return eval::psnr(img, ds_->frames[fidx].stacks[0].cam_rgb);
}

Summary Trainer::run() {
  using clock = std::chrono::steady_clock;
  Summary summary;
  auto t0 = clock::now();
  auto t_last = t0;
  int64_t last_row_step = 0;

  int row_every = cfg_.eval_every > 0 ? cfg_.eval_every
                                      : std::max(1, cfg_.steps / 50);
  for (int i = 0; i < cfg_.steps; ++i) {
    LossReport rep = train_step();
    summary.last = rep;
    bool due = (step_ % row_every == 0) || i + 1 == cfg_.steps;
    if (!due) continue;

    auto now = clock::now();
    TimelineRow row;
    row.step = step_;
    row.wall_time_s = std::chrono::duration<double>(now - t0).count();
    row.l_c = rep.mean_c();
    row.l_irs = rep.mean_irs();
    row.l_uss = rep.mean_uss();
    row.l_tot = rep.mean_total();
    double span = std::chrono::duration<double>(now - t_last).count();
    row.steps_per_sec = span > 0 ? double(step_ - last_row_step) / span : 0;
    t_last = now;
    last_row_step = step_;
    if (cfg_.psnr_every > 0 && step_ % cfg_.psnr_every == 0)
      row.psnr = eval_psnr();
    if (cfg_.eval_every > 0) eval_nnd_z3(row.nnd_acc_z3, row.nnd_cov_z3);
    summary.timeline.push_back(row);
  }

  double total = std::chrono::duration<double>(clock::now() - t0).count();
  summary.steps_per_sec = total > 0 ? cfg_.steps / total : 0;
  eval_nnd_z3(summary.final_nnd_acc_z3, summary.final_nnd_cov_z3);
  return summary;
}

Summary run_offline(Trainer& trainer) {
  VNF_REQUIRE(trainer.config().mode == Mode::offline,
              "run_offline: trainer configured for online mode");
  return trainer.run();
}

Summary run_online(Trainer& trainer) {
  VNF_REQUIRE(trainer.config().mode == Mode::online,
              "run_online: trainer configured for offline mode");
  return trainer.run();
}

void write_timeline_csv(const std::vector<TimelineRow>& rows,
                        const std::string& path) {
  std::ofstream out(path);
  VNF_REQUIRE(out.good(), "write_timeline_csv: cannot open " + path);
  out << "step,wall_time_s,L_c,L_IRS,L_USS,L_tot,steps_per_sec,psnr,"
         "nnd_acc_zone3,nnd_cov_zone3\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_g(v); };
  for (const TimelineRow& r : rows)
    out << r.step << "," << format_g(r.wall_time_s) << "," << format_g(r.l_c)
        << "," << format_g(r.l_irs) << "," << format_g(r.l_uss) << ","
        << format_g(r.l_tot) << "," << format_g(r.steps_per_sec) << ","
        << cell(r.psnr) << "," << cell(r.nnd_acc_z3) << ","
        << cell(r.nnd_cov_z3) << "\n";
}

}  // namespace vnf::train
