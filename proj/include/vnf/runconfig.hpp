#pragma once

#include <map>
#include <string>

#include "vnf/simrig.hpp"
#include "vnf/train.hpp"

// Run configuration: a flat key = value text format (toml-style sections
// prefix their keys) resolved into generation, training and grid settings.
// Flags override file values; the fully resolved set is echoed into every
// output directory so a run is reproducible from its outputs alone.
namespace vnf::runconfig {

using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap parse_kv_file(const std::string& path);

struct RunConfig {
  std::string scene = "mini-office";
  std::string trajectory = "loop";
  int frames = 120;
  double frame_dt = 0.2;
  double pose_noise_xy = 0.0;
  double pose_noise_yaw_deg = 0.0;
  int image_width = 64;
  int image_height = 48;
  std::string sensors = "cam,uss,irs";
  std::string grid = "virus";
  std::string mode = "offline";
  std::string out_dir = "out";
  int checkpoint_every = 0;
  train::TrainConfig train;

  simrig::RigConfig rig() const;
  simrig::PoseNoise pose_noise() const { return {pose_noise_xy, pose_noise_yaw_deg}; }

  // full echo, sorted keys, one per line
  std::string resolved_text() const;
  // echo minus run-local keys (output dir, threads, eval cadences):
  // the identity a checkpoint is bound to
  uint64_t semantic_hash() const;
};

// Builds a config from defaults, then file entries, then override entries.
// Unknown keys and invalid values are usage errors.
RunConfig resolve(const KvMap& file_kv, const KvMap& overrides);

void write_resolved(const RunConfig& cfg, const std::string& path);

}  // namespace vnf::runconfig
