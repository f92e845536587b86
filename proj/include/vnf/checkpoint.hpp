#pragma once

#include <iosfwd>
#include <string>

#include "vnf/diffnet.hpp"
#include "vnf/train.hpp"

// Versioned binary container: "VNRF" magic, format version, then the hash
// tables, both nets, optimizer moments, the occupancy grid and the exact
// resume state (step counter, rng, clocks). Little-endian float32 payloads;
// save -> load -> save is byte-identical and a resumed run reproduces the
// next step bit-exactly in single-threaded mode.
namespace vnf::checkpoint {

constexpr uint32_t kVersion = 1;

// Standalone net blob: magic, version, layer widths, flat float parameters.
void write_mlp(std::ostream& out, const diffnet::Mlp<float>& mlp);
diffnet::Mlp<float> read_mlp(std::istream& in);

void save(const std::string& path, const train::Trainer& tr,
          uint64_t config_hash);
// Restores everything into an already-constructed trainer whose config and
// dataset match; refuses mismatched versions or config hashes.
void load(const std::string& path, train::Trainer& tr, uint64_t config_hash);

uint64_t stored_config_hash(const std::string& path);

uint64_t fnv1a(const std::string& text);

}  // namespace vnf::checkpoint
