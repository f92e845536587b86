#pragma once

#include <cstdint>
#include <vector>

#include "vnf/common.hpp"

// Multiresolution hash encoding of unit-cube positions: per level, trilinear
// interpolation of 8 corner rows, concatenated coarse to fine. Levels whose
// vertex lattice fits the table are stored densely (injective row-major
// index); finer levels fall back to the xor-of-primes spatial hash.
namespace vnf::hashenc {

struct HashGridConfig {
  int levels = 8;
  int table_size = 1 << 15;  // power of two
  int features = 2;
  int base_resolution = 16;
  int max_resolution = 256;

  double growth() const {
    if (levels <= 1) return 1.0;
    return std::exp((std::log(double(max_resolution)) -
                     std::log(double(base_resolution))) /
                    (levels - 1));
  }
  int level_resolution(int l) const {
    return int(std::floor(base_resolution * std::pow(growth(), l) + 1e-9));
  }
  int feature_dim() const { return levels * features; }

  void validate() const {
    VNF_REQUIRE(levels >= 1, "hash grid: levels must be >= 1");
    VNF_REQUIRE(table_size > 0 && (table_size & (table_size - 1)) == 0,
                "hash grid: table size must be a power of two");
    VNF_REQUIRE(base_resolution >= 1 && base_resolution <= max_resolution,
                "hash grid: need 1 <= base resolution <= max resolution");
    VNF_REQUIRE(features >= 1, "hash grid: features must be >= 1");
  }
};

// Row index of an integer vertex at one level. Dense levels use the
// injective row-major index; hashed levels xor coordinate-prime products
// masked to the table size.
inline uint32_t cell_index(int ix, int iy, int iz, int level_resolution,
                           int table_size) {
  int64_t verts = int64_t(level_resolution) + 1;
  if (verts * verts * verts <= table_size) {
    return uint32_t(ix + verts * (iy + verts * iz));
  }
  uint32_t h = uint32_t(ix) * 1u ^ uint32_t(iy) * 2654435761u ^
               uint32_t(iz) * 805459861u;
  return h & uint32_t(table_size - 1);
}

inline int level_rows(const HashGridConfig& cfg, int l) {
  int64_t verts = int64_t(cfg.level_resolution(l)) + 1;
  int64_t dense = verts * verts * verts;
  return int(std::min<int64_t>(dense, cfg.table_size));
}

template <class Real>
struct HashTables {
  HashGridConfig cfg;
  std::vector<std::vector<Real>> level;  // level[l] has level_rows(l)*F entries

  size_t param_count() const {
    size_t n = 0;
    for (auto& t : level) n += t.size();
    return n;
  }
};

// Entries uniform in [-1e-4, 1e-4].
template <class Real>
HashTables<Real> tables_init(const HashGridConfig& cfg, uint64_t seed) {
  cfg.validate();
  HashTables<Real> t;
  t.cfg = cfg;
  t.level.resize(cfg.levels);
  Rng rng(seed);
  for (int l = 0; l < cfg.levels; ++l) {
    t.level[l].resize(size_t(level_rows(cfg, l)) * cfg.features);
    for (auto& v : t.level[l]) v = Real(rng.uniform(-1e-4, 1e-4));
  }
  return t;
}

// Interpolation record for one encode batch: 8 rows + 8 weights per
// (sample, level). Weights are kept in double; they come from positions.
struct EncodeTape {
  int batch = 0;
  std::vector<uint32_t> rows;   // batch * levels * 8
  std::vector<double> weights;  // batch * levels * 8
};

namespace detail {

inline void corner_setup(const Vec3& p, int res, uint32_t rows[8],
                         double wts[8], int table_size) {
  double sx = p.x * res, sy = p.y * res, sz = p.z * res;
  int cx = std::min(int(sx), res - 1);
  int cy = std::min(int(sy), res - 1);
  int cz = std::min(int(sz), res - 1);
  double fx = sx - cx, fy = sy - cy, fz = sz - cz;
  for (int c = 0; c < 8; ++c) {
    int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    rows[c] = cell_index(cx + dx, cy + dy, cz + dz, res, table_size);
    wts[c] = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
  }
}

}  // namespace detail

// Encodes a batch of unit-cube positions into features (batch x levels*F,
// level-major). Tape is optional; pass it when a backward pass follows.
template <class Real>
void encode(const HashTables<Real>& t, const std::vector<Vec3>& positions,
            std::vector<Real>& features, EncodeTape* tape = nullptr) {
  const HashGridConfig& cfg = t.cfg;
  int B = int(positions.size());
  int F = cfg.features, L = cfg.levels;
  features.assign(size_t(B) * L * F, Real(0));
  if (tape) {
    tape->batch = B;
    tape->rows.resize(size_t(B) * L * 8);
    tape->weights.resize(size_t(B) * L * 8);
  }
  for (int s = 0; s < B; ++s) {
    const Vec3& p = positions[s];
    VNF_REQUIRE(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1 && p.z >= 0 &&
                    p.z <= 1,
                "encode: position outside unit cube");
    for (int l = 0; l < L; ++l) {
      uint32_t rows[8];
      double wts[8];
      detail::corner_setup(p, cfg.level_resolution(l), rows, wts,
                           cfg.table_size);
      Real* out = features.data() + (size_t(s) * L + l) * F;
      const Real* tab = t.level[l].data();
      for (int c = 0; c < 8; ++c) {
        Real w = Real(wts[c]);
        const Real* row = tab + size_t(rows[c]) * F;
        for (int f = 0; f < F; ++f) out[f] += w * row[f];
      }
      if (tape) {
        size_t base = (size_t(s) * L + l) * 8;
        for (int c = 0; c < 8; ++c) {
          tape->rows[base + c] = rows[c];
          tape->weights[base + c] = wts[c];
        }
      }
    }
  }
}

template <class Real>
struct TableGrads {
  std::vector<std::vector<Real>> level;

  void init_like(const HashTables<Real>& t) {
    level.resize(t.level.size());
    for (size_t l = 0; l < t.level.size(); ++l)
      level[l].assign(t.level[l].size(), Real(0));
  }
  void zero() {
    for (auto& v : level) std::fill(v.begin(), v.end(), Real(0));
  }
};

// Scatters dL/dfeatures back onto the touched rows with the recorded
// trilinear weights; accumulates across the batch.
template <class Real>
void encode_backward(const HashGridConfig& cfg, const EncodeTape& tape,
                     const std::vector<Real>& dfeatures,
                     TableGrads<Real>& grads) {
  int B = tape.batch, L = cfg.levels, F = cfg.features;
  VNF_REQUIRE(dfeatures.size() == size_t(B) * L * F,
              "encode_backward: feature grad shape mismatch");
  VNF_REQUIRE(int(grads.level.size()) == L,
              "encode_backward: grad accumulator mismatch");
  for (int s = 0; s < B; ++s) {
    for (int l = 0; l < L; ++l) {
      const Real* df = dfeatures.data() + (size_t(s) * L + l) * F;
      size_t base = (size_t(s) * L + l) * 8;
      Real* gl = grads.level[l].data();
      for (int c = 0; c < 8; ++c) {
        Real w = Real(tape.weights[base + c]);
        Real* row = gl + size_t(tape.rows[base + c]) * F;
        for (int f = 0; f < F; ++f) row[f] += w * df[f];
      }
    }
  }
}

}  // namespace vnf::hashenc
