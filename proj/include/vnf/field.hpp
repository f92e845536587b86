#pragma once

#include <vector>

#include "vnf/common.hpp"
#include "vnf/diffnet.hpp"
#include "vnf/hashenc.hpp"

// The radiance field. Density head: hash features -> one hidden layer of 64
// -> 16 outputs (raw density + geometry features), sigma = exp(raw clamped
// to +-15). Color head: 16 geometry outputs + degree-2 spherical harmonics
// of the view direction -> two hidden layers of 64 -> logistic rgb. Density
// never sees the direction, so it is direction-independent by construction.
namespace vnf::field {

constexpr int kGeoWidth = 16;
constexpr int kShWidth = 9;
constexpr double kRawClamp = 15.0;

// Real spherical harmonics basis, degrees 0-2, for a unit direction.
inline void sh_encode(const Vec3& d, double out[kShWidth]) {
  out[0] = 0.28209479177387814;
  out[1] = 0.4886025119029199 * d.y;
  out[2] = 0.4886025119029199 * d.z;
  out[3] = 0.4886025119029199 * d.x;
  out[4] = 1.0925484305920792 * d.x * d.y;
  out[5] = 1.0925484305920792 * d.y * d.z;
  out[6] = 0.31539156525252005 * (3.0 * d.z * d.z - 1.0);
  out[7] = 1.0925484305920792 * d.x * d.z;
  out[8] = 0.5462742152960396 * (d.x * d.x - d.y * d.y);
}

template <class Real>
struct RadianceField {
  hashenc::HashTables<Real> tables;
  diffnet::Mlp<Real> density_net;  // feature_dim -> 64 -> 16
  diffnet::Mlp<Real> color_net;    // 16 + 9 -> 64 -> 64 -> 3
};

template <class Real>
RadianceField<Real> field_init(const hashenc::HashGridConfig& cfg,
                               uint64_t seed) {
  RadianceField<Real> f;
  f.tables = hashenc::tables_init<Real>(cfg, seed);
  f.density_net =
      diffnet::mlp_init<Real>({cfg.feature_dim(), 64, kGeoWidth}, seed + 1);
  f.color_net =
      diffnet::mlp_init<Real>({kGeoWidth + kShWidth, 64, 64, 3}, seed + 2);
  return f;
}

template <class Real>
struct FieldTape {
  int batch = 0;
  bool has_color = false;
  hashenc::EncodeTape enc;
  diffnet::MlpTape<Real> density;
  diffnet::MlpTape<Real> color;
  std::vector<Real> raw_sigma;  // batch, pre-clamp
  std::vector<Real> sigma;      // batch
  std::vector<Real> rgb;        // batch*3, post-logistic
};

namespace detail {

template <class Real>
void density_from_raw(const std::vector<Real>& geo, int batch,
                      std::vector<Real>& raw, std::vector<Real>& sigma) {
  raw.resize(batch);
  sigma.resize(batch);
  for (int i = 0; i < batch; ++i) {
    Real r = geo[size_t(i) * kGeoWidth];
    raw[i] = r;
    double c = std::clamp(double(r), -kRawClamp, kRawClamp);
    sigma[i] = Real(std::exp(c));
  }
}

}  // namespace detail

// sigma = exp(clamp(raw)); strictly positive everywhere.
template <class Real>
void query_density(const RadianceField<Real>& f,
                   const std::vector<Vec3>& positions,
                   std::vector<Real>& sigma, FieldTape<Real>* tape = nullptr) {
  int B = int(positions.size());
  std::vector<Real> feat;
  FieldTape<Real> local;
  FieldTape<Real>& t = tape ? *tape : local;
  t.batch = B;
  t.has_color = false;
  hashenc::encode(f.tables, positions, feat, tape ? &t.enc : nullptr);
  const std::vector<Real>& geo =
      diffnet::mlp_forward(f.density_net, feat, B, t.density);
  detail::density_from_raw(geo, B, t.raw_sigma, t.sigma);
  sigma = t.sigma;
}

// Full query: density plus logistic rgb for one view direction per sample.
template <class Real>
void query_radiance(const RadianceField<Real>& f,
                    const std::vector<Vec3>& positions,
                    const std::vector<Vec3>& directions,
                    std::vector<Real>& sigma, std::vector<Real>& rgb,
                    FieldTape<Real>* tape = nullptr) {
  int B = int(positions.size());
  VNF_REQUIRE(int(directions.size()) == B,
              "query_radiance: directions batch mismatch");
  std::vector<Real> feat;
  FieldTape<Real> local;
  FieldTape<Real>& t = tape ? *tape : local;
  t.batch = B;
  t.has_color = true;
  hashenc::encode(f.tables, positions, feat, tape ? &t.enc : nullptr);
  const std::vector<Real>& geo =
      diffnet::mlp_forward(f.density_net, feat, B, t.density);
  detail::density_from_raw(geo, B, t.raw_sigma, t.sigma);
  sigma = t.sigma;

  std::vector<Real> cin(size_t(B) * (kGeoWidth + kShWidth));
  for (int i = 0; i < B; ++i) {
    const Vec3& d = directions[i];
    VNF_REQUIRE(std::abs(d.norm() - 1.0) <= 1e-6,
                "query_radiance: direction must be unit length");
    double sh[kShWidth];
    sh_encode(d, sh);
    Real* row = cin.data() + size_t(i) * (kGeoWidth + kShWidth);
    for (int k = 0; k < kGeoWidth; ++k) row[k] = geo[size_t(i) * kGeoWidth + k];
    for (int k = 0; k < kShWidth; ++k) row[kGeoWidth + k] = Real(sh[k]);
  }
  const std::vector<Real>& craw =
      diffnet::mlp_forward(f.color_net, cin, B, t.color);
  t.rgb.resize(size_t(B) * 3);
  for (size_t i = 0; i < t.rgb.size(); ++i)
    t.rgb[i] = Real(1.0 / (1.0 + std::exp(-double(craw[i]))));
  rgb = t.rgb;
}

template <class Real>
struct FieldGrads {
  diffnet::MlpGrads<Real> density, color;
  hashenc::TableGrads<Real> tables;

  void init_like(const RadianceField<Real>& f) {
    density.init_like(f.density_net);
    color.init_like(f.color_net);
    tables.init_like(f.tables);
  }
  void zero() {
    density.zero();
    color.zero();
    tables.zero();
  }
};

// Accumulates dL/dsigma (batch) and, when the tape has color, dL/drgb
// (batch*3) into parameter gradients across both heads and the tables.
template <class Real>
void field_backward(const RadianceField<Real>& f, const FieldTape<Real>& t,
                    const std::vector<Real>& dsigma,
                    const std::vector<Real>& drgb, FieldGrads<Real>& g) {
  int B = t.batch;
  VNF_REQUIRE(int(dsigma.size()) == B, "field_backward: dsigma shape");
  std::vector<Real> dgeo(size_t(B) * kGeoWidth, Real(0));

  if (t.has_color) {
    VNF_REQUIRE(int(drgb.size()) == B * 3, "field_backward: drgb shape");
    std::vector<Real> draw(size_t(B) * 3);
    for (int i = 0; i < B * 3; ++i) {
      Real y = t.rgb[i];
      draw[i] = drgb[i] * y * (Real(1) - y);  // logistic'
    }
    std::vector<Real> dcin;
    diffnet::mlp_backward(f.color_net, t.color, draw, g.color, &dcin);
    for (int i = 0; i < B; ++i)
      for (int k = 0; k < kGeoWidth; ++k)
        dgeo[size_t(i) * kGeoWidth + k] =
            dcin[size_t(i) * (kGeoWidth + kShWidth) + k];
  }

  for (int i = 0; i < B; ++i) {
    double r = double(t.raw_sigma[i]);
    Real de = (r > -kRawClamp && r < kRawClamp) ? dsigma[i] * t.sigma[i]
                                                : Real(0);
    dgeo[size_t(i) * kGeoWidth] += de;  // exp' through the density channel
  }

  std::vector<Real> denc;
  diffnet::mlp_backward(f.density_net, t.density, dgeo, g.density, &denc);
  hashenc::encode_backward(f.tables.cfg, t.enc, denc, g.tables);
}

}  // namespace vnf::field
