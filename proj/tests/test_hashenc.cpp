#include "doctest.h"

#include <set>
#include <vector>

#include "vnf/hashenc.hpp"

using namespace vnf;
using namespace vnf::hashenc;

namespace {

HashGridConfig tiny_config() {
  HashGridConfig cfg;
  cfg.levels = 3;
  cfg.table_size = 1 << 7;  // forces the finest level to hash
  cfg.features = 2;
  cfg.base_resolution = 2;
  cfg.max_resolution = 8;
  return cfg;
}

}  // namespace

TEST_CASE("cell_index: dense row-major layout") {
  CHECK(cell_index(0, 0, 0, 4, 1 << 10) == 0);
  // vertices per axis = res+1 = 5
  CHECK(cell_index(1, 2, 3, 4, 1 << 10) == 1 + 2 * 5 + 3 * 25);
}

TEST_CASE("cell_index: hashed levels stay below the table size") {
  Rng rng(5);
  int table = 1 << 12;
  int res = 4096;  // (res+1)^3 far beyond table
  for (int i = 0; i < 1000000; ++i) {
    int x = int(rng.uniform_index(res + 1));
    int y = int(rng.uniform_index(res + 1));
    int z = int(rng.uniform_index(res + 1));
    uint32_t idx = cell_index(x, y, z, res, table);
    REQUIRE(idx < uint32_t(table));
  }
}

TEST_CASE("cell_index is deterministic across calls") {
  for (int i = 0; i < 100; ++i)
    CHECK(cell_index(i, 2 * i, 3 * i, 1 << 20, 1 << 15) ==
          cell_index(i, 2 * i, 3 * i, 1 << 20, 1 << 15));
}

TEST_CASE("config growth factor and level resolutions") {
  HashGridConfig cfg;  // defaults: L=8, 16..256
  CHECK(cfg.growth() == doctest::Approx(std::pow(16.0, 1.0 / 7.0)));
  CHECK(cfg.level_resolution(0) == 16);
  CHECK(cfg.level_resolution(cfg.levels - 1) == 256);
  for (int l = 0; l + 1 < cfg.levels; ++l)
    CHECK(cfg.level_resolution(l) < cfg.level_resolution(l + 1));
}

TEST_CASE("encode: zero tables give zero features") {
  auto t = tables_init<float>(tiny_config(), 1);
  for (auto& lv : t.level) std::fill(lv.begin(), lv.end(), 0.f);
  std::vector<float> feat;
  encode(t, {{0.3, 0.7, 0.2}}, feat);
  REQUIRE(int(feat.size()) == tiny_config().feature_dim());
  for (float v : feat) CHECK(v == 0.f);
}

TEST_CASE("encode at a lattice vertex returns the vertex rows") {
  auto cfg = tiny_config();
  auto t = tables_init<double>(cfg, 2);
  // position on the vertex (1,1,1) of the coarsest level (res 2)
  Vec3 p{0.5, 0.5, 0.5};
  std::vector<double> feat;
  encode(t, {p}, feat);
  for (int l = 0; l < cfg.levels; ++l) {
    int res = cfg.level_resolution(l);
    // 0.5*res is integral for all levels here (res 2,4,8)
    int c = res / 2;
    uint32_t row = cell_index(c, c, c, res, cfg.table_size);
    for (int f = 0; f < cfg.features; ++f)
      CHECK(feat[size_t(l) * cfg.features + f] ==
            doctest::Approx(t.level[l][size_t(row) * cfg.features + f])
                .epsilon(1e-12));
  }
}

TEST_CASE("encode at an edge midpoint averages the two adjacent rows") {
  HashGridConfig cfg;
  cfg.levels = 1;
  cfg.table_size = 1 << 10;
  cfg.features = 2;
  cfg.base_resolution = 4;
  cfg.max_resolution = 4;
  auto t = tables_init<double>(cfg, 3);
  // midpoint of the x-edge between vertices (1,2,3) and (2,2,3), res 4
  Vec3 p{1.5 / 4.0, 2.0 / 4.0, 3.0 / 4.0};
  std::vector<double> feat;
  encode(t, {p}, feat);
  uint32_t a = cell_index(1, 2, 3, 4, cfg.table_size);
  uint32_t b = cell_index(2, 2, 3, 4, cfg.table_size);
  for (int f = 0; f < 2; ++f) {
    double expect = 0.5 * (t.level[0][size_t(a) * 2 + f] +
                           t.level[0][size_t(b) * 2 + f]);
    CHECK(feat[f] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("encode rejects out-of-cube positions") {
  auto t = tables_init<float>(tiny_config(), 4);
  std::vector<float> feat;
  CHECK_THROWS_AS(encode(t, {{1.2, 0.5, 0.5}}, feat), std::invalid_argument);
  CHECK_THROWS_AS(encode(t, {{0.5, -0.1, 0.5}}, feat), std::invalid_argument);
}

TEST_CASE("tables_init stays inside +-1e-4") {
  auto t = tables_init<float>(tiny_config(), 5);
  for (auto& lv : t.level)
    for (float v : lv) {
      REQUIRE(v >= -1e-4f);
      REQUIRE(v <= 1e-4f);
    }
}

TEST_CASE("interpolation weights sum to one at every level") {
  auto t = tables_init<float>(tiny_config(), 6);
  Rng rng(7);
  std::vector<Vec3> pts;
  for (int i = 0; i < 64; ++i)
    pts.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  std::vector<float> feat;
  EncodeTape tape;
  encode(t, pts, feat, &tape);
  int L = tiny_config().levels;
  for (int s = 0; s < int(pts.size()); ++s)
    for (int l = 0; l < L; ++l) {
      double sum = 0;
      for (int c = 0; c < 8; ++c)
        sum += tape.weights[(size_t(s) * L + l) * 8 + c];
      REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("encode is continuous under small perturbations") {
  auto t = tables_init<double>(tiny_config(), 8);
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Vec3 p{rng.uniform(1e-5, 1 - 1e-5), rng.uniform(1e-5, 1 - 1e-5),
           rng.uniform(1e-5, 1 - 1e-5)};
    Vec3 q{p.x + 1e-6, p.y - 1e-6, p.z + 1e-6};
    std::vector<double> fa, fb;
    encode(t, {p}, fa);
    encode(t, {q}, fb);
    for (size_t k = 0; k < fa.size(); ++k)
      REQUIRE(std::abs(fa[k] - fb[k]) < 1e-3);
  }
}

TEST_CASE("encode_backward: zero upstream grad produces zero table grad") {
  auto cfg = tiny_config();
  auto t = tables_init<float>(cfg, 10);
  std::vector<float> feat;
  EncodeTape tape;
  encode(t, {{0.4, 0.4, 0.4}}, feat, &tape);
  TableGrads<float> g;
  g.init_like(t);
  std::vector<float> df(feat.size(), 0.f);
  encode_backward(cfg, tape, df, g);
  for (auto& lv : g.level)
    for (float v : lv) CHECK(v == 0.f);
}

TEST_CASE("encode_backward at a vertex lands the full grad on one row per level") {
  auto cfg = tiny_config();
  auto t = tables_init<float>(cfg, 11);
  std::vector<float> feat;
  EncodeTape tape;
  encode(t, {{0.5, 0.5, 0.5}}, feat, &tape);
  TableGrads<float> g;
  g.init_like(t);
  std::vector<float> df(feat.size(), 1.f);
  encode_backward(cfg, tape, df, g);
  for (int l = 0; l < cfg.levels; ++l) {
    int nonzero_rows = 0;
    int rows = int(g.level[l].size()) / cfg.features;
    for (int r = 0; r < rows; ++r) {
      bool nz = false;
      for (int f = 0; f < cfg.features; ++f)
        if (g.level[l][size_t(r) * cfg.features + f] != 0.f) nz = true;
      if (nz) {
        ++nonzero_rows;
        for (int f = 0; f < cfg.features; ++f)
          CHECK(g.level[l][size_t(r) * cfg.features + f] == 1.f);
      }
    }
    CHECK(nonzero_rows == 1);
  }
}

TEST_CASE("encode_backward matches finite differences on touched rows") {
  auto cfg = tiny_config();
  auto t = tables_init<double>(cfg, 12);
  Rng rng(13);
  Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
  std::vector<double> feat;
  EncodeTape tape;
  encode(t, {p}, feat, &tape);

  std::vector<double> cot(feat.size());
  for (auto& v : cot) v = rng.uniform(-1, 1);
  TableGrads<double> g;
  g.init_like(t);
  encode_backward(cfg, tape, cot, g);

  auto loss = [&]() {
    std::vector<double> f;
    encode(t, {p}, f);
    double s = 0;
    for (size_t i = 0; i < f.size(); ++i) s += cot[i] * f[i];
    return s;
  };

  const double h = 1e-5;
  for (int l = 0; l < cfg.levels; ++l) {
    std::set<uint32_t> touched;
    for (int c = 0; c < 8; ++c) touched.insert(tape.rows[size_t(l) * 8 + c]);
    for (uint32_t row : touched) {
      for (int f = 0; f < cfg.features; ++f) {
        double& slot = t.level[l][size_t(row) * cfg.features + f];
        double saved = slot;
        slot = saved + h;
        double lp = loss();
        slot = saved - h;
        double lm = loss();
        slot = saved;
        double fd = (lp - lm) / (2 * h);
        double an = g.level[l][size_t(row) * cfg.features + f];
        REQUIRE(std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}) <
                1e-4);
      }
    }
  }
}
