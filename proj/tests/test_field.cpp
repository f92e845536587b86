#include "doctest.h"

#include <vector>

#include "vnf/field.hpp"

using namespace vnf;
using namespace vnf::field;

namespace {

hashenc::HashGridConfig small_cfg() {
  hashenc::HashGridConfig cfg;
  cfg.levels = 2;
  cfg.table_size = 1 << 6;
  cfg.features = 2;
  cfg.base_resolution = 2;
  cfg.max_resolution = 4;
  return cfg;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("query_density: zeroed net gives sigma = 1, raw -15 gives exp(-15)") {
  auto f = field_init<float>(small_cfg(), 1);
  for (auto& lw : f.density_net.w) std::fill(lw.begin(), lw.end(), 0.f);
  for (auto& lb : f.density_net.b) std::fill(lb.begin(), lb.end(), 0.f);
  std::vector<float> sigma;
  query_density(f, {{0.2, 0.5, 0.8}, {0.9, 0.1, 0.3}}, sigma);
  for (float s : sigma) CHECK(s == doctest::Approx(1.0f));

  // force the raw head to -15 via the output bias
  f.density_net.b.back()[0] = -15.f;
  query_density(f, {{0.4, 0.4, 0.4}}, sigma);
  CHECK(sigma[0] == doctest::Approx(std::exp(-15.0)).epsilon(1e-5));
  CHECK(sigma[0] > 0.f);

  // far below the clamp the head saturates
  f.density_net.b.back()[0] = -40.f;
  query_density(f, {{0.4, 0.4, 0.4}}, sigma);
  CHECK(sigma[0] == doctest::Approx(std::exp(-15.0)).epsilon(1e-5));
}

TEST_CASE("query_density rejects positions outside the cube") {
  auto f = field_init<float>(small_cfg(), 2);
  std::vector<float> sigma;
  CHECK_THROWS_AS(query_density(f, {{1.5, 0.5, 0.5}}, sigma),
                  std::invalid_argument);
}

TEST_CASE("query_radiance: zeroed color net renders 0.5 grey, rgb within (0,1)") {
  auto f = field_init<float>(small_cfg(), 3);
  for (auto& lw : f.color_net.w) std::fill(lw.begin(), lw.end(), 0.f);
  for (auto& lb : f.color_net.b) std::fill(lb.begin(), lb.end(), 0.f);
  std::vector<float> sigma, rgb;
  query_radiance(f, {{0.3, 0.3, 0.3}}, {{1, 0, 0}}, sigma, rgb);
  for (float c : rgb) CHECK(c == doctest::Approx(0.5f));

  auto g = field_init<float>(small_cfg(), 4);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    d = d.normalized();
    query_radiance(g, {{rng.uniform(), rng.uniform(), rng.uniform()}}, {d},
                   sigma, rgb);
    for (float c : rgb) {
      REQUIRE(c > 0.f);
      REQUIRE(c < 1.f);
    }
  }
}

TEST_CASE("density is independent of the view direction") {
  auto f = field_init<float>(small_cfg(), 6);
  std::vector<float> s1, s2, rgb;
  Vec3 p{0.6, 0.2, 0.7};
  query_radiance(f, {p}, {{0, 0, 1}}, s1, rgb);
  query_radiance(f, {p}, {{0, 0, -1}}, s2, rgb);
  CHECK(s1[0] == s2[0]);
}

TEST_CASE("query_radiance rejects non-unit directions") {
  auto f = field_init<float>(small_cfg(), 7);
  std::vector<float> sigma, rgb;
  CHECK_THROWS_AS(
      query_radiance(f, {{0.5, 0.5, 0.5}}, {{0.5, 0.5, 0.5}}, sigma, rgb),
      std::invalid_argument);
}

TEST_CASE("spherical harmonics basis: constant term and z rotation symmetry") {
  double a[kShWidth], b[kShWidth];
  sh_encode({0, 0, 1}, a);
  CHECK(a[0] == doctest::Approx(0.28209479177387814));
  // x and y aligned dirs only differ in which degree-1 slot fires
  sh_encode({1, 0, 0}, a);
  sh_encode({0, 1, 0}, b);
  CHECK(a[3] == doctest::Approx(b[1]));
  CHECK(a[1] == doctest::Approx(0.0));
}

TEST_CASE("full backward through both heads matches finite differences") {
  auto f = field_init<double>(small_cfg(), 8);
  Rng rng(9);
  int B = 10;
  std::vector<Vec3> pos, dirs;
  for (int i = 0; i < B; ++i) {
    pos.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    dirs.push_back(d.normalized());
  }
  std::vector<double> cs(B), cc(size_t(B) * 3);
  for (auto& v : cs) v = rng.uniform(-1, 1);
  for (auto& v : cc) v = rng.uniform(-1, 1);

  auto loss = [&]() {
    std::vector<double> sigma, rgb;
    query_radiance(f, pos, dirs, sigma, rgb);
    double L = 0;
    for (int i = 0; i < B; ++i) L += cs[i] * sigma[i];
    for (int i = 0; i < B * 3; ++i) L += cc[i] * rgb[i];
    return L;
  };

  FieldTape<double> tape;
  std::vector<double> sigma, rgb;
  query_radiance(f, pos, dirs, sigma, rgb, &tape);
  FieldGrads<double> g;
  g.init_like(f);
  field_backward(f, tape, cs, cc, g);

  const double h = 1e-5;
  auto check_slot = [&](double& slot, double analytic) {
    double saved = slot;
    slot = saved + h;
    double lp = loss();
    slot = saved - h;
    double lm = loss();
    slot = saved;
    double fd = (lp - lm) / (2 * h);
    REQUIRE(rel_err(fd, analytic) < 1e-4);
  };

  // every hash-table entry
  for (size_t l = 0; l < f.tables.level.size(); ++l)
    for (size_t i = 0; i < f.tables.level[l].size(); ++i)
      check_slot(f.tables.level[l][i], g.tables.level[l][i]);
  // every density-net parameter
  for (int l = 0; l < f.density_net.layer_count(); ++l) {
    for (size_t i = 0; i < f.density_net.w[l].size(); ++i)
      check_slot(f.density_net.w[l][i], g.density.dw[l][i]);
    for (size_t i = 0; i < f.density_net.b[l].size(); ++i)
      check_slot(f.density_net.b[l][i], g.density.db[l][i]);
  }
  // every color-net parameter
  for (int l = 0; l < f.color_net.layer_count(); ++l) {
    for (size_t i = 0; i < f.color_net.w[l].size(); ++i)
      check_slot(f.color_net.w[l][i], g.color.dw[l][i]);
    for (size_t i = 0; i < f.color_net.b[l].size(); ++i)
      check_slot(f.color_net.b[l][i], g.color.db[l][i]);
  }
}

TEST_CASE("density-only backward matches finite differences on table entries") {
  auto f = field_init<double>(small_cfg(), 10);
  Rng rng(11);
  std::vector<Vec3> pos{{0.25, 0.5, 0.75}, {0.8, 0.2, 0.4}};
  std::vector<double> cs{0.7, -1.2};

  auto loss = [&]() {
    std::vector<double> sigma;
    query_density(f, pos, sigma);
    return cs[0] * sigma[0] + cs[1] * sigma[1];
  };

  FieldTape<double> tape;
  std::vector<double> sigma;
  query_density(f, pos, sigma, &tape);
  FieldGrads<double> g;
  g.init_like(f);
  field_backward(f, tape, cs, {}, g);

  const double h = 1e-5;
  for (size_t l = 0; l < f.tables.level.size(); ++l)
    for (size_t i = 0; i < f.tables.level[l].size(); ++i) {
      double& slot = f.tables.level[l][i];
      double saved = slot;
      slot = saved + h;
      double lp = loss();
      slot = saved - h;
      double lm = loss();
      slot = saved;
      double fd = (lp - lm) / (2 * h);
      REQUIRE(rel_err(fd, g.tables.level[l][i]) < 1e-4);
    }
}
