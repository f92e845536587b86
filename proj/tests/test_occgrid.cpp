#include "doctest.h"

#include <algorithm>
#include <map>
#include <vector>

#include "vnf/occgrid.hpp"

using namespace vnf;
using namespace vnf::occgrid;

namespace {

// Slab-test intersection of a ray with one cell's box; the brute-force
// counterpart of walk_cells.
bool cell_interval(const Vec3& o, const Vec3& d, int res, int x, int y, int z,
                   double t1, double& te, double& tx) {
  double lo = 0.0, hi = t1;
  double ob[3] = {o.x, o.y, o.z};
  double db[3] = {d.x, d.y, d.z};
  int c[3] = {x, y, z};
  for (int a = 0; a < 3; ++a) {
    double bl = double(c[a]) / res, bh = double(c[a] + 1) / res;
    if (std::abs(db[a]) < 1e-15) {
      if (ob[a] < bl || ob[a] >= bh) return false;
    } else {
      double ta = (bl - ob[a]) / db[a], tb = (bh - ob[a]) / db[a];
      lo = std::max(lo, std::min(ta, tb));
      hi = std::min(hi, std::max(ta, tb));
    }
  }
  if (lo >= hi) return false;
  te = lo;
  tx = hi;
  return true;
}

}  // namespace

TEST_CASE("bayes_update: hand values and uninformative measurements") {
  CHECK(bayes_update(0.5, 0.7, 0.3) == doctest::Approx(0.7).epsilon(1e-12));
  // equal likelihoods leave the prior untouched
  for (double prior : {0.1, 0.37, 0.5, 0.93})
    CHECK(bayes_update(prior, 0.4, 0.4) == doctest::Approx(prior).epsilon(1e-12));
  // clamped away from saturation
  CHECK(bayes_update(1.0, 1.0, 0.0) == doctest::Approx(1.0 - kProbFloor));
  CHECK(bayes_update(0.0, 0.0, 1.0) == doctest::Approx(kProbFloor));
}

TEST_CASE("bayes_update: zero-zero likelihoods leave the prior and flag an anomaly") {
  bool anomaly = false;
  CHECK(bayes_update(0.42, 0.0, 0.0, &anomaly) == 0.42);
  CHECK(anomaly);
}

TEST_CASE("repeated informative updates drive the posterior to its clamp bound") {
  double p = 0.5, prev = 0.5;
  for (int i = 0; i < 100; ++i) {
    p = bayes_update(p, 0.7, 0.3);
    REQUIRE(p >= prev);
    prev = p;
  }
  CHECK(p == doctest::Approx(1.0 - kProbFloor));
}

TEST_CASE("update order does not change the posterior (log-odds commutativity)") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 2 + int(rng.uniform_index(10));
    std::vector<std::pair<double, double>> updates(n);
    for (auto& u : updates) {
      u.first = rng.uniform(0.25, 0.75);
      u.second = rng.uniform(0.25, 0.75);
    }
    double base = 0.5;
    for (auto& u : updates) base = bayes_update(base, u.first, u.second);

    // random permutation via fisher-yates
    for (int i = n - 1; i > 0; --i)
      std::swap(updates[i], updates[rng.uniform_index(i + 1)]);
    double perm = 0.5;
    for (auto& u : updates) perm = bayes_update(perm, u.first, u.second);
    REQUIRE(std::abs(base - perm) < 1e-9);
  }
}

TEST_CASE("project_density: fixed point, limits and hand value") {
  CHECK(project_density(10.0, 4.0, 10.0) == 0.5);
  CHECK(project_density(0.0, 4.0, 10.0) == 0.0);
  CHECK(project_density(1e30, 4.0, 10.0) == doctest::Approx(1.0));
  CHECK(project_density(30.0, 1.0, 10.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(project_density(1e-30, 4.0, 10.0) == doctest::Approx(0.0));
}

TEST_CASE("project_density is strictly increasing and scale covariant") {
  double prev = -1;
  for (double s = 0.5; s < 100; s *= 1.5) {
    double p = project_density(s, 4.0, 10.0);
    REQUIRE(p > prev);
    prev = p;
  }
  Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    double sigma = rng.uniform(0.01, 50);
    double st = rng.uniform(0.1, 20);
    CHECK(project_density(sigma, 3.0, st) ==
          doctest::Approx(project_density(sigma / st, 3.0, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("is_occupied: fresh grid is conservative, floor cells are free") {
  OccupancyGrid g(16, GridKind::virus);
  CHECK(g.is_occupied({0.5, 0.5, 0.5}, 0.5));
  CHECK(g.is_occupied({0.01, 0.99, 0.3}, 0.5));
  CHECK_FALSE(g.is_occupied({1.5, 0.5, 0.5}, 0.5));  // out of cube: unoccupied
  g.cells()[g.index_of(8, 8, 8)] = float(kProbFloor);
  CHECK_FALSE(g.is_occupied({8.5 / 16, 8.5 / 16, 8.5 / 16}, 0.5));
}

TEST_CASE("half-open binning maps boundary positions to exactly one cell") {
  OccupancyGrid g(8, GridKind::virus);
  for (int k = 0; k < 8; ++k) {
    int x, y, z;
    REQUIRE(g.cell_of({k / 8.0, 0.0, 0.0}, x, y, z));
    CHECK(x == k);  // lattice point k/8 belongs to cell k
  }
  int x, y, z;
  CHECK_FALSE(g.cell_of({1.0, 0.5, 0.5}, x, y, z));
  CHECK_FALSE(g.cell_of({-1e-12, 0.5, 0.5}, x, y, z));
}

TEST_CASE("walk_cells visits exactly the cells the slab oracle reports") {
  Rng rng(23);
  int res = 16;
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 o{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
           rng.uniform(0.05, 0.95)};
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    d = d.normalized();
    double t1 = rng.uniform(0.1, 1.5);

    std::map<std::tuple<int, int, int>, std::pair<double, double>> walked;
    walk_cells(o, d, 0.0, t1, res, [&](int x, int y, int z, double te, double tx) {
      walked[{x, y, z}] = {te, tx};
      return true;
    });

    std::map<std::tuple<int, int, int>, std::pair<double, double>> brute;
    for (int x = 0; x < res; ++x)
      for (int y = 0; y < res; ++y)
        for (int z = 0; z < res; ++z) {
          double te, tx;
          if (cell_interval(o, d, res, x, y, z, t1, te, tx) && tx - te > 1e-12)
            brute[{x, y, z}] = {te, tx};
        }

    REQUIRE(walked.size() == brute.size());
    for (auto& [key, iv] : brute) {
      REQUIRE(walked.count(key) == 1);
      CHECK(std::abs(walked[key].first - iv.first) < 1e-9);
      CHECK(std::abs(walked[key].second - iv.second) < 1e-9);
    }
  }
}

TEST_CASE("depth_update: invalid rays leave the grid untouched") {
  OccupancyGrid g(16, GridKind::virus);
  auto before = g.cells();
  InverseSensorModelParams ism;
  std::vector<GridRay> rays(4);
  for (auto& r : rays) {
    r.dir = {1, 0, 0};
    r.depth = 0.5;
    r.valid = false;
  }
  g.depth_update({0.5, 0.5, 0.5}, rays, ism);
  CHECK(g.cells() == before);
}

TEST_CASE("depth_update matches a brute-force classification of every cell") {
  int res = 16;
  OccupancyGrid g(res, GridKind::virus);
  InverseSensorModelParams ism;
  Vec3 origin{0.213, 0.407, 0.481};
  GridRay ray{{0.83, 0.55, 0.071}, 0.0, true};
  ray.dir = ray.dir.normalized();
  ray.depth = 0.55;
  g.depth_update(origin, {ray}, ism);

  double h = double(ism.thickness_cells) / res;
  int free_cells = 0, hit_cells = 0;
  for (int x = 0; x < res; ++x)
    for (int y = 0; y < res; ++y)
      for (int z = 0; z < res; ++z) {
        double te, tx;
        float v = g.cells()[g.index_of(x, y, z)];
        bool crossed =
            cell_interval(origin, ray.dir, res, x, y, z, ray.depth + h, te, tx) &&
            tx - te > 1e-12;
        if (!crossed) {
          REQUIRE(v == 0.5f);
          continue;
        }
        if (tx < ray.depth - h) {
          ++free_cells;
          REQUIRE(v == doctest::Approx(bayes_update(0.5, ism.p_emp, 1 - ism.p_emp)));
        } else {
          ++hit_cells;
          REQUIRE(v == doctest::Approx(bayes_update(0.5, ism.p_occ, 1 - ism.p_occ)));
        }
      }
  CHECK(free_cells > 0);
  CHECK(hit_cells > 0);
}

TEST_CASE("depth_update never touches cells beyond depth + thickness") {
  int res = 32;
  OccupancyGrid g(res, GridKind::virus);
  InverseSensorModelParams ism;
  Vec3 origin{0.1, 0.52, 0.47};
  GridRay ray{{1, 0, 0}, 0.3, true};
  g.depth_update(origin, {ray}, ism);
  double h = double(ism.thickness_cells) / res;
  double cut = 0.1 + ray.depth + h;
  int yc = int(0.52 * res), zc = int(0.47 * res);
  for (int x = 0; x < res; ++x) {
    double cell_lo = double(x) / res;
    if (cell_lo > cut + 1e-12)
      CHECK(g.cells()[g.index_of(x, yc, zc)] == 0.5f);
  }
}

TEST_CASE("repeated consistent measurements push surface cells past the threshold") {
  int res = 32;
  OccupancyGrid g(res, GridKind::virus);
  InverseSensorModelParams ism;
  Vec3 origin{0.1, 0.5, 0.5};
  GridRay ray{{1, 0, 0}, 0.4, true};
  // the surface cell starts at 0.5; five hits lift it well past tau
  int x, y, z;
  g.cell_of({0.5, 0.5, 0.5}, x, y, z);
  for (int i = 0; i < 5; ++i) g.depth_update(origin, {ray}, ism);
  CHECK(g.cells()[g.index_of(x, y, z)] > 0.5f);
  double manual = 0.5;
  for (int i = 0; i < 5; ++i) manual = bayes_update(manual, ism.p_occ, 1 - ism.p_occ);
  CHECK(g.cells()[g.index_of(x, y, z)] == doctest::Approx(manual).epsilon(1e-5));
}

TEST_CASE("nerf_update: uniform density at sigma_t_max leaves cells unchanged") {
  OccupancyGrid g(8, GridKind::virus);
  DensityProjectionParams params;
  params.sigma_t_max = 10.0;
  Rng rng(29);
  auto density = [](const std::vector<Vec3>& pts, std::vector<float>& out) {
    out.assign(pts.size(), 10.0f);
  };
  g.nerf_update(density, 256, params, rng);
  CHECK(params.sigma_t == 10.0);
  for (float v : g.cells()) CHECK(v == 0.5f);
}

TEST_CASE("nerf_update: sigma_t tracks the batch mean early, carves below-mean cells") {
  OccupancyGrid g(8, GridKind::virus);
  DensityProjectionParams params;
  params.sigma_t_max = 10.0;
  Rng rng(31);
  // tiny uniform densities, far below sigma_t_max
  auto density = [](const std::vector<Vec3>& pts, std::vector<float>& out) {
    out.assign(pts.size(), 0.01f);
  };
  g.nerf_update(density, 128, params, rng);
  CHECK(params.sigma_t == doctest::Approx(0.01).epsilon(1e-4));
  // projection at sigma == sigma_t is exactly 0.5: cells unchanged, not vanished
  for (float v : g.cells()) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("nerf_update saturates sigma_t at sigma_t_max for dense fields") {
  OccupancyGrid g(8, GridKind::virus);
  DensityProjectionParams params;
  params.sigma_t_max = 10.0;
  Rng rng(37);
  auto density = [](const std::vector<Vec3>& pts, std::vector<float>& out) {
    out.assign(pts.size(), 500.0f);
  };
  g.nerf_update(density, 64, params, rng);
  CHECK(params.sigma_t == 10.0);
  // all sampled cells move toward occupied
  int raised = 0;
  for (float v : g.cells())
    if (v > 0.5f) ++raised;
  CHECK(raised > 0);
}

TEST_CASE("all cells stay inside the probability clamp forever") {
  OccupancyGrid g(8, GridKind::virus);
  InverseSensorModelParams ism;
  Rng rng(41);
  DensityProjectionParams params;
  auto density = [&](const std::vector<Vec3>& pts, std::vector<float>& out) {
    out.resize(pts.size());
    for (auto& v : out) v = float(rng.uniform(0.0, 100.0));
  };
  for (int i = 0; i < 30; ++i) {
    g.nerf_update(density, 128, params, rng);
    GridRay ray{{1, 0, 0}, rng.uniform(0.1, 0.8), true};
    g.depth_update({0.05, rng.uniform(0.2, 0.8), 0.5}, {ray}, ism);
  }
  for (float v : g.cells()) {
    REQUIRE(v >= float(kProbFloor) * 0.999f);
    REQUIRE(v <= 1.0f - float(kProbFloor) * 0.999f);
  }
}

TEST_CASE("instantngp variant: sample-all schedule then EMA decay with threshold") {
  OccupancyGrid g(8, GridKind::instantngp);
  Rng rng(43);
  int queried = 0;
  auto density = [&](const std::vector<Vec3>& pts, std::vector<float>& out) {
    queried += int(pts.size());
    out.assign(pts.size(), 0.0f);
  };
  g.instantngp_update(density, /*train_step=*/0, rng);
  CHECK(queried == 8 * 8 * 8);  // sample-all phase
  queried = 0;
  g.instantngp_update(density, /*train_step=*/300, rng);
  CHECK(queried == 8 * 8 * 8 / 4);  // quarter phase

  // zero density everywhere: EMA decays below the fixed threshold eventually
  for (int i = 0; i < 60; ++i) g.instantngp_update(density, 300 + i, rng);
  CHECK_FALSE(g.is_occupied({0.5, 0.5, 0.5}));
}
