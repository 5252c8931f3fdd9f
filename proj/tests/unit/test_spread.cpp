#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "incidence/spread.hpp"

using namespace incidence;

namespace {

std::vector<Cube> full_grid(int k) {
  std::vector<Cube> out;
  for (std::int64_t i = 0; i < (1 << k); ++i)
    for (std::int64_t j = 0; j < (1 << k); ++j) out.push_back({k, i, j});
  return out;
}

// Row y = 0 of the set of x whose base-4 digits are all 0 or 3.
std::vector<Cube> middle_halves_row(int n) {
  std::vector<Cube> out;
  for (std::int64_t code = 0; code < (std::int64_t{1} << n); ++code) {
    std::int64_t x = 0;
    for (int d = n - 1; d >= 0; --d) x = 4 * x + (((code >> d) & 1) ? 3 : 0);
    out.push_back({2 * n, x, 0});
  }
  return out;
}

// Row with binary digits free at even positions only (dimension 1/2).
std::vector<Cube> half_dim_row(int k) {
  std::vector<Cube> out;
  const int free_bits = (k + 1) / 2;
  for (std::int64_t code = 0; code < (std::int64_t{1} << free_bits); ++code) {
    std::int64_t x = 0;
    for (int pos = 0, b = free_bits - 1; pos < k; ++pos) {
      const int bit = (pos % 2 == 0) ? static_cast<int>((code >> b--) & 1) : 0;
      x = 2 * x + bit;
    }
    out.push_back({k, x, 0});
  }
  return out;
}

// Brute-force oracle: every dyadic r and every r-cube of the bounding box,
// membership by coordinate comparison.
double brute_c_star(const std::vector<Cube>& pts, double s) {
  const int k = pts.front().k;
  double best = 0;
  for (int j = 0; j <= k; ++j) {
    const std::int64_t side = std::int64_t{1} << (k - j);  // r-cube side in delta units
    std::int64_t max_x = 0, max_y = 0;
    for (const auto& p : pts) {
      max_x = std::max(max_x, p.ix);
      max_y = std::max(max_y, p.iy);
    }
    for (std::int64_t qx = 0; qx * side <= max_x; ++qx) {
      for (std::int64_t qy = 0; qy * side <= max_y; ++qy) {
        std::size_t n = 0;
        for (const auto& p : pts) {
          if (p.ix >= qx * side && p.ix < (qx + 1) * side && p.iy >= qy * side &&
              p.iy < (qy + 1) * side)
            ++n;
        }
        best = std::max(best, n / (std::pow(std::ldexp(1.0, -j), s) * pts.size()));
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("covering_number") {
  const auto grid = full_grid(2);
  CHECK(covering_number(grid, Scale{2}) == 16);
  CHECK(covering_number(grid, Scale{0}) == 1);
  for (int n = 1; n <= 6; ++n) {
    CHECK(covering_number(middle_halves_row(n), Scale{2 * n}) == (std::size_t{1} << n));
  }
  CHECK_THROWS_AS(covering_number(grid, Scale{3}), GeometryError);

  // Coarser covers are smaller.
  std::mt19937_64 rng(1);
  std::vector<Cube> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({9, static_cast<std::int64_t>(rng() % 512), static_cast<std::int64_t>(rng() % 512)});
  for (int j = 1; j <= 9; ++j) CHECK(covering_number(pts, Scale{j - 1}) <= covering_number(pts, Scale{j}));
}

TEST_CASE("check_spread closed forms") {
  const auto grid = full_grid(4);
  auto rep = check_spread(grid, Scale{4}, 2.0, 1.0);
  CHECK(rep.c_star == doctest::Approx(1.0));
  CHECK(rep.pass);

  const std::vector<Cube> single{{6, 3, 7}};
  rep = check_spread(single, Scale{6}, 0.7, 1.0);
  CHECK(rep.c_star == doctest::Approx(std::pow(2.0, 6 * 0.7)));
  CHECK(rep.witness_scale == Scale{6});
  CHECK_FALSE(rep.pass);

  // s = 0: only |P cap Q| <= C |P| is asked for.
  rep = check_spread(grid, Scale{4}, 0.0, 1.0);
  CHECK(rep.c_star == doctest::Approx(1.0));
}

TEST_CASE("check_spread matches the brute-force oracle") {
  const auto row = half_dim_row(10);
  const double oracle = brute_c_star(row, 0.5);
  const auto rep = check_spread(row, Scale{10}, 0.5, 4.0);
  CHECK(rep.c_star == doctest::Approx(oracle));
  CHECK(rep.c_star <= 4.0);
  CHECK(rep.pass);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Cube> pts;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) pts.push_back({6, static_cast<std::int64_t>(rng() % 64), static_cast<std::int64_t>(rng() % 64)});
    pts = sorted_unique(pts);
    const double s = 0.25 * static_cast<double>(rng() % 9);
    const auto r = check_spread(pts, Scale{6}, s, 1.0);
    CHECK(r.c_star == doctest::Approx(brute_c_star(pts, s)));
    // Minimality of the witness.
    CHECK(check_spread(pts, Scale{6}, s, r.c_star).pass);
    CHECK_FALSE(check_spread(pts, Scale{6}, s, r.c_star * (1 - 1e-9)).pass);
  }
}

TEST_CASE("check_tube_spread delegates to parameter cubes") {
  std::vector<Tube> tubes;
  for (const auto& c : full_grid(3)) tubes.push_back(Tube{c});
  CHECK(check_tube_spread(tubes, Scale{3}, 2.0, 1.0).c_star == doctest::Approx(1.0));
  const std::vector<Tube> one{Tube{Cube{5, -3, 9}}};
  CHECK(check_tube_spread(one, Scale{5}, 0.5, 1.0).c_star == doctest::Approx(std::pow(2.0, 2.5)));
}

TEST_CASE("check_regular") {
  const auto grid = full_grid(4);
  CHECK(check_regular(grid, Scale{4}, 2.0, 1.0, 1.0).pass);
  CHECK_THROWS_AS(check_regular(full_grid(3), Scale{3}, 2.0, 1.0, 1.0), GeometryError);

  // Concentrated inside one delta^{1/2}-cube: the half-scale count is 1 but
  // the spread check fails at r = delta^{1/2}.
  std::vector<Cube> conc;
  for (std::int64_t i = 0; i < 8; ++i)
    for (std::int64_t j = 0; j < 8; ++j) conc.push_back({6, i, j});
  const auto rep = check_regular(conc, Scale{6}, 1.0, 2.0, 1.0);
  CHECK(rep.half_scale_count == 1);
  CHECK_FALSE(rep.spread.pass);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("check_between_scales") {
  const auto grid = full_grid(6);
  CHECK(check_between_scales(grid, Scale{6}, Scale{2}, 2.0, 1.0).pass);
  CHECK(check_between_scales(grid, Scale{6}, Scale{2}, 2.0, 1.0, 1.0).pass);
  // Delta = 1 reduces to the plain check.
  const auto row = half_dim_row(8);
  const auto between = check_between_scales(row, Scale{8}, Scale{0}, 0.5, 4.0);
  REQUIRE(between.per_cube.size() == 1);
  CHECK(between.per_cube.front().spread.c_star ==
        doctest::Approx(check_spread(row, Scale{8}, 0.5, 4.0).c_star));
}

TEST_CASE("uniformize") {
  const auto grid = full_grid(4);
  const std::vector<Scale> scales{Scale{1}, Scale{2}, Scale{3}, Scale{4}};
  CHECK(uniformize(grid, scales).kept == grid);
  CHECK(uniformize(grid, scales, UniformMode::exact).kept == grid);
  CHECK_THROWS(uniformize(std::vector<Cube>{}, scales));

  std::mt19937_64 rng(3);
  std::vector<Cube> pts;
  for (int i = 0; i < 6000; ++i) {
    // Random set with uneven density.
    const std::int64_t x = static_cast<std::int64_t>(rng() % 4096);
    const std::int64_t y = static_cast<std::int64_t>(rng() % (x < 2048 ? 4096 : 512));
    pts.push_back({12, x, y});
  }
  pts = sorted_unique(pts);
  const std::vector<Scale> sc{Scale{3}, Scale{6}, Scale{9}, Scale{12}};
  for (auto mode : {UniformMode::banded, UniformMode::exact}) {
    const auto res = uniformize(pts, sc, mode);
    const double budget = std::pow(std::log(4096.0), 4);
    CHECK(static_cast<double>(res.kept.size()) >= pts.size() / budget);
    // Direct count over all parents at every level.
    for (std::size_t j = 0; j < sc.size(); ++j) {
      const Scale coarse{j == 0 ? 0 : sc[j - 1].k};
      std::map<Cube, std::vector<Cube>> kids;
      for (const auto& p : res.kept) kids[parent_at(p, coarse)].push_back(parent_at(p, sc[j]));
      for (auto& [q, c] : kids) {
        const auto n = sorted_unique(c).size();
        const std::size_t lo = std::size_t{1} << (res.band[j] - 1);
        if (mode == UniformMode::exact) {
          CHECK(n == lo);
        } else {
          CHECK(n >= lo);
          CHECK(n < 2 * lo);
        }
      }
    }
    // Idempotent.
    CHECK(uniformize(res.kept, sc, mode).kept == res.kept);
  }
}

TEST_CASE("branching_function") {
  const auto grid = full_grid(4);
  const auto f = branching_function(grid, Scale{1}, 4);
  CHECK(f.branching == std::vector<std::int64_t>{4, 4, 4, 4});
  for (int j = 0; j <= 4; ++j) CHECK(f.values[j] == doctest::Approx(2.0 * j));

  std::vector<Cube> line;
  for (std::int64_t i = 0; i < 16; ++i) line.push_back({4, i, 5});
  const auto g = branching_function(line, Scale{1}, 4);
  for (int j = 0; j <= 4; ++j) CHECK(g.values[j] == doctest::Approx(1.0 * j));
  CHECK(g.chord_slope(0, 4) == doctest::Approx(1.0));
  CHECK(g(2.5) == doctest::Approx(2.5));

  // Two regimes: full branching for two levels then a single child.
  std::vector<Cube> two;
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) two.push_back({4, 4 * i, 4 * j});
  const auto h = branching_function(two, Scale{1}, 4);
  CHECK(h.values[2] == doctest::Approx(4.0));
  CHECK(h.values[4] == doctest::Approx(4.0));
  for (int j = 0; j <= 4; ++j) {
    CHECK(std::pow(2.0, h.values[j]) == doctest::Approx(covering_number(two, Scale{j})));
  }

  std::vector<Cube> bad{{2, 0, 0}, {2, 1, 0}, {2, 2, 2}};
  try {
    branching_function(bad, Scale{1}, 2);
    FAIL("expected NonUniformError");
  } catch (const NonUniformError& e) {
    CHECK(e.level() == 2);
  }
}
