#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "incidence/projections.hpp"

using namespace incidence;

namespace {

std::vector<Cube> grid(int k) {
  std::vector<Cube> out;
  for (std::int64_t i = 0; i < (1 << k); ++i)
    for (std::int64_t j = 0; j < (1 << k); ++j) out.push_back({k, i, j});
  return out;
}

std::vector<Cube> row(int k, std::int64_t y = 0) {
  std::vector<Cube> out;
  for (std::int64_t i = 0; i < (1 << k); ++i) out.push_back({k, i, y});
  return out;
}

// Product of two sets whose binary digits are free at even positions only.
std::vector<Cube> half_cantor_square(int k) {
  std::vector<std::int64_t> c;
  for (std::int64_t x = 0; x < (1 << k); ++x) {
    bool ok = true;
    for (int pos = 0; pos < k; ++pos)
      if (pos % 2 == 1 && ((x >> (k - 1 - pos)) & 1)) ok = false;
    if (ok) c.push_back(x);
  }
  std::vector<Cube> out;
  for (auto x : c)
    for (auto y : c) out.push_back({k, x, y});
  return out;
}

// Floating-point oracle: each cube's image interval, cell by cell.
std::size_t oracle_cover(const std::vector<Cube>& pts, const Direction& d, int r) {
  std::set<long long> cells;
  const double sigma = d.slope();
  for (const auto& c : pts) {
    const double w = std::ldexp(1.0, -c.k);
    const double u = (d.swapped ? c.iy : c.ix) * w;
    const double v = (d.swapped ? c.ix : c.iy) * w;
    const double lo = u + std::min(0.0, sigma * w) + sigma * v;
    const double hi = u + w + std::max(0.0, sigma * w) + sigma * v;
    const double rho = std::ldexp(1.0, -r);
    for (long long i = static_cast<long long>(std::floor(lo / rho));
         static_cast<double>(i) * rho < hi; ++i)
      cells.insert(i);
  }
  return cells.size();
}

}  // namespace

TEST_CASE("direction grid") {
  const auto dirs = DirectionGrid{Scale{3}}.directions();
  CHECK(dirs.size() == 16 + 15);
  std::vector<double> angles;
  for (const auto& d : dirs) angles.push_back(d.angle());
  std::sort(angles.begin(), angles.end());
  CHECK(std::adjacent_find(angles.begin(), angles.end()) == angles.end());
  CHECK(angles.front() >= 0.0);
  CHECK(angles.back() < std::numbers::pi);
}

TEST_CASE("projection covering basics") {
  CHECK(projection_covering(grid(5), Direction{0, 0, false}, Scale{5}) == 32);
  CHECK(projection_covering(grid(5), Direction{0, 0, false}, Scale{3}) == 8);
  // A horizontal row collapses under the vertical coordinate.
  CHECK(projection_covering(row(6, 9), Direction{0, 0, true}, Scale{6}) == 1);
  CHECK(projection_covering(row(6, 9), Direction{0, 0, true}, Scale{2}) == 1);
}

TEST_CASE("projection covering matches oracle") {
  const auto pts = half_cantor_square(8);
  for (const Direction d : {Direction{-1, 0, false}, Direction{-1, 0, true}, Direction{1, 1, false},
                            Direction{-3, 3, true}, Direction{5, 4, false}, Direction{0, 0, true}}) {
    for (int r : {2, 5, 8, 10}) {
      CHECK(projection_covering(pts, d, Scale{r}) == oracle_cover(pts, d, r));
    }
  }
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Cube> pts2;
    const int k = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < 20; ++i)
      pts2.push_back({k, static_cast<std::int64_t>(rng() % (1u << k)),
                      static_cast<std::int64_t>(rng() % (1u << k))});
    const int e = static_cast<int>(rng() % 5);
    const std::int64_t n = static_cast<std::int64_t>(rng() % (2u << e)) - (1 << e);
    const Direction d{n, e, static_cast<bool>(rng() & 1)};
    const int r = static_cast<int>(rng() % 9);
    REQUIRE(projection_covering(pts2, d, Scale{r}) == oracle_cover(pts2, d, r));
  }
}

TEST_CASE("projection covering size bounds") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Cube> pts;
    const int k = 6;
    for (int i = 0; i < 30; ++i)
      pts.push_back({k, static_cast<std::int64_t>(rng() % 64), static_cast<std::int64_t>(rng() % 64)});
    for (const auto& d : DirectionGrid{Scale{3}}.directions()) {
      const int r = static_cast<int>(rng() % 8);
      const auto n = projection_covering(pts, d, Scale{r});
      const double width = 1.0 + std::abs(d.slope());
      // Every cube meets at most ceil(width delta / rho) + 1 cells.
      const double per_cube = std::ceil(width * std::ldexp(1.0, r - k)) + 1;
      CHECK(n <= pts.size() * per_cube);
      CHECK(n <= width * std::ldexp(1.0, r) + 2);
    }
  }
}

TEST_CASE("swapping axes swaps the projection form") {
  std::mt19937_64 rng(5);
  std::vector<Cube> pts, swapped;
  for (int i = 0; i < 200; ++i) {
    const Cube c{7, static_cast<std::int64_t>(rng() % 128), static_cast<std::int64_t>(rng() % 128)};
    pts.push_back(c);
    swapped.push_back({c.k, c.iy, c.ix});
  }
  for (const auto& d : DirectionGrid{Scale{4}}.directions()) {
    const Direction other{d.num, d.exp, !d.swapped};
    CHECK(projection_covering(pts, d, Scale{6}) == projection_covering(swapped, other, Scale{6}));
  }
}

TEST_CASE("exceptional survey") {
  SUBCASE("full grid has none") {
    const auto r = exceptional_survey(grid(6), 0.9, Scale{6}, DirectionGrid{Scale{6}}, 2.0, 4);
    CHECK(r.exceptional_count == 0);
    CHECK(r.exponent == 0.0);
    CHECK(*r.conjecture == 0.0);
  }
  SUBCASE("horizontal segment") {
    const int k = 12;
    const double s = 0.5;
    const auto r = exceptional_survey(row(k, 100), s, Scale{k}, DirectionGrid{Scale{k}}, 1.0, 4);
    // Only projections y + sigma x with |sigma| small stay below
    // delta^-s = 64: the image has length about |sigma| + delta.
    CHECK(r.exceptional_count > 0);
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      if (!r.exceptional[i]) continue;
      CHECK(r.grid[i].swapped);
      CHECK(std::abs(r.grid[i].slope()) < std::ldexp(1.0, -6));
    }
    CHECK(r.exceptional_count <= 2 * 64 + 2);
    CHECK(r.exponent <= s + 0.1);
  }
  SUBCASE("monotone in s") {
    const auto pts = half_cantor_square(8);
    const auto lo = exceptional_survey(pts, 0.3, Scale{8}, DirectionGrid{Scale{8}});
    const auto hi = exceptional_survey(pts, 0.6, Scale{8}, DirectionGrid{Scale{8}}, {}, 3);
    for (std::size_t i = 0; i < lo.grid.size(); ++i) {
      if (lo.exceptional[i]) CHECK(hi.exceptional[i]);
    }
    CHECK(hi.covers == lo.covers);
  }
}

TEST_CASE("direction sets") {
  const int k = 8;
  const Cube p{k, 40, 77};
  const Cube q = parent_at(p, Scale{4});
  std::vector<Tube> fan;
  for (std::int64_t a = 0; a < 256; ++a) fan.push_back(tube_through(p, a, k));
  const auto all = direction_set(q, fan, 1.0, 1.0);
  CHECK(all.directions.size() == 16);
  CHECK(all.spread.c_star == doctest::Approx(1.0));

  const std::vector<Tube> one{fan[17]};
  const auto single = direction_set(q, one, 0.5, 100.0);
  CHECK(single.directions.size() == 1);
  CHECK(single.spread.c_star == doctest::Approx(std::pow(2.0, 4 * 0.5)));

  const std::vector<Tube> far{Tube{{k, 0, 200}, Orientation::standard}};
  CHECK_THROWS_AS(direction_set(Cube{4, 0, 0}, far, 0.5, 1.0), GeometryError);

  // Coarsening a spread fan only smooths it.
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Tube> ts;
    for (int i = 0; i < 40; ++i) ts.push_back(tube_through(p, static_cast<std::int64_t>(rng() % 256), k));
    ts = sorted_unique(ts);
    const double c_fine = check_tube_spread(ts, Scale{k}, 0.5, 1.0).c_star;
    const auto ds = direction_set(q, ts, 0.5, 1.0);
    CHECK(ds.spread.c_star <= 8.0 * c_fine);
  }
}

TEST_CASE("pruning bad directions") {
  const int k = 8;
  const Cube q{4, 5, 9};
  std::vector<Tube> dirs;
  for (std::int64_t a = 0; a < 16; ++a) dirs.push_back(Tube{{4, a, 0}, Orientation::standard});

  SUBCASE("full grid inside Q keeps everything") {
    std::vector<Cube> pts;
    for (std::int64_t i = 0; i < 16; ++i)
      for (std::int64_t j = 0; j < 16; ++j) pts.push_back({k, q.ix * 16 + i, q.iy * 16 + j});
    const auto r = prune_bad_directions(q, dirs, pts, 0.5, 1.0);
    CHECK(r.pruned.empty());
    CHECK(r.pass);
  }
  SUBCASE("a horizontal line is pruned along itself") {
    std::vector<Cube> pts;
    for (std::int64_t i = 0; i < 16; ++i) pts.push_back({k, q.ix * 16 + i, q.iy * 16 + 3});
    const auto r = prune_bad_directions(q, dirs, pts, 0.5, 1.0);
    REQUIRE(!r.pruned.empty());
    CHECK(r.pruned.front().param.ix == 0);  // slope 0 runs along the line
    CHECK(r.kept.size() >= 8);
  }
}
