#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "incidence/generators.hpp"
#include "incidence/multiscale.hpp"
#include "support/oracles.hpp"

using namespace incidence;

namespace {

BranchingFunction profile(std::vector<double> v) {
  return BranchingFunction::from_values(Scale{1}, std::move(v));
}

BranchingFunction linear_profile(int m, double slope) {
  std::vector<double> v(m + 1);
  for (int i = 0; i <= m; ++i) v[i] = slope * i;
  return profile(v);
}

BranchingFunction two_regime(int m) {
  std::vector<double> v(m + 1, 0.0);
  for (int i = 1; i <= m; ++i) v[i] = v[i - 1] + (i <= m / 2 ? 2.0 : 0.2);
  return profile(v);
}

}  // namespace

TEST_CASE("linear and superlinear predicates") {
  const auto lin = linear_profile(10, 0.7);
  CHECK(is_eps_linear(lin, 0, 10, 0.0));
  CHECK(is_eps_linear(lin, 2.5, 7.25, 0.0));
  CHECK(is_eps_superlinear(lin, 3, 4, 0.0));
  const auto l = linear_approx(lin, 1, 9);
  CHECK(l(1) == doctest::Approx(lin(1)));
  CHECK(l(9) == doctest::Approx(lin(9)));
  CHECK_THROWS_AS(is_eps_linear(lin, 4, 4, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(is_eps_linear(lin, 5, 3, 0.1), std::invalid_argument);

  // Convex: 0 on [0,4], slope 2 on [4,8]. The chord over [0,8] has slope 1
  // and the largest gap below it is 4 at x = 4.
  std::vector<double> v(9, 0.0);
  for (int i = 5; i <= 8; ++i) v[i] = 2.0 * (i - 4);
  const auto convex = profile(v);
  CHECK_FALSE(is_eps_superlinear(convex, 0, 8, 0.49));
  CHECK(is_eps_superlinear(convex, 0, 8, 0.5));
  CHECK_FALSE(is_eps_linear(convex, 0, 8, 0.49));
  CHECK(is_eps_linear(convex, 0, 8, 0.5));

  // Concave profiles are 0-superlinear.
  const auto concave = two_regime(16);
  CHECK(is_eps_superlinear(concave, 0, 16, 0.0));
  CHECK_FALSE(is_eps_linear(concave, 0, 16, 0.1));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(21, 0.0);
    for (int i = 1; i <= 20; ++i) w[i] = w[i - 1] + static_cast<double>(rng() % 2001) / 1000.0;
    const auto f = profile(w);
    const int a = static_cast<int>(rng() % 20);
    const int b = a + 1 + static_cast<int>(rng() % (20 - a));
    CHECK(is_eps_linear(f, a, b, 2.0));
    CHECK(is_eps_superlinear(f, a, b, 2.0));
    CHECK(is_eps_superlinear(f, a, b, 0.1) == (oracle::admissible(w, a, b, -1e9, 0.1)));
  }
}

TEST_CASE("decompose closed forms") {
  auto d = decompose(linear_profile(32, 1.2), 0.5, 1.2, 0.05);
  REQUIRE(d.intervals.size() == 1);
  CHECK(d.intervals[0].c == 0);
  CHECK(d.intervals[0].d == 32);
  CHECK(d.intervals[0].kind == Alternative::linear);
  CHECK(d.intervals[0].slope == doctest::Approx(1.2));
  CHECK(d.tau == doctest::Approx(1.0));
  CHECK(d.gap_length == 0);

  // Slope exactly s: the linear label wins.
  d = decompose(linear_profile(32, 0.5), 0.5, 0.52, 0.05);
  REQUIRE(d.intervals.size() == 1);
  CHECK(d.intervals[0].kind == Alternative::linear);

  // Two regimes: concave, so the whole range is superlinear with chord 1.1.
  const auto f = two_regime(64);
  d = decompose(f, 0.5, 1.1, 0.05);
  REQUIRE(d.intervals.size() == 1);
  CHECK(d.intervals[0].kind == Alternative::superlinear);
  CHECK(d.intervals[0].slope == doctest::Approx(1.1));
  CHECK(d.covered_length() == oracle::best_cover(f.values, 0.5, 0.05));
  const auto sd = scales_from_decomposition(d, Scale{1}, 0.05);
  CHECK(sd.verified());
  CHECK(sd.n() == 1);
  CHECK(sd.clauses[2].lhs == doctest::Approx(1.1 * 64));

  // Flat then steep: the flat start is a gap.
  std::vector<double> v(33, 0.0);
  for (int i = 9; i <= 32; ++i) v[i] = v[i - 1] + 1.5;
  d = decompose(profile(v), 0.5, 1.1, 0.05);
  CHECK(d.gap_length == 8);
  CHECK(d.covered_length() == oracle::best_cover(v, 0.5, 0.05));
  CHECK(d.k_st == doctest::Approx(8 / (0.05 * 32)));

  try {
    decompose(profile({0.0, 3.0, 0.0}), 0.8, 0.5, 0.1);
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    CHECK(e.problems().size() == 3);  // s >= t, Lipschitz, f(m) too small
  }
}

TEST_CASE("decompose against the DP oracle") {
  std::mt19937_64 rng(5);
  int checked = 0;
  while (checked < 40) {
    const auto p = random_branching_profile(64, 0.5, 0.05, rng);
    if (!p) continue;
    ++checked;
    const auto& f = p->f;
    const auto d = decompose(f, 0.5, p->t, 0.05);
    CHECK(d.covered_length() >= oracle::best_cover(f.values, 0.5, 0.05) - 1);
    int prev = 0;
    for (const auto& iv : d.intervals) {
      CHECK(iv.c >= prev);
      prev = iv.d;
      CHECK(iv.slope >= 0.5 - 1e-9);
      CHECK(is_eps_superlinear(f, iv.c, iv.d, 0.05));
      if (iv.kind == Alternative::linear) CHECK(is_eps_linear(f, iv.c, iv.d, 0.05));
      CHECK(iv.length() >= d.tau * 64 - 1e-9);
    }
  }
}

TEST_CASE("scales_from_decomposition") {
  Decomposition d;
  d.m = 10;
  d.s = 0.5;
  d.t = 1.0;
  d.eps = 0.1;
  d.intervals = {{1, 9, Alternative::linear, 1.2}};
  d.tau = 0.8;
  d.gap_length = 2;
  const auto sd = scales_from_decomposition(d, Scale{2}, 0.2);
  REQUIRE(sd.n() == 3);
  CHECK(sd.classes[0] == ScaleClass::bad);
  CHECK(sd.classes[1] == ScaleClass::structured);
  CHECK(sd.classes[2] == ScaleClass::bad);
  CHECK(sd.levels == std::vector<int>{0, 1, 9, 10});
  CHECK(sd.scale(2) == Scale{18});
  CHECK(sd.delta() == Scale{20});
  CHECK(sd.log_ratio(2) == doctest::Approx(16 * std::log(2.0)));

  // Same intervals with a tighter eps: the bad mass 2 > 0.1 * 10.
  try {
    scales_from_decomposition(d, Scale{2}, 0.1);
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    REQUIRE(e.problems().size() == 1);
    CHECK(e.problems()[0].rfind("(1b)", 0) == 0);
  }

  // Clause (3) fails when the structured exponents are too small.
  d.intervals[0].slope = 0.6;
  CHECK_THROWS_AS(scales_from_decomposition(d, Scale{2}, 0.2), DecompositionError);
}

TEST_CASE("multiscale_bound") {
  Decomposition d;
  d.m = 12;
  d.s = 0.5;
  d.t = 1.0;
  d.eps = 0.5;
  d.intervals = {{0, 4, Alternative::linear, 1.5}, {5, 12, Alternative::superlinear, 1.0}};
  d.tau = 4.0 / 12;
  d.gap_length = 1;
  const auto sd = scales_from_decomposition(d, Scale{1}, 0.5);
  MultiscaleParams p{2.0, 1.0, 0.01, 0.02, 0.1};
  CHECK_THROWS_AS(multiscale_bound(sd, 100, p), std::invalid_argument);

  const auto none_good = classify(sd, 10.0);
  const auto first_good = classify(sd, 1.2);
  CHECK(none_good.classes[0] == ScaleClass::normal);
  CHECK(first_good.classes[0] == ScaleClass::good);
  CHECK(first_good.classes[2] == ScaleClass::normal);  // not regular

  const double log_inv = 12 * std::log(2.0);
  const double expected = std::pow(log_inv, -2.0) * 100 * std::exp(-0.01 * log_inv) *
                          std::exp((0.5 - 0.02) * log_inv) * 0.5;  // one bad level
  CHECK(multiscale_bound(none_good, 100, p) == doctest::Approx(expected));
  // Enlarging G never decreases the bound, enlarging B never increases it.
  CHECK(multiscale_bound(first_good, 100, p) >= multiscale_bound(none_good, 100, p));
  auto more_bad = none_good;
  more_bad.classes[2] = ScaleClass::bad;
  CHECK(multiscale_bound(more_bad, 100, p) <= multiscale_bound(none_good, 100, p));

  MultiscaleParams missing{2.0, std::nullopt, 0.01, 0.02, 0.1};
  CHECK_THROWS_AS(multiscale_bound(none_good, 100, missing), std::invalid_argument);
}

TEST_CASE("refine_cover on one coarse tube per point") {
  std::vector<Cube> pts;
  std::vector<std::vector<Tube>> fans;
  double c1 = 0;
  for (int i = 0; i < 4; ++i) {
    const Cube p{10, 0, i * 32 + 16};
    std::vector<Tube> fan;
    for (std::int64_t a = 0; a < 8; ++a) fan.push_back(tube_through(p, a, 10));
    c1 = std::max(c1, check_tube_spread(fan, Scale{10}, 0.5, 1.0).c_star);
    pts.push_back(p);
    fans.push_back(fan);
  }
  const auto r = refine_cover(pts, fans, Scale{10}, Scale{5}, 0.5, c1, 8);
  CHECK(r.kept.size() == 4);
  CHECK(r.coarse_tubes.size() == 4);
  CHECK(r.tube_exponent == 3);
  CHECK(r.point_exponent == 0);
  CHECK(r.h == doctest::Approx(8.0));
  CHECK(r.h_ratio == doctest::Approx(8.0));
  CHECK(r.mass_retention() == doctest::Approx(1.0));
  CHECK(r.tubes_of == fans);
  for (const auto& e : r.ledger) CHECK(e.mass_after == e.mass_before);

  CHECK_THROWS_AS(refine_cover(pts, fans, Scale{10}, Scale{5}, 0.5, c1 / 2, 8), RefinementError);
  CHECK_THROWS_AS(refine_cover(pts, fans, Scale{10}, Scale{5}, 0.5, c1, 20), RefinementError);
  CHECK_THROWS_AS(refine_cover(pts, fans, Scale{10}, Scale{11}, 0.5, c1, 8), RefinementError);
}

TEST_CASE("refine_cover ledger on nice_random") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto cfg = nice_random(Scale{10}, 0.5, 0.8, 4.0, 32, seed);
    const auto r = refine_cover(cfg.points, cfg.tubes_of, cfg.delta, Scale{5}, 0.5, 4.0, 32);
    CHECK(r.pass());
    REQUIRE(r.ledger.size() == 5);
    const double log_inv = Scale{5}.log_inverse();
    std::int64_t prev = r.ledger.front().mass_before;
    for (const auto& e : r.ledger) {
      CHECK(e.mass_before == prev);
      prev = e.mass_after;
      CHECK(e.mass_after * e.budget >= e.mass_before);
      CHECK(e.budget <= 4 * log_inv);
    }
    CHECK(8 * r.min_tube_incidences() >= r.h);

    // Direct recount of the incidences inside each coarse tube.
    for (std::size_t i = 0; i < r.coarse_tubes.size(); ++i) {
      std::int64_t n = 0;
      for (const auto& fam : r.tubes_of)
        for (const auto& t : fam) n += parent_at(t, Scale{5}) == r.coarse_tubes[i];
      CHECK(n == r.tube_incidences[i]);
    }
  }
}

TEST_CASE("refine_cover fixes the naive cover of the counterexample") {
  const auto ce = cover_counterexample();
  CHECK(validate(ce.cfg).empty());
  CHECK(ce.c1 == doctest::Approx(1.0));
  CHECK(ce.cfg.nice->m == 144);

  const auto naive = naive_cover(ce.cfg.tubes_of, ce.coarse);
  const auto unrefined = check_tube_spread(naive, ce.coarse, 0.5, ce.c1);
  CHECK(naive.size() == 512);
  CHECK(unrefined.c_star == doctest::Approx(2.0));
  CHECK_FALSE(unrefined.pass);

  const auto r = refine_cover(ce.cfg.points, ce.cfg.tubes_of, ce.cfg.delta, ce.coarse, 0.5,
                              ce.c1, ce.cfg.nice->m);
  const auto refined = check_tube_spread(r.coarse_tubes, ce.coarse, 0.5, ce.c1);
  CHECK(r.coarse_tubes.size() == 256);
  CHECK(refined.c_star == doctest::Approx(1.0));
  CHECK(refined.pass);
  CHECK(r.pass());
  CHECK(r.mass_retention() == doctest::Approx(128.0 / 144.0));
}

TEST_CASE("refine_two_scale") {
  const auto cfg = nice_random(Scale{10}, 0.5, 1.0, 4.0, 32, 7);
  const auto r = refine_two_scale(cfg, Scale{5});
  CHECK(r.pass());
  REQUIRE(r.clauses.size() == 5);
  CHECK(r.lhs == doctest::Approx(static_cast<double>(cfg.tube_family().size()) / 32));
  CHECK(validate(r.coarse_cfg).empty());
  REQUIRE(r.per_square.size() == r.coarse_cfg.points.size());
  for (const auto& local : r.per_square) {
    CHECK(local.delta == Scale{5});
    CHECK(validate(local).empty());
  }
  // Refined families are subfamilies, and every kept point sits in a kept square.
  for (std::size_t a = 0; a < r.kept.size(); ++a) {
    const auto& orig = cfg.tubes_of[r.kept[a]];
    for (const auto& t : r.tubes_of[a]) CHECK(std::binary_search(orig.begin(), orig.end(), t));
    const auto q = parent_at(cfg.points[r.kept[a]], Scale{5});
    CHECK(std::find(r.coarse_cfg.points.begin(), r.coarse_cfg.points.end(), q) !=
          r.coarse_cfg.points.end());
  }

  const auto threaded = refine_two_scale(cfg, Scale{5}, 5.0, 3);
  CHECK(threaded.kept == r.kept);
  CHECK(threaded.tubes_of == r.tubes_of);
  CHECK(threaded.rhs == r.rhs);

  // Degenerate coarse scales.
  const auto whole = refine_two_scale(cfg, Scale{0});
  CHECK(whole.pass());
  CHECK(whole.per_square.size() == 1);
  const auto fine = refine_two_scale(cfg, Scale{10});
  CHECK(fine.pass());
  CHECK(fine.kept.size() == cfg.points.size());
  for (const auto& local : fine.per_square) CHECK(local.nice->m == 1);
  CHECK(fine.rhs == doctest::Approx(fine.lhs));

  Configuration bare = cfg;
  bare.nice.reset();
  CHECK_THROWS_AS(refine_two_scale(bare, Scale{5}), RefinementError);
}

namespace {

// A product of three 8-point index sets at Delta = 2^-6, with alternate fans
// of 8 slopes, lifted into the standard tube {slope in [0, Delta), b in
// [0, Delta)} at delta = 2^-12: the square along the tube is the row, the
// delta-offset across it the column. The lifted fans share one Delta slope
// cell, so they are not spread at delta and the lift is not validated.
struct Lifted {
  Configuration cfg;
  std::vector<Cube> product;
  std::vector<std::vector<Tube>> fans;
};

Lifted lifted_product() {
  Lifted out;
  const int h = 6;
  out.cfg.delta = Scale{2 * h};
  for (std::int64_t j = 0; j < 8; ++j) {
    for (std::int64_t i = 0; i < 8; ++i) {
      const Cube pp{h, 32 + 4 * i, 8 * j};
      std::vector<Tube> fan, lifted;
      const Cube p{2 * h, pp.iy * 64 + 32, pp.ix};
      for (std::int64_t a = 0; a < 32; a += 4) {
        fan.push_back(tube_through(pp, a, h, Orientation::alternate));
        lifted.push_back(tube_through(p, a, 2 * h, Orientation::standard));
      }
      out.product.push_back(pp);
      out.fans.push_back(fan);
      out.cfg.points.push_back(p);
      out.cfg.tubes_of.push_back(sorted_unique(lifted));
    }
  }
  out.cfg.nice = Niceness{0.5, 4.0, 8, 1.0};
  return out;
}

}  // namespace

TEST_CASE("dichotomy_check") {
  const auto cfg = regular_random(Scale{12}, 0.5, 1.0, 4.0, 4.0, 64, 1);
  const auto r = dichotomy_check(cfg, 0.05);
  CHECK(r.coarse_count <= r.fine_count);
  CHECK(r.fine_exponent == doctest::Approx(std::log(double(r.fine_count)) / (12 * std::log(2.0))));
  CHECK(r.fine_threshold == doctest::Approx(std::pow(2.0, 12 * 1.05)));
  CHECK(r.coarse_threshold == doctest::Approx(std::pow(2.0, 12 * 0.55)));
  CHECK(r.branch_fine == (double(r.fine_count) >= r.fine_threshold * (1 - 1e-9)));
  CHECK(r.any() == (r.branch_fine || r.branch_coarse));
  CHECK(r.any());

  auto bare = cfg;
  bare.nice->t.reset();
  CHECK_THROWS_AS(dichotomy_check(bare, 0.05), std::invalid_argument);
  auto odd = nice_random(Scale{11}, 0.5, 1.0, 4.0, 32, 1);
  CHECK_THROWS_AS(dichotomy_check(odd, 0.05), std::invalid_argument);
}

TEST_CASE("extract_product_structure recovers a lifted product") {
  const auto lifted = lifted_product();
  ExtractionOptions opt;
  opt.eps = 0.05;  // heavy threshold 2^3
  const auto r = extract_product_structure(lifted.cfg, opt);
  INFO(r.failed_stage << ": " << r.detail);
  REQUIRE(r.ok);
  CHECK(r.heavy_squares == 8);
  CHECK(r.typical_squares == 8);
  REQUIRE(r.tube);
  CHECK(*r.tube == Tube{Cube{6, 0, 0}, Orientation::standard});
  CHECK(r.product.delta == Scale{6});

  std::map<Cube, std::vector<Tube>> want, got;
  for (std::size_t i = 0; i < lifted.product.size(); ++i) want[lifted.product[i]] = lifted.fans[i];
  for (std::size_t i = 0; i < r.product.points.size(); ++i) got[r.product.points[i]] = r.product.tubes_of[i];
  CHECK(got == want);
  CHECK(validate(r.product).empty());
  CHECK(r.min_fan == 8);
  CHECK(r.max_fan == 8);
  CHECK(r.fan_target == doctest::Approx(8.0));
  CHECK(r.properties_hold);
  CHECK(r.dual_directions.size() == 8);
  CHECK(r.dual_covers.size() == 8);
  CHECK(r.dual_exponent >= 0.0);
  CHECK(r.dual_exponent <= 1.0 + 1e-9);
}

TEST_CASE("extract_product_structure failure stages") {
  // One point per square: nothing is heavy.
  Configuration sparse;
  sparse.delta = Scale{8};
  for (std::int64_t i = 0; i < 16; ++i) {
    const Cube p{8, 16 * i + 3, 16 * ((5 * i) % 16) + 7};
    sparse.points.push_back(p);
    sparse.tubes_of.push_back({tube_through(p, 0, 8, Orientation::standard),
                               tube_through(p, 128, 8, Orientation::standard)});
  }
  sparse.nice = Niceness{0.5, 4.0, 2, 1.0};
  const auto r = extract_product_structure(sparse);
  CHECK_FALSE(r.ok);
  CHECK(r.failed_stage == "heavy squares");
  CHECK(r.detail.find("largest square holds 1") != std::string::npos);

  auto bare = sparse;
  bare.nice.reset();
  CHECK_THROWS_AS(extract_product_structure(bare), std::invalid_argument);
}

TEST_CASE("extract_product_structure on random nice configurations") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto cfg = nice_random(Scale{12}, 0.5, 1.0, 4.0, 64, seed);
    ExtractionOptions opt;
    opt.eps = 0.05;
    const auto r = extract_product_structure(cfg, opt);
    if (!r.ok) {
      CHECK(!r.failed_stage.empty());
      continue;
    }
    CHECK(r.tube_squares >= 1);
    CHECK(r.product.points.size() == r.product.tubes_of.size());
    for (const auto& fan : r.product.tubes_of) {
      for (const auto& t : fan) CHECK(t.orientation == Orientation::alternate);
    }
  }
}

namespace {

// Every point of the 2^-k grid with every standard slope through it.
Configuration full_fan(int k, double s, double t) {
  Configuration cfg;
  cfg.delta = Scale{k};
  const std::int64_t n = std::int64_t{1} << k;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const Cube p{k, i, j};
      std::vector<Tube> fan;
      for (std::int64_t a = 0; a < n; ++a) fan.push_back(tube_through(p, a, k));
      cfg.points.push_back(p);
      cfg.tubes_of.push_back(sorted_unique(fan));
    }
  }
  cfg.nice = Niceness{s, 4.0, n, t};
  return cfg;
}

}  // namespace

TEST_CASE("saturated inputs") {
  const auto cfg = full_fan(4, 0.5, 2.0);
  const auto d = dichotomy_check(cfg, 0.05);
  CHECK(d.fine_count >= 256);
  CHECK(d.branch_fine);

  const auto r = extract_product_structure(cfg);
  INFO(r.failed_stage << ": " << r.detail);
  REQUIRE(r.ok);
  CHECK(r.heavy_squares == 16);
  CHECK(r.typical_squares == 16);
  // The tube is a strip of slopes, so points near its edges project
  // slightly outside [0, 1); the 4 x 4 product is in any case covered.
  for (std::int64_t x = 0; x < 4; ++x)
    for (std::int64_t y = 0; y < 4; ++y)
      CHECK(std::count(r.product.points.begin(), r.product.points.end(), Cube{2, x, y}) == 1);
}
