#pragma once

// Covering numbers, (delta,s,C)-set and regularity checks, uniformization and
// branching functions.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "incidence/dyadic.hpp"

namespace incidence {

/// Outcome of a non-concentration check. c_star is the smallest constant C
/// for which the set passes:
///   c_star = max over dyadic r in [delta,1] and r-cubes Q of |P cap Q| / (r^s |P|).
/// Only dyadic r and dyadic r-cubes are enumerated.
struct SpreadReport {
  bool pass = false;
  double c_star = 0.0;
  double s = 0.0;
  double c = 0.0;
  Scale witness_scale;
  Cube witness_cube;
  std::size_t size = 0;  // |P|_delta
};

/// Number of distinct rho-parents. Throws if rho is finer than some cube.
std::size_t covering_number(std::span<const Cube> cubes, Scale rho);
std::size_t covering_number(std::span<const Tube> tubes, Scale rho);

/// P must be non-empty and all cubes of scale delta.
SpreadReport check_spread(std::span<const Cube> points, Scale delta, double s, double c);
/// Same check on the parameter cubes (orientation kept as part of the key).
SpreadReport check_tube_spread(std::span<const Tube> tubes, Scale delta, double s, double c);

struct RegularReport {
  bool pass = false;
  SpreadReport spread;
  std::size_t half_scale_count = 0;  // |P|_{delta^{1/2}}
  double half_scale_bound = 0.0;     // K delta^{-s/2}
};

/// Requires an even scale exponent.
RegularReport check_regular(std::span<const Cube> points, Scale delta, double s, double c,
                            double k);

struct BetweenScalesReport {
  bool pass = true;
  double worst_c_star = 0.0;
  struct Entry {
    Cube coarse_cube;
    SpreadReport spread;
    std::optional<RegularReport> regular;
  };
  std::vector<Entry> per_cube;
};

/// For every Q in D_coarse(P), rescales P cap Q to [0,1)^2 and checks it is a
/// (delta/coarse, s, C)-set (and (s,C,K)-regular when k is given).
BetweenScalesReport check_between_scales(std::span<const Cube> points, Scale delta, Scale coarse,
                                         double s, double c, std::optional<double> k = {});

enum class UniformMode {
  banded,  // child counts share one dyadic band [2^(e-1), 2^e)
  exact,   // child counts trimmed to exactly 2^(e-1)
};

struct UniformizeResult {
  std::vector<Cube> kept;
  /// For each level j = 1..n (index j-1): the band exponent e_j.
  std::vector<int> band;
  /// Mass (number of finest cubes) after processing each level, finest first.
  std::vector<std::size_t> mass_after;
};

/// Bottom-to-top pigeonholing. `scales` lists Delta_1 > ... > Delta_n with
/// Delta_n equal to the scale of the points; Delta_0 = 1 is implicit.
/// Ties between bands of equal retained mass keep the larger band; exact mode
/// trims children in lexicographic (ix, iy) order.
UniformizeResult uniformize(std::span<const Cube> points, std::span<const Scale> scales,
                            UniformMode mode = UniformMode::banded);

class NonUniformError : public std::runtime_error {
 public:
  NonUniformError(int level, std::int64_t a, std::int64_t b);
  int level() const { return level_; }

 private:
  int level_;
};

/// Piecewise-linear branching profile on [0, m]:
///   f(j) = sum_{i<=j} log(N_i) / log(1/Delta), interpolated linearly.
struct BranchingFunction {
  Scale base;  // Delta
  std::vector<std::int64_t> branching;  // N_1..N_m; empty for synthetic profiles
  std::vector<double> values;           // f(0..m)

  int levels() const { return static_cast<int>(values.size()) - 1; }
  double operator()(double x) const;
  /// Slope of the chord between a and b.
  double chord_slope(double a, double b) const;

  static BranchingFunction from_values(Scale base, std::vector<double> values);
};

/// P must be (Delta^i)_{i=1}^m-uniform at scale Delta^m; throws
/// NonUniformError naming the first violating level otherwise.
BranchingFunction branching_function(std::span<const Cube> points, Scale base, int m);

/// Least-squares fit of log N_rho against log(1/rho) over dyadic rho from
/// `coarsest` down to `finest`.
struct DimensionFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::pair<int, std::size_t>> counts;  // (j, N at rho = 2^-j)
};

DimensionFit box_dimension(std::span<const Cube> points, Scale finest, Scale coarsest);

}  // namespace incidence
