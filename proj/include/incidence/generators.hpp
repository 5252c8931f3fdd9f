#pragma once

// Constructions of point sets and nice configurations. Every generator
// certifies its output and throws GenerationError when it cannot.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "incidence/dyadic.hpp"
#include "incidence/incidence.hpp"
#include "incidence/projections.hpp"
#include "incidence/spread.hpp"

namespace incidence {

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& generator, const std::string& diagnostics);
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Number of seeded attempts a randomized generator makes before giving up.
inline constexpr int kRetryBudget = 64;

/// Digit-restricted Cantor set: binary digits are read in blocks of B, and
/// each block takes one of 2^kept admissible patterns.
struct CantorSet {
  int k = 0;
  int block = 1;
  int kept = 1;
  std::vector<std::int64_t> members;  // sorted indices of 2^-k intervals

  double dimension() const { return static_cast<double>(kept) / block; }
  /// The intervals as cubes on the row y = 0.
  std::vector<Cube> as_row() const;
};

/// B in [1, 8] minimising |ceil(sB)/B - s|, smallest B on ties.
int cantor_block_length(double s);

/// s in [0, 1]. Without a seed the admissible patterns are those whose last
/// B - ceil(sB) digits vanish; with a seed each block level draws its own
/// random pattern set.
CantorSet cantor1d(double s, Scale delta, std::optional<std::uint64_t> seed = {});

struct CantorTarget {
  std::vector<Cube> cubes;
  CantorSet radii;   // at scale 2 delta, mapped to r = (1 + v) / 2
  CantorSet angles;  // mapped to theta = (pi / 2) u
  DimensionFit fit;  // rho in [delta, delta^{1/4}]
};

/// The cubes containing r (cos theta, sin theta) for r, theta at the
/// midpoints of the radius and angle intervals.
CantorTarget cantor_target(double s, double t, Scale delta);

/// m distinct slope indices in [0, 2^k) forming a spread set: ceil(log2 m)
/// free digits spaced evenly and as early as possible, the others fixed by a
/// random offset, then a random subset of size m.
std::vector<std::int64_t> spread_slopes(int k, std::size_t m, std::mt19937_64& rng);

/// (delta, s, C, M)-nice configuration on a seeded (delta, t, C)-set built as
/// a product of two seeded Cantor sets of dimension t/2.
Configuration nice_random(Scale delta, double s, double t, double c, std::int64_t m,
                          std::uint64_t seed);

/// Like nice_random, with P additionally (delta, t, C, K)-regular. The
/// lopsided variant puts every free digit in the coarse half of the scales,
/// which check_regular rejects; it is returned without certification.
Configuration regular_random(Scale delta, double s, double t, double c, double k_reg,
                             std::int64_t m, std::uint64_t seed, bool lopsided = false);

struct ProductStructure {
  Configuration cfg;  // alternate-orientation tubes x = a y + b
  CantorSet x;        // horizontal factor, dimension s
  CantorSet y;        // vertical factor, dimension t - s
  std::vector<std::int64_t> slopes;
  double budget = 0.0;             // (log 1/Delta)^2
  SpreadReport row_spread;         // one row X x {y}, at (Delta, s)
  SpreadReport column_spread;      // Y at (Delta, t - s)
  std::size_t min_fan = 0, max_fan = 0;
  double fan_target = 0.0;         // Delta^-s
  double family_ratio = 0.0;       // |T| / Delta^-2s
  bool properties_hold = false;
};

/// P = X x Y with one shared spread slope set S: T(p) holds the tubes of
/// slope in S through p.
ProductStructure product_structure(Scale big_delta, double s, double t, std::uint64_t seed,
                                   double c = 4.0);

/// Points stacked in one column, each with a heavy fan (16 coarse slope
/// cells, 8 tubes each) and 16 single tubes whose slopes share one
/// 2^-4 slope interval. Every T(p) is spread at s = 1/2, but across points
/// the single tubes fill one parameter cell of the coarse cover.
struct CoverCounterexample {
  Configuration cfg;  // delta = 2^-12
  Scale coarse;       // Delta = 2^-8
  double c1 = 0.0;    // max over p of the (delta, 1/2) constant of T(p)
};

CoverCounterexample cover_counterexample();

struct PointLineInstance {
  std::vector<Point> points;
  std::vector<Line> lines;
};

/// Points of the integer grid {0..g-1}^2 and standard lines y = a x + b with
/// integer a in [-2, 2] and b in [-2g, 3g), drawn with repetition.
PointLineInstance random_point_line_instance(std::size_t n_points, std::size_t n_lines, int g,
                                             std::mt19937_64& rng);

struct RandomProfile {
  BranchingFunction f;  // on Scale{1}
  double t = 0.0;
};

/// Non-decreasing 2-Lipschitz profile on [0, m] from 1 to 5 random linear
/// regimes plus noise of at most 0.1 per unit step. t is the least exponent
/// with f(m) - f(x) <= t (m - x) + eps m for all x. Empty when t <= s or
/// f(m) < (t - eps) m.
std::optional<RandomProfile> random_branching_profile(int m, double s, double eps,
                                                      std::mt19937_64& rng);

struct ExceptionalConfig {
  std::vector<Cube> k_set;
  int x_bits = 0;  // K = {(i 2^-x_bits, j 2^-y_bits)}
  int y_bits = 0;
  SpreadReport k_spread;
  SurveyReport survey;
  std::vector<Direction> directions;  // the exceptional ones
  std::vector<std::size_t> covers;    // tubes per direction
  double realized_alpha = 0.0;
  double incidence_lower_bound = 0.0;  // |E| |K|
};

/// A (delta, t)-lattice whose exceptional set under the delta^-s threshold
/// has exponent within `tolerance` of alpha. Throws when no lattice does.
ExceptionalConfig exceptional_projection_config(double s, double t, double alpha, Scale delta,
                                                std::uint64_t seed, double tolerance = 0.1,
                                                int threads = 1);

}  // namespace incidence
