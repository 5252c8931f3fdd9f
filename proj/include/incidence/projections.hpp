#pragma once

// Projections in slope form, exceptional-direction surveys and the direction
// sets of tube families.
//
// A direction is a dyadic slope sigma in [-1, 1). The standard form projects
// (x, y) to x + sigma y, the swapped form to y + sigma x. Up to the factor
// sqrt(1 + sigma^2) <= sqrt(2) this is the orthogonal projection onto
// (1, sigma) or (sigma, 1).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "incidence/dyadic.hpp"
#include "incidence/spread.hpp"

namespace incidence {

struct Direction {
  std::int64_t num = 0;  // sigma = num 2^-exp
  int exp = 0;
  bool swapped = false;

  double slope() const;
  double angle() const;  // in [0, pi)
  constexpr auto operator<=>(const Direction&) const = default;
};

std::string to_string(const Direction& d);

/// Directions of resolution rho: standard sigma = i rho for i in [-1/rho, 1/rho),
/// swapped for i in (-1/rho, 1/rho). Every direction of [0, pi) appears once.
struct DirectionGrid {
  Scale resolution;
  std::vector<Direction> directions() const;
};

/// Sorted rho-cells (indices of [i rho, (i+1) rho)) met by the projections
/// of the cubes. Each cube projects to its exact half-open image interval.
std::vector<std::int64_t> projection_cells(std::span<const Cube> points, const Direction& e,
                                           Scale rho);
std::size_t projection_covering(std::span<const Cube> points, const Direction& e, Scale rho);

struct SurveyReport {
  std::vector<Direction> grid;
  std::vector<std::size_t> covers;  // parallel to grid
  std::vector<bool> exceptional;    // covers < threshold
  double threshold = 0.0;           // delta^-s
  std::size_t exceptional_count = 0;
  double exponent = 0.0;            // log|E| / log(1/delta), 0 when E is empty
  double kaufman = 0.0;
  std::optional<double> oberlin;
  std::optional<double> conjecture;
};

/// E = {e : |pi_e(P)|_delta < delta^-s} over the grid. t, when given, adds the
/// Oberlin threshold t/2 and the conjectured max{2s-t, 0} to the report.
SurveyReport exceptional_survey(std::span<const Cube> points, double s, Scale delta,
                                const DirectionGrid& grid, std::optional<double> t = {},
                                int threads = 1);

/// Σ(Q): distinct slope cells at the scale of Q among the tubes, coarsened to
/// that scale, meeting Q.
struct DirectionSet {
  Cube q;
  std::vector<Tube> directions;  // parameter cubes at Q's scale, intercept index 0
  SpreadReport spread;
};

/// Throws GeometryError if no tube meets Q.
DirectionSet direction_set(const Cube& q, std::span<const Tube> tubes, double s, double c);

/// Direction along which a tube of the given slope cell runs, at the cell's
/// resolution, as a projection direction that collapses that tube.
Direction collapsing_direction(const Tube& slope_cell);

struct PruneReport {
  std::vector<Tube> kept;
  std::vector<Tube> pruned;
  std::vector<double> c_star;  // parallel to the input directions
  double survival = 0.0;
  bool pass = false;  // survival >= min_fraction
};

/// Keeps directions sigma for which the projection of P cap Q, rescaled to
/// the unit square, passes check_spread at Q's scale with (s, C).
PruneReport prune_bad_directions(const Cube& q, std::span<const Tube> directions,
                                 std::span<const Cube> points, double s, double c,
                                 double min_fraction = 0.5);

}  // namespace incidence
