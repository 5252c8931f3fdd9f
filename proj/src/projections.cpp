#include "incidence/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace incidence {

namespace {

using i128 = __int128;

i128 pow2(int e) { return static_cast<i128>(1) << e; }

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

i128 ceil_div(i128 a, i128 b) { return -floor_div(-a, b); }

}  // namespace

double Direction::slope() const { return std::ldexp(static_cast<double>(num), -exp); }

double Direction::angle() const {
  const double a = swapped ? std::atan2(1.0, slope()) : std::atan2(slope(), 1.0);
  return a < 0 ? a + std::numbers::pi : a;
}

std::string to_string(const Direction& d) {
  return std::string(d.swapped ? "swapped:" : "standard:") + std::to_string(d.num) + "/2^" +
         std::to_string(d.exp);
}

std::vector<Direction> DirectionGrid::directions() const {
  const std::int64_t n = std::int64_t{1} << resolution.k;
  std::vector<Direction> out;
  out.reserve(static_cast<std::size_t>(4 * n));
  for (std::int64_t i = -n; i < n; ++i) out.push_back({i, resolution.k, false});
  for (std::int64_t i = -n + 1; i < n; ++i) out.push_back({i, resolution.k, true});
  return out;
}

std::vector<std::int64_t> projection_cells(std::span<const Cube> points, const Direction& e,
                                           Scale rho) {
  // Intervals in units of 2^-(k + exp), then converted to rho-cell ranges.
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  ranges.reserve(points.size());
  const i128 n = e.num;
  for (const auto& c : points) {
    const i128 u = e.swapped ? c.iy : c.ix;
    const i128 w = e.swapped ? c.ix : c.iy;
    const i128 side = pow2(e.exp);
    const i128 lo = n >= 0 ? u * side + n * w : u * side + n * (w + 1);
    const i128 hi = n >= 0 ? lo + side + n : (u + 1) * side + n * w;
    const int unit = c.k + e.exp;
    const i128 first = floor_div(lo * pow2(rho.k), pow2(unit));
    const i128 last = ceil_div(hi * pow2(rho.k), pow2(unit)) - 1;
    ranges.emplace_back(static_cast<std::int64_t>(first), static_cast<std::int64_t>(last));
  }
  if (ranges.empty()) return {};
  std::int64_t lo_cell = ranges.front().first, hi_cell = ranges.front().second;
  for (const auto& [first, last] : ranges) {
    lo_cell = std::min(lo_cell, first);
    hi_cell = std::max(hi_cell, last);
  }
  std::vector<std::int64_t> cells;
  const i128 extent = static_cast<i128>(hi_cell) - lo_cell + 1;
  if (extent <= std::max<i128>(1 << 20, 16 * static_cast<i128>(ranges.size()))) {
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(extent), 0);
    for (const auto& [first, last] : ranges)
      for (std::int64_t i = first; i <= last; ++i) hit[static_cast<std::size_t>(i - lo_cell)] = 1;
    for (std::size_t i = 0; i < hit.size(); ++i)
      if (hit[i]) cells.push_back(lo_cell + static_cast<std::int64_t>(i));
    return cells;
  }
  std::sort(ranges.begin(), ranges.end());
  std::int64_t next = std::numeric_limits<std::int64_t>::min();
  for (const auto& [first, last] : ranges) {
    for (std::int64_t i = std::max(first, next); i <= last; ++i) cells.push_back(i);
    next = std::max(next, last + 1);
  }
  return cells;
}

std::size_t projection_covering(std::span<const Cube> points, const Direction& e, Scale rho) {
  return projection_cells(points, e, rho).size();
}

SurveyReport exceptional_survey(std::span<const Cube> points, double s, Scale delta,
                                const DirectionGrid& grid, std::optional<double> t, int threads) {
  SurveyReport r;
  r.grid = grid.directions();
  r.covers.assign(r.grid.size(), 0);
  r.threshold = std::pow(delta.value(), -s);

  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, r.grid.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < r.grid.size(); i += workers) {
        r.covers[i] = projection_covering(points, r.grid[i], delta);
      }
    });
  }
  for (auto& th : pool) th.join();

  r.exceptional.resize(r.grid.size());
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    r.exceptional[i] = static_cast<double>(r.covers[i]) < r.threshold;
    r.exceptional_count += r.exceptional[i] ? 1 : 0;
  }
  r.exponent = r.exceptional_count > 0
                   ? std::log(static_cast<double>(r.exceptional_count)) / delta.log_inverse()
                   : 0.0;
  r.kaufman = s;
  if (t) {
    r.oberlin = *t / 2.0;
    r.conjecture = std::max(2.0 * s - *t, 0.0);
  }
  return r;
}

namespace {

Cube direction_key(const Tube& d) {
  const int k = d.param.k;
  return Cube{k, d.param.ix, d.orientation == Orientation::alternate ? std::int64_t{1} << k : 0};
}

}  // namespace

DirectionSet direction_set(const Cube& q, std::span<const Tube> tubes, double s, double c) {
  DirectionSet out;
  out.q = q;
  for (const auto& t : tubes) {
    const Tube coarse = parent_at(t, q.scale());
    if (tube_meets_cube(coarse, q)) {
      out.directions.push_back(Tube{{q.k, coarse.param.ix, 0}, t.orientation});
    }
  }
  out.directions = sorted_unique(std::move(out.directions));
  if (out.directions.empty()) throw GeometryError("direction_set: no tube meets " + to_string(q));
  std::vector<Cube> keys;
  keys.reserve(out.directions.size());
  for (const auto& d : out.directions) keys.push_back(direction_key(d));
  out.spread = check_spread(keys, q.scale(), s, c);
  return out;
}

Direction collapsing_direction(const Tube& slope_cell) {
  // y = a x + b is constant under y - a x, which is the swapped form with
  // sigma = -a; x = a y + b likewise in the standard form.
  return Direction{-slope_cell.param.ix, slope_cell.param.k,
                   slope_cell.orientation == Orientation::standard};
}

PruneReport prune_bad_directions(const Cube& q, std::span<const Tube> directions,
                                 std::span<const Cube> points, double s, double c,
                                 double min_fraction) {
  PruneReport r;
  const Homothety h{q};
  std::vector<Cube> local;
  for (const auto& p : points) {
    if (h.contains(p)) local.push_back(h.apply(p));
  }
  for (const auto& d : directions) {
    double c_star = INFINITY;
    if (!local.empty()) {
      const Scale rho{local.front().k};
      const auto cells = projection_cells(local, collapsing_direction(d), rho);
      std::vector<Cube> row;
      row.reserve(cells.size());
      for (auto i : cells) row.push_back(Cube{rho.k, i, 0});
      c_star = check_spread(row, rho, s, c).c_star;
    }
    r.c_star.push_back(c_star);
    (c_star <= c ? r.kept : r.pruned).push_back(d);
  }
  r.survival = directions.empty() ? 0.0
                                  : static_cast<double>(r.kept.size()) /
                                        static_cast<double>(directions.size());
  r.pass = !directions.empty() && r.survival >= min_fraction;
  return r;
}

}  // namespace incidence
