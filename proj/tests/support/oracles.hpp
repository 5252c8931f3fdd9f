#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <map>
#include <utility>

#include "incidence/dyadic.hpp"
#include "incidence/spread.hpp"

namespace oracle {

// Chord predicates evaluated directly on the sample values.
inline bool admissible(const std::vector<double>& f, int c, int d, double s, double eps) {
  const double slope = (f[d] - f[c]) / (d - c);
  if (slope < s - 1e-9) return false;
  for (int x = c; x <= d; ++x) {
    if (f[x] < f[c] + slope * (x - c) - eps * (d - c) - 1e-9) return false;
  }
  return true;
}

// Largest total length of non-overlapping integer intervals that are each
// admissible. O(m^3).
inline int best_cover(const std::vector<double>& f, double s, double eps) {
  const int m = static_cast<int>(f.size()) - 1;
  std::vector<int> best(m + 1, 0);
  for (int d = 1; d <= m; ++d) {
    best[d] = best[d - 1];
    for (int c = 0; c < d; ++c) {
      if (admissible(f, c, d, s, eps)) best[d] = std::max(best[d], best[c] + (d - c));
    }
  }
  return best[m];
}

// f(x) within eps (d - c) of the chord at every integer x of [c, d].
inline bool linear(const std::vector<double>& f, int c, int d, double eps) {
  const double slope = (f[d] - f[c]) / (d - c);
  for (int x = c; x <= d; ++x) {
    if (std::abs(f[x] - f[c] - slope * (x - c)) > eps * (d - c) + 1e-9) return false;
  }
  return true;
}

// Some line of the tube meets the cube iff some corner of (slope cell) x
// (horizontal extent) puts the lowest line of the cell below the cube's top
// and some corner puts the highest line above its bottom. Integers in units
// of 2^-(kt + kp); fine for kt, kp <= 20.
inline bool tube_meets(const incidence::Tube& t, const incidence::Cube& p) {
  const bool standard = t.orientation == incidence::Orientation::standard;
  const std::int64_t u = standard ? p.ix : p.iy;
  const std::int64_t v = standard ? p.iy : p.ix;
  const std::int64_t bottom = v << t.param.k, top = (v + 1) << t.param.k;
  bool below_top = false, above_bottom = false;
  for (std::int64_t a : {t.param.ix, t.param.ix + 1}) {
    for (std::int64_t x : {u, u + 1}) {
      below_top = below_top || a * x + (t.param.iy << p.k) < top;
      above_bottom = above_bottom || a * x + ((t.param.iy + 1) << p.k) > bottom;
    }
  }
  return below_top && above_bottom;
}

inline std::int64_t meeting_pairs(const std::vector<incidence::Cube>& points,
                                  const std::vector<incidence::Tube>& tubes) {
  std::int64_t n = 0;
  for (const auto& p : points)
    for (const auto& t : tubes) n += tube_meets(t, p);
  return n;
}

// max over dyadic r and r-cubes Q of |X cap Q| / (r^s |X|), by enumerating
// every r-cube of the bounding box and testing membership by comparison.
// `key` separates classes that never share a cube (tube orientation).
inline double brute_c_star(const std::vector<std::pair<int, incidence::Cube>>& xs, double s) {
  const int k = xs.front().second.k;
  double best = 0;
  for (int j = 0; j <= k; ++j) {
    const std::int64_t side = std::int64_t{1} << (k - j);
    std::map<int, std::pair<std::int64_t, std::int64_t>> lo, hi;  // per key: min/max of ix, iy
    for (const auto& [key, c] : xs) {
      auto [it, fresh] = lo.try_emplace(key, std::pair{c.ix, c.iy});
      auto [jt, fresh2] = hi.try_emplace(key, std::pair{c.ix, c.iy});
      it->second = {std::min(it->second.first, c.ix), std::min(it->second.second, c.iy)};
      jt->second = {std::max(jt->second.first, c.ix), std::max(jt->second.second, c.iy)};
    }
    auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    for (const auto& [key, l] : lo) {
      const auto h = hi[key];
      for (std::int64_t qx = floor_div(l.first, side); qx <= floor_div(h.first, side); ++qx) {
        for (std::int64_t qy = floor_div(l.second, side); qy <= floor_div(h.second, side); ++qy) {
          std::size_t n = 0;
          for (const auto& [k2, c] : xs) {
            n += k2 == key && c.ix >= qx * side && c.ix < (qx + 1) * side && c.iy >= qy * side &&
                 c.iy < (qy + 1) * side;
          }
          best = std::max(best, static_cast<double>(n) / (std::pow(std::ldexp(1.0, -j), s) * xs.size()));
        }
      }
    }
  }
  return best;
}

}  // namespace oracle
