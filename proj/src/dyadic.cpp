#include "incidence/dyadic.hpp"

#include <cmath>
#include <numbers>

namespace incidence {

namespace {

using i128 = __int128;

i128 pow2(int e) { return static_cast<i128>(1) << e; }

// floor(n / 2^e) for e >= 0.
std::int64_t floor_shift(i128 n, int e) {
  return static_cast<std::int64_t>(n >> e);  // arithmetic shift floors
}

void require_coarser(int fine_k, Scale coarse) {
  if (coarse.k > fine_k) {
    throw GeometryError("target scale 2^-" + std::to_string(coarse.k) +
                        " is finer than 2^-" + std::to_string(fine_k));
  }
}

}  // namespace

double Scale::value() const { return std::ldexp(1.0, -k); }

double Scale::log_inverse() const { return k * std::numbers::ln2; }

Scale Scale::sqrt() const {
  if (!has_dyadic_sqrt()) {
    throw GeometryError("scale 2^-" + std::to_string(k) + " has no dyadic square root");
  }
  return Scale{k / 2};
}

bool tube_meets_cube(const Tube& tube, const Cube& cube) {
  const int kt = tube.param.k;
  const int kp = cube.k;
  // The horizontal variable of the line equation and the vertical one.
  const i128 u = tube.orientation == Orientation::standard ? cube.ix : cube.iy;
  const i128 v = tube.orientation == Orientation::standard ? cube.iy : cube.ix;
  const i128 a = tube.param.ix;
  const i128 b = tube.param.iy;

  // Work in units of 2^-(kt+kp). The image of the half-open box
  // [a,a+1) x [b,b+1) x [u,u+1) under (a,b,x) -> ax+b lies between the corner
  // extremes lo and hi, with hi never attained.
  const i128 c00 = a * u, c01 = a * (u + 1), c10 = (a + 1) * u, c11 = (a + 1) * (u + 1);
  const i128 lo_ax = std::min(std::min(c00, c01), std::min(c10, c11));
  const i128 hi_ax = std::max(std::max(c00, c01), std::max(c10, c11));
  const i128 lo = lo_ax + b * pow2(kp);
  const i128 hi = hi_ax + (b + 1) * pow2(kp);
  const i128 y0 = v * pow2(kt);
  const i128 y1 = (v + 1) * pow2(kt);
  return lo < y1 && hi > y0;
}

Cube parent_at(const Cube& p, Scale coarse) {
  require_coarser(p.k, coarse);
  const int shift = p.k - coarse.k;
  return Cube{coarse.k, p.ix >> shift, p.iy >> shift};
}

Tube parent_at(const Tube& t, Scale coarse) {
  return Tube{parent_at(t.param, coarse), t.orientation};
}

bool contains(const Cube& outer, const Cube& inner) {
  return inner.k >= outer.k && parent_at(inner, outer.scale()) == outer;
}

std::vector<Tube> cover_tubes(const std::vector<Tube>& tubes, Scale coarse) {
  std::vector<Tube> out;
  out.reserve(tubes.size());
  for (const auto& t : tubes) {
    if (t.param.k != tubes.front().param.k) {
      throw GeometryError("cover_tubes: mixed tube scales");
    }
    out.push_back(parent_at(t, coarse));
  }
  return sorted_unique(std::move(out));
}

Cube cube_containing(std::int64_t num_x, std::int64_t num_y, int e, int k) {
  if (k > e) {
    const int up = k - e;
    return Cube{k, num_x * (std::int64_t{1} << up), num_y * (std::int64_t{1} << up)};
  }
  return Cube{k, num_x >> (e - k), num_y >> (e - k)};
}

Tube tube_through(const Cube& p, std::int64_t slope_index, int k, Orientation orientation) {
  const i128 u = orientation == Orientation::standard ? p.ix : p.iy;
  const i128 v = orientation == Orientation::standard ? p.iy : p.ix;
  // Centre (u + 1/2, v + 1/2) 2^-kp; b = v_c - a u_c in units 2^-(k+kp+1).
  const i128 b_units = (2 * v + 1) * pow2(k) - static_cast<i128>(slope_index) * (2 * u + 1);
  return Tube{Cube{k, slope_index, floor_shift(b_units, p.k + 1)}, orientation};
}

bool Homothety::contains(const Cube& c) const { return incidence::contains(source, c); }

Cube Homothety::apply(const Cube& c) const {
  if (!contains(c)) {
    throw GeometryError("homothety: " + to_string(c) + " not inside " + to_string(source));
  }
  const int shift = c.k - source.k;
  return Cube{shift, c.ix - (source.ix << shift), c.iy - (source.iy << shift)};
}

Tube Homothety::apply(const Tube& t) const {
  const int kq = source.k;
  const int k = t.param.k;
  if (k < kq) {
    throw GeometryError("homothety: tube coarser than the source cube");
  }
  const bool standard = t.orientation == Orientation::standard;
  const i128 qu = standard ? source.ix : source.iy;
  const i128 qv = standard ? source.iy : source.ix;
  const i128 a = t.param.ix;
  const i128 b = t.param.iy;
  // b' = a0 qu + (b0 - qv) 2^kq in units of 2^-(k - kq), scaled by 2^kq.
  const i128 num = a * qu + (b - qv * pow2(k - kq)) * pow2(kq);
  return Tube{Cube{k - kq, static_cast<std::int64_t>(a >> kq), floor_shift(num, kq)},
              t.orientation};
}

Tube Homothety::apply_through(const Tube& t, const Cube& p) const {
  const Cube q = apply(p);
  const int kq = source.k;
  if (t.param.k < kq) {
    throw GeometryError("homothety: tube coarser than the source cube");
  }
  return tube_through(q, t.param.ix >> kq, t.param.k - kq, t.orientation);
}

std::string to_string(const Cube& c) {
  return "(" + std::to_string(c.k) + "," + std::to_string(c.ix) + "," + std::to_string(c.iy) + ")";
}

std::string to_string(const Tube& t) {
  return std::string(t.orientation == Orientation::standard ? "T" : "T'") + to_string(t.param);
}

}  // namespace incidence
