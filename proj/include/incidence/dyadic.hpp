#pragma once

// Dyadic cubes, tubes and the maps between scales.
//
// A cube at scale exponent k is [ix 2^-k, (ix+1) 2^-k) x [iy 2^-k, (iy+1) 2^-k).
// A tube is the union of lines y = a x + b (or x = a y + b for the alternate
// orientation) over a half-open parameter cube (a, b). All predicates work on
// integer indices; no floating point is involved.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace incidence {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// delta = 2^-k.
struct Scale {
  int k = 0;

  constexpr Scale() = default;
  constexpr explicit Scale(int exponent) : k(exponent) {}

  double value() const;
  double log_inverse() const;  // log(1/delta), natural log
  bool has_dyadic_sqrt() const { return k % 2 == 0; }
  Scale sqrt() const;

  constexpr bool finer_than(Scale other) const { return k > other.k; }
  constexpr auto operator<=>(const Scale&) const = default;
};

struct Cube {
  int k = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  Scale scale() const { return Scale{k}; }
  constexpr auto operator<=>(const Cube&) const = default;
};

enum class Orientation : std::uint8_t {
  standard,   // y = a x + b
  alternate,  // x = a y + b
};

struct Tube {
  Cube param;  // ix indexes the slope a, iy the intercept b
  Orientation orientation = Orientation::standard;

  Scale scale() const { return param.scale(); }
  std::int64_t slope_index() const { return param.ix; }
  std::int64_t intercept_index() const { return param.iy; }
  constexpr auto operator<=>(const Tube&) const = default;
};

/// Maps a cube Q onto [0,1)^2.
struct Homothety {
  Cube source;

  bool contains(const Cube& c) const;
  Cube apply(const Cube& c) const;
  /// The rescaled tube whose slope cell is the (delta/Delta)-parent of the
  /// tube's slope cell and whose intercept cell contains the image of the
  /// parameter corner (a0, b0). Lines of `t` other than the corner line may
  /// fall into neighbouring intercept cells, so geometric incidences are
  /// only approximately preserved; use apply_through for a guaranteed one.
  Tube apply(const Tube& t) const;
  /// The rescaled tube with slope cell parent(slope(t)) containing the line
  /// of corner slope through the centre of S_Q(p). It always meets
  /// apply(p), so declared incidences survive rescaling.
  Tube apply_through(const Tube& t, const Cube& p) const;
};

bool tube_meets_cube(const Tube& tube, const Cube& cube);

/// Unique ancestor at the coarser scale. Throws if `coarse` is finer than p.
Cube parent_at(const Cube& p, Scale coarse);
Tube parent_at(const Tube& t, Scale coarse);

bool contains(const Cube& outer, const Cube& inner);

/// The distinct parameter parents of `tubes` at `coarse`, sorted. All input
/// tubes must share one scale.
std::vector<Tube> cover_tubes(const std::vector<Tube>& tubes, Scale coarse);

/// Sorted, de-duplicated copy.
template <typename T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

/// The cube of scale k containing the dyadic point (num_x 2^-e, num_y 2^-e).
Cube cube_containing(std::int64_t num_x, std::int64_t num_y, int e, int k);

/// The scale-k tube with the given slope cell containing the line of corner
/// slope through the centre of p. Always meets p.
Tube tube_through(const Cube& p, std::int64_t slope_index, int k,
                  Orientation orientation = Orientation::standard);

std::string to_string(const Cube& c);
std::string to_string(const Tube& t);

}  // namespace incidence

template <>
struct std::hash<incidence::Cube> {
  std::size_t operator()(const incidence::Cube& c) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(c.k) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(c.ix) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.iy) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

template <>
struct std::hash<incidence::Tube> {
  std::size_t operator()(const incidence::Tube& t) const noexcept {
    return std::hash<incidence::Cube>{}(t.param) * 31u +
           static_cast<std::size_t>(t.orientation);
  }
};
