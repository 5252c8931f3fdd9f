#pragma once

// Exact rational points and lines, and point-line duality.

#include <compare>
#include <cstdint>
#include <string>

#include "incidence/dyadic.hpp"

namespace incidence {

/// Normalised fraction num/den with den > 0.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  Rational operator-() const { return Rational(-num_, den_); }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

std::string to_string(const Rational& r);

struct Point {
  Rational x, y;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// y = slope x + intercept (standard) or x = slope y + intercept (alternate).
struct Line {
  Rational slope, intercept;
  Orientation orientation = Orientation::standard;
  friend auto operator<=>(const Line&, const Line&) = default;
};

bool incident(const Point& p, const Line& l);

/// Standard mode: the line (a,b) goes to the parameter point (a,b) and the
/// point (x,y) to the parameter line b = -x a + y. Alternate mode: the line
/// x = a y + b goes to (a,b) and (x,y) to b = -y a + x. Dual lines always use
/// the standard slope-intercept form in the (a,b) plane.
Point dualize(const Line& l);
Line dualize(const Point& p, Orientation mode);

/// Inverses of dualize, mode-matched: undualize(dualize(x)) == x.
Line undualize(const Point& param, Orientation mode);
Point undualize(const Line& param_line, Orientation mode);

}  // namespace incidence
