#include "incidence/duality.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace incidence {

namespace {

using i128 = __int128;

Rational make(i128 num, i128 den) {
  if (den == 0) throw std::domain_error("rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 a = num < 0 ? -num : num;
  i128 b = den;
  while (b != 0) {
    const i128 r = a % b;
    a = b;
    b = r;
  }
  const i128 g = a == 0 ? 1 : a;
  num /= g;
  den /= g;
  constexpr i128 lim = std::numeric_limits<std::int64_t>::max();
  if (num > lim || -num > lim || den > lim) throw std::overflow_error("rational: overflow");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::domain_error("rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / (g == 0 ? 1 : g);
  den_ = den / (g == 0 ? 1 : g);
}

Rational operator+(const Rational& a, const Rational& b) {
  return make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
              static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
  return make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  const i128 l = static_cast<i128>(a.num_) * b.den_;
  const i128 r = static_cast<i128>(b.num_) * a.den_;
  return l < r ? std::strong_ordering::less
               : (l > r ? std::strong_ordering::greater : std::strong_ordering::equal);
}

std::string to_string(const Rational& r) {
  return r.den() == 1 ? std::to_string(r.num())
                      : std::to_string(r.num()) + "/" + std::to_string(r.den());
}

bool incident(const Point& p, const Line& l) {
  if (l.orientation == Orientation::standard) return p.y == l.slope * p.x + l.intercept;
  return p.x == l.slope * p.y + l.intercept;
}

Point dualize(const Line& l) { return Point{l.slope, l.intercept}; }

Line dualize(const Point& p, Orientation mode) {
  if (mode == Orientation::standard) return Line{-p.x, p.y, Orientation::standard};
  return Line{-p.y, p.x, Orientation::standard};
}

Line undualize(const Point& param, Orientation mode) { return Line{param.x, param.y, mode}; }

Point undualize(const Line& param_line, Orientation mode) {
  if (mode == Orientation::standard) return Point{-param_line.slope, param_line.intercept};
  return Point{param_line.intercept, -param_line.slope};
}

}  // namespace incidence
