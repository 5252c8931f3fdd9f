#pragma once

// Incidence counting between cubes and tubes (and exact points and lines),
// Szemeredi-Trotter type bound checks and the closed-form exponent formulas.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "incidence/duality.hpp"
#include "incidence/dyadic.hpp"
#include "incidence/spread.hpp"

namespace incidence {

/// (delta, s, C, M)-niceness metadata; t optionally records the dimension
/// the point set was built for.
struct Niceness {
  double s = 0.0;
  double c = 1.0;
  std::int64_t m = 1;
  std::optional<double> t;
};

/// A point family P with a tube family T(p) for every point. tubes_of is
/// parallel to points.
struct Configuration {
  Scale delta;
  std::vector<Cube> points;
  std::vector<std::vector<Tube>> tubes_of;
  std::optional<Niceness> nice;

  /// Union of all T(p), sorted.
  std::vector<Tube> tube_family() const;
  std::int64_t declared_incidences() const;
};

struct ConfigurationIssue {
  std::string what;
  std::size_t point_index = 0;
};

/// Checks every declared tube meets its cube and, with metadata present,
/// that every T(p) has exactly M tubes and passes the (delta,s,C) check.
std::vector<ConfigurationIssue> validate(const Configuration& cfg);

enum class CountMode { declared, geometric };

std::int64_t count_incidences(const Configuration& cfg, CountMode mode, int threads = 1);

/// |{(p,T) : T meets p}|. The accelerated counter buckets tubes by slope cell
/// and, per cube, counts the exact intercept window that can meet it.
std::int64_t count_meeting_pairs(std::span<const Cube> points, std::span<const Tube> tubes,
                                 int threads = 1);
std::int64_t count_meeting_pairs_brute(std::span<const Cube> points, std::span<const Tube> tubes);

/// pass <=> lhs <= budget * sum(terms).
struct BoundReport {
  std::string name;
  double lhs = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double budget = 1.0;
  double slack = 0.0;  // lhs / sum(terms)
  bool pass = false;
  bool measured_only = false;

  double rhs() const;
};

BoundReport make_report(std::string name, double lhs,
                        std::vector<std::pair<std::string, double>> terms, double budget);

std::int64_t count_point_line_incidences(std::span<const Point> points, std::span<const Line> lines);

/// [0]: |L|^{1/2}|P| + |L|, [1]: |L||P|^{1/2} + |P|,
/// [2]: |L|^{2/3}|P|^{2/3} + |L| + |P|. Points and lines are de-duplicated.
std::array<BoundReport, 3> check_elementary_st(std::span<const Point> points,
                                               std::span<const Line> lines, double budget = 8.0);

/// Natural-log budget (log 1/delta)^power.
double log_budget(Scale delta, double power);

/// |I| <= (log 1/delta)^c (M delta^s |T|^{1/2} |P| + |T|). Throws without
/// niceness metadata.
BoundReport check_discretized_st(const Configuration& cfg, double log_power = 3.0);

/// (C_P C_T)^{-1} M delta^{-s} (M delta^s)^{(t-s)/(1-s)}.
double cor_lower_bound(double s, double t, Scale delta, double m, double c_p, double c_t);

struct TubeCountReport {
  BoundReport bound;  // lhs = bound / budget, terms = {|T|}: pass <=> floor met
  std::size_t tube_count = 0;
  double lower_bound = 0.0;
  double c_p = 0.0;
  double c_t = 0.0;
  double exponent = 0.0;  // log|T| / log(1/delta)
};

/// Compares |union T(p)| against cor_lower_bound with measured constants.
/// Without (s, t) metadata, or with t > 1, reports measurements only.
TubeCountReport check_tube_count(const Configuration& cfg, double log_power = 3.0);

struct PairTubeCount {
  std::size_t count = 0;
  double distance = 0.0;              // between cube centres
  std::optional<double> bound;        // |T(p)| (delta/d)^s
};

/// Tubes of `family` meeting both p and q. Throws if p == q.
PairTubeCount pair_tube_count(const Cube& p, const Cube& q, std::span<const Tube> family,
                              std::optional<double> s = {});

struct ExponentFormulas {
  double conjecture;        // min{s+t, (3s+t)/2, s+1}
  double elementary;        // max{t/2+s, 2s}
  double os23;              // 2s + (1-s)^2/(2-s)
  double os23_with_floor;   // max{2s + (1-s)^2/(2-s), 1+s}
  double exceptional_conj;  // max{2s-t, 0}
  double kaufman;           // s
  double oberlin;           // t/2
};

/// s in (0,1), t in (s,2].
ExponentFormulas exponent_formulas(double s, double t);

}  // namespace incidence
