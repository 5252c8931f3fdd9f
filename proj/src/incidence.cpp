#include "incidence/incidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace incidence {

namespace {

using i128 = __int128;

i128 pow2(int e) { return static_cast<i128>(1) << e; }

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct SlopeGroup {
  Orientation orientation;
  int k;
  std::int64_t slope;
  std::vector<std::int64_t> intercepts;  // sorted, with multiplicity
};

std::vector<SlopeGroup> group_by_slope(std::span<const Tube> tubes) {
  std::map<std::tuple<Orientation, int, std::int64_t>, std::vector<std::int64_t>> buckets;
  for (const auto& t : tubes) {
    buckets[{t.orientation, t.param.k, t.param.ix}].push_back(t.param.iy);
  }
  std::vector<SlopeGroup> groups;
  groups.reserve(buckets.size());
  for (auto& [key, ib] : buckets) {
    std::sort(ib.begin(), ib.end());
    groups.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::move(ib)});
  }
  return groups;
}

// Tubes of the group meeting the cube: the intercept indices b with
//   lo_ax + b 2^kp < (v+1) 2^kt  and  hi_ax + (b+1) 2^kp > v 2^kt.
std::int64_t count_in_group(const SlopeGroup& g, const Cube& c) {
  const int kt = g.k;
  const int kp = c.k;
  const i128 u = g.orientation == Orientation::standard ? c.ix : c.iy;
  const i128 v = g.orientation == Orientation::standard ? c.iy : c.ix;
  const i128 a = g.slope;
  const i128 c00 = a * u, c01 = a * (u + 1), c10 = (a + 1) * u, c11 = (a + 1) * (u + 1);
  const i128 lo_ax = std::min(std::min(c00, c01), std::min(c10, c11));
  const i128 hi_ax = std::max(std::max(c00, c01), std::max(c10, c11));
  const i128 b_max = floor_div((v + 1) * pow2(kt) - lo_ax - 1, pow2(kp));
  const i128 b_min = floor_div(v * pow2(kt) - hi_ax, pow2(kp));
  if (b_min > b_max) return 0;
  const auto& ib = g.intercepts;
  const auto clamp64 = [](i128 x) {
    constexpr i128 lo = std::numeric_limits<std::int64_t>::min();
    constexpr i128 hi = std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(std::clamp(x, lo, hi));
  };
  const auto first = std::lower_bound(ib.begin(), ib.end(), clamp64(b_min));
  const auto last = std::upper_bound(first, ib.end(), clamp64(b_max));
  return last - first;
}

template <typename F>
std::int64_t parallel_sum(std::size_t n, int threads, F&& per_index) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  if (workers == 1) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) total += per_index(i);
    return total;
  }
  std::vector<std::int64_t> partial(workers, 0);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      std::int64_t s = 0;
      for (std::size_t i = begin; i < end; ++i) s += per_index(i);
      partial[w] = s;
    });
  }
  for (auto& t : pool) t.join();
  std::int64_t total = 0;
  for (auto s : partial) total += s;
  return total;
}

}  // namespace

std::vector<Tube> Configuration::tube_family() const {
  std::vector<Tube> all;
  for (const auto& ts : tubes_of) all.insert(all.end(), ts.begin(), ts.end());
  return sorted_unique(std::move(all));
}

std::int64_t Configuration::declared_incidences() const {
  std::int64_t n = 0;
  for (const auto& ts : tubes_of) n += static_cast<std::int64_t>(ts.size());
  return n;
}

std::vector<ConfigurationIssue> validate(const Configuration& cfg) {
  std::vector<ConfigurationIssue> issues;
  if (cfg.tubes_of.size() != cfg.points.size()) {
    issues.push_back({"tubes_of has " + std::to_string(cfg.tubes_of.size()) +
                          " entries for " + std::to_string(cfg.points.size()) + " points",
                      0});
    return issues;
  }
  for (std::size_t i = 0; i < cfg.points.size(); ++i) {
    const Cube& p = cfg.points[i];
    if (p.k != cfg.delta.k) issues.push_back({"cube " + to_string(p) + " not at scale delta", i});
    for (const auto& t : cfg.tubes_of[i]) {
      if (t.param.k != cfg.delta.k) {
        issues.push_back({"tube " + to_string(t) + " not at scale delta", i});
      } else if (!tube_meets_cube(t, p)) {
        issues.push_back({"tube " + to_string(t) + " misses " + to_string(p), i});
      }
    }
    if (cfg.nice && !cfg.tubes_of[i].empty()) {
      const auto& ts = cfg.tubes_of[i];
      if (static_cast<std::int64_t>(ts.size()) != cfg.nice->m) {
        issues.push_back({"|T(p)| = " + std::to_string(ts.size()) + " != M", i});
      }
      const auto rep = check_tube_spread(ts, cfg.delta, cfg.nice->s, cfg.nice->c);
      if (!rep.pass) {
        issues.push_back({"T(p) fails spread check, C* = " + std::to_string(rep.c_star), i});
      }
    } else if (cfg.nice && cfg.nice->m != 0) {
      issues.push_back({"empty T(p) with M > 0", i});
    }
  }
  return issues;
}

std::int64_t count_meeting_pairs_brute(std::span<const Cube> points, std::span<const Tube> tubes) {
  std::int64_t n = 0;
  for (const auto& p : points)
    for (const auto& t : tubes) n += tube_meets_cube(t, p) ? 1 : 0;
  return n;
}

std::int64_t count_meeting_pairs(std::span<const Cube> points, std::span<const Tube> tubes,
                                 int threads) {
  const auto groups = group_by_slope(tubes);
  return parallel_sum(points.size(), threads, [&](std::size_t i) {
    std::int64_t n = 0;
    for (const auto& g : groups) n += count_in_group(g, points[i]);
    return n;
  });
}

std::int64_t count_incidences(const Configuration& cfg, CountMode mode, int threads) {
  if (mode == CountMode::declared) return cfg.declared_incidences();
  const auto family = cfg.tube_family();
  return count_meeting_pairs(cfg.points, family, threads);
}

double BoundReport::rhs() const {
  double sum = 0.0;
  for (const auto& [name, v] : terms) sum += v;
  return budget * sum;
}

BoundReport make_report(std::string name, double lhs,
                        std::vector<std::pair<std::string, double>> terms, double budget) {
  BoundReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.terms = std::move(terms);
  r.budget = budget;
  double sum = 0.0;
  for (const auto& [n, v] : r.terms) sum += v;
  r.slack = sum > 0.0 ? lhs / sum : (lhs > 0.0 ? INFINITY : 0.0);
  r.pass = lhs <= budget * sum;
  return r;
}

std::int64_t count_point_line_incidences(std::span<const Point> points,
                                         std::span<const Line> lines) {
  // Lines grouped by (orientation, slope); intercepts sorted with multiplicity.
  std::map<std::pair<Orientation, Rational>, std::vector<Rational>> groups;
  for (const auto& l : lines) groups[{l.orientation, l.slope}].push_back(l.intercept);
  for (auto& [key, v] : groups) std::sort(v.begin(), v.end());

  std::int64_t n = 0;
  for (const auto& p : points) {
    for (const auto& [key, v] : groups) {
      const auto& [orient, a] = key;
      const Rational b = orient == Orientation::standard ? p.y - a * p.x : p.x - a * p.y;
      const auto [first, last] = std::equal_range(v.begin(), v.end(), b);
      n += last - first;
    }
  }
  return n;
}

std::array<BoundReport, 3> check_elementary_st(std::span<const Point> points,
                                               std::span<const Line> lines, double budget) {
  const auto pts = sorted_unique(std::vector<Point>(points.begin(), points.end()));
  const auto ls = sorted_unique(std::vector<Line>(lines.begin(), lines.end()));
  const double np = static_cast<double>(pts.size());
  const double nl = static_cast<double>(ls.size());
  const double i = static_cast<double>(count_point_line_incidences(pts, ls));
  return {
      make_report("elementary_lines", i, {{"|L|^1/2 |P|", std::sqrt(nl) * np}, {"|L|", nl}}, budget),
      make_report("elementary_points", i, {{"|L| |P|^1/2", nl * std::sqrt(np)}, {"|P|", np}}, budget),
      make_report("sharp", i,
                  {{"|L|^2/3 |P|^2/3", std::cbrt(nl * nl * np * np)}, {"|L|", nl}, {"|P|", np}},
                  budget),
  };
}

double log_budget(Scale delta, double power) {
  return std::pow(std::max(delta.log_inverse(), 1.0), power);
}

BoundReport check_discretized_st(const Configuration& cfg, double log_power) {
  if (!cfg.nice) throw std::invalid_argument("check_discretized_st: missing niceness metadata");
  const auto family = cfg.tube_family();
  const double m = static_cast<double>(cfg.nice->m);
  const double nt = static_cast<double>(family.size());
  const double np = static_cast<double>(cfg.points.size());
  const double lhs = static_cast<double>(cfg.declared_incidences());
  return make_report("discretized_st", lhs,
                     {{"M delta^s |T|^1/2 |P|",
                       m * std::pow(cfg.delta.value(), cfg.nice->s) * std::sqrt(nt) * np},
                      {"|T|", nt}},
                     log_budget(cfg.delta, log_power));
}

double cor_lower_bound(double s, double t, Scale delta, double m, double c_p, double c_t) {
  if (!(s >= 0.0 && s <= t && t <= 1.0)) {
    throw std::invalid_argument("cor_lower_bound: need 0 <= s <= t <= 1");
  }
  if (s >= 1.0) throw std::invalid_argument("cor_lower_bound: s = 1 is singular");
  if (c_p <= 0.0 || c_t <= 0.0 || m <= 0.0) {
    throw std::invalid_argument("cor_lower_bound: constants must be positive");
  }
  const double d = delta.value();
  const double md = m * std::pow(d, s);
  return m * std::pow(d, -s) * std::pow(md, (t - s) / (1.0 - s)) / (c_p * c_t);
}

TubeCountReport check_tube_count(const Configuration& cfg, double log_power) {
  TubeCountReport r;
  const auto family = cfg.tube_family();
  r.tube_count = family.size();
  r.exponent = family.empty() ? 0.0
                              : std::log(static_cast<double>(family.size())) /
                                    cfg.delta.log_inverse();
  const bool usable = cfg.nice && cfg.nice->t && !cfg.points.empty() && cfg.nice->s < 1.0 &&
                      cfg.nice->s <= *cfg.nice->t && *cfg.nice->t <= 1.0 && cfg.nice->m > 0;
  if (!usable) {
    r.bound = make_report("tube_count", 0.0, {{"|T|", static_cast<double>(r.tube_count)}}, 1.0);
    r.bound.measured_only = true;
    r.bound.pass = false;
    return r;
  }
  const double s = cfg.nice->s;
  const double t = *cfg.nice->t;
  r.c_p = check_spread(cfg.points, cfg.delta, t, 1.0).c_star;
  r.c_t = 0.0;
  for (const auto& ts : cfg.tubes_of) {
    if (!ts.empty()) r.c_t = std::max(r.c_t, check_tube_spread(ts, cfg.delta, s, 1.0).c_star);
  }
  r.lower_bound = cor_lower_bound(s, t, cfg.delta, static_cast<double>(cfg.nice->m), r.c_p,
                                  std::max(r.c_t, 1e-300));
  r.bound = make_report("tube_count", r.lower_bound, {{"|T|", static_cast<double>(r.tube_count)}},
                        log_budget(cfg.delta, log_power));
  return r;
}

PairTubeCount pair_tube_count(const Cube& p, const Cube& q, std::span<const Tube> family,
                              std::optional<double> s) {
  if (p == q) throw GeometryError("pair_tube_count: p and p' coincide");
  PairTubeCount r;
  for (const auto& t : family) {
    if (tube_meets_cube(t, p) && tube_meets_cube(t, q)) ++r.count;
  }
  const double hp = std::ldexp(1.0, -p.k), hq = std::ldexp(1.0, -q.k);
  const double dx = (static_cast<double>(p.ix) + 0.5) * hp - (static_cast<double>(q.ix) + 0.5) * hq;
  const double dy = (static_cast<double>(p.iy) + 0.5) * hp - (static_cast<double>(q.iy) + 0.5) * hq;
  r.distance = std::hypot(dx, dy);
  if (s) {
    r.bound = static_cast<double>(family.size()) * std::pow(std::min(1.0, hp / r.distance), *s);
  }
  return r;
}

ExponentFormulas exponent_formulas(double s, double t) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("exponent_formulas: s must lie in (0,1)");
  if (!(t > s && t <= 2.0)) throw std::invalid_argument("exponent_formulas: t must lie in (s,2]");
  ExponentFormulas f{};
  f.conjecture = std::min({s + t, (3.0 * s + t) / 2.0, s + 1.0});
  f.elementary = std::max(t / 2.0 + s, 2.0 * s);
  f.os23 = 2.0 * s + (1.0 - s) * (1.0 - s) / (2.0 - s);
  f.os23_with_floor = std::max(f.os23, 1.0 + s);
  f.exceptional_conj = std::max(2.0 * s - t, 0.0);
  f.kaufman = s;
  f.oberlin = t / 2.0;
  return f;
}

}  // namespace incidence
