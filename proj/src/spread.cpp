#include "incidence/spread.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace incidence {

namespace {

struct TaggedCube {
  Cube cube;
  std::uint8_t tag = 0;
  auto operator<=>(const TaggedCube&) const = default;
};

struct TaggedHash {
  std::size_t operator()(const TaggedCube& t) const noexcept {
    return std::hash<Cube>{}(t.cube) * 3u + t.tag;
  }
};

std::vector<TaggedCube> tag(std::span<const Cube> cubes) {
  std::vector<TaggedCube> out;
  out.reserve(cubes.size());
  for (const auto& c : cubes) out.push_back({c, 0});
  return out;
}

std::vector<TaggedCube> tag(std::span<const Tube> tubes) {
  std::vector<TaggedCube> out;
  out.reserve(tubes.size());
  for (const auto& t : tubes) out.push_back({t.param, static_cast<std::uint8_t>(t.orientation)});
  return out;
}

std::size_t distinct_parents(const std::vector<TaggedCube>& items, Scale rho) {
  std::vector<TaggedCube> parents;
  parents.reserve(items.size());
  for (const auto& it : items) parents.push_back({parent_at(it.cube, rho), it.tag});
  return sorted_unique(std::move(parents)).size();
}

SpreadReport spread_core(std::vector<TaggedCube> items, Scale delta, double s, double c) {
  if (items.empty()) throw std::invalid_argument("check_spread: empty set");
  for (const auto& it : items) {
    if (it.cube.k != delta.k) throw GeometryError("check_spread: cube not at scale delta");
  }
  items = sorted_unique(std::move(items));
  const double total = static_cast<double>(items.size());

  SpreadReport rep;
  rep.s = s;
  rep.c = c;
  rep.size = items.size();
  rep.c_star = -1.0;
  // Only the ratio count / r^s matters; s = 0 reduces to count / |P| <= 1.
  for (int j = 0; j <= delta.k; ++j) {
    const Scale r{j};
    std::unordered_map<TaggedCube, std::size_t, TaggedHash> counts;
    counts.reserve(items.size());
    for (const auto& it : items) ++counts[{parent_at(it.cube, r), it.tag}];
    TaggedCube best{};
    std::size_t best_count = 0;
    for (const auto& [key, n] : counts) {
      if (n > best_count || (n == best_count && key < best)) {
        best_count = n;
        best = key;
      }
    }
    const double ratio = static_cast<double>(best_count) * std::exp2(j * s) / total;
    if (ratio > rep.c_star) {
      rep.c_star = ratio;
      rep.witness_scale = r;
      rep.witness_cube = best.cube;
    }
  }
  rep.pass = c >= rep.c_star;
  return rep;
}

}  // namespace

std::size_t covering_number(std::span<const Cube> cubes, Scale rho) {
  return distinct_parents(tag(cubes), rho);
}

std::size_t covering_number(std::span<const Tube> tubes, Scale rho) {
  return distinct_parents(tag(tubes), rho);
}

SpreadReport check_spread(std::span<const Cube> points, Scale delta, double s, double c) {
  return spread_core(tag(points), delta, s, c);
}

SpreadReport check_tube_spread(std::span<const Tube> tubes, Scale delta, double s, double c) {
  return spread_core(tag(tubes), delta, s, c);
}

RegularReport check_regular(std::span<const Cube> points, Scale delta, double s, double c,
                            double k) {
  const Scale half = delta.sqrt();
  RegularReport rep;
  rep.spread = check_spread(points, delta, s, c);
  rep.half_scale_count = covering_number(points, half);
  rep.half_scale_bound = k * std::exp2(delta.k * s / 2.0);
  rep.pass = rep.spread.pass && static_cast<double>(rep.half_scale_count) <= rep.half_scale_bound;
  return rep;
}

BetweenScalesReport check_between_scales(std::span<const Cube> points, Scale delta, Scale coarse,
                                         double s, double c, std::optional<double> k) {
  if (!delta.finer_than(coarse)) {
    throw GeometryError("check_between_scales: delta must be finer than Delta");
  }
  std::map<Cube, std::vector<Cube>> groups;
  for (const auto& p : points) {
    const Cube q = parent_at(p, coarse);
    groups[q].push_back(Homothety{q}.apply(p));
  }
  const Scale rel{delta.k - coarse.k};
  BetweenScalesReport rep;
  for (const auto& [q, local] : groups) {
    BetweenScalesReport::Entry e{q, check_spread(local, rel, s, c), std::nullopt};
    bool ok = e.spread.pass;
    if (k) {
      e.regular = check_regular(local, rel, s, c, *k);
      ok = ok && e.regular->pass;
    }
    rep.pass = rep.pass && ok;
    rep.worst_c_star = std::max(rep.worst_c_star, e.spread.c_star);
    rep.per_cube.push_back(std::move(e));
  }
  return rep;
}

UniformizeResult uniformize(std::span<const Cube> points, std::span<const Scale> scales,
                            UniformMode mode) {
  if (points.empty()) throw std::invalid_argument("uniformize: empty set");
  if (scales.empty() || scales.back().k != points.front().k) {
    throw GeometryError("uniformize: finest scale must equal the scale of the points");
  }
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const int prev = j == 0 ? 0 : scales[j - 1].k;
    if (scales[j].k <= prev) throw GeometryError("uniformize: scales must be strictly nested");
  }

  std::vector<Cube> kept = sorted_unique(std::vector<Cube>(points.begin(), points.end()));
  UniformizeResult res;
  res.band.assign(scales.size(), 0);

  for (std::size_t idx = scales.size(); idx-- > 0;) {
    const Scale fine = scales[idx];
    const Scale coarse{idx == 0 ? 0 : scales[idx - 1].k};

    // children (at `fine`) per coarse parent, and finest-cube mass per child.
    std::map<Cube, std::map<Cube, std::size_t>> tree;
    for (const auto& p : kept) ++tree[parent_at(p, coarse)][parent_at(p, fine)];

    std::map<int, std::size_t> band_mass;
    std::map<Cube, int> band_of;
    for (const auto& [q, children] : tree) {
      const auto n = children.size();
      const int e = static_cast<int>(std::bit_width(n));  // n in [2^(e-1), 2^e)
      band_of[q] = e;
      std::size_t mass = 0;
      if (mode == UniformMode::exact) {
        const std::size_t target = std::size_t{1} << (e - 1);
        std::size_t taken = 0;
        for (const auto& [child, m] : children) {
          if (taken++ == target) break;
          mass += m;
        }
      } else {
        for (const auto& [child, m] : children) mass += m;
      }
      band_mass[e] += mass;
    }
    int best = 0;
    std::size_t best_mass = 0;
    for (const auto& [e, m] : band_mass) {
      if (m >= best_mass) {  // ascending iteration: ties keep the larger band
        best_mass = m;
        best = e;
      }
    }
    res.band[idx] = best;

    std::unordered_set<Cube> allowed;
    const std::size_t target = std::size_t{1} << (best - 1);
    for (const auto& [q, children] : tree) {
      if (band_of[q] != best) continue;
      std::size_t taken = 0;
      for (const auto& [child, m] : children) {
        if (mode == UniformMode::exact && taken == target) break;
        allowed.insert(child);
        ++taken;
      }
    }
    std::vector<Cube> next;
    next.reserve(best_mass);
    for (const auto& p : kept) {
      if (allowed.contains(parent_at(p, fine))) next.push_back(p);
    }
    kept = sorted_unique(std::move(next));
    res.mass_after.push_back(kept.size());
  }
  res.kept = std::move(kept);
  return res;
}

NonUniformError::NonUniformError(int level, std::int64_t a, std::int64_t b)
    : std::runtime_error("set is not uniform at level " + std::to_string(level) + ": child counts " +
                         std::to_string(a) + " and " + std::to_string(b)),
      level_(level) {}

double BranchingFunction::operator()(double x) const {
  const int m = levels();
  if (x <= 0) return values.front();
  if (x >= m) return values.back();
  const int i = static_cast<int>(std::floor(x));
  const double frac = x - i;
  return values[i] + frac * (values[i + 1] - values[i]);
}

double BranchingFunction::chord_slope(double a, double b) const {
  return ((*this)(b) - (*this)(a)) / (b - a);
}

BranchingFunction BranchingFunction::from_values(Scale base, std::vector<double> values) {
  BranchingFunction f;
  f.base = base;
  f.values = std::move(values);
  return f;
}

BranchingFunction branching_function(std::span<const Cube> points, Scale base, int m) {
  if (points.empty()) throw std::invalid_argument("branching_function: empty set");
  if (points.front().k != base.k * m) {
    throw GeometryError("branching_function: points must be at scale Delta^m");
  }
  BranchingFunction f;
  f.base = base;
  f.values.push_back(0.0);
  const double log_inv = base.log_inverse();
  for (int i = 1; i <= m; ++i) {
    std::map<Cube, std::vector<Cube>> children;
    for (const auto& p : points) {
      children[parent_at(p, Scale{base.k * (i - 1)})].push_back(parent_at(p, Scale{base.k * i}));
    }
    std::int64_t n = -1;
    for (auto& [q, c] : children) {
      const auto cnt = static_cast<std::int64_t>(sorted_unique(std::move(c)).size());
      if (n >= 0 && cnt != n) throw NonUniformError(i, n, cnt);
      n = cnt;
    }
    f.branching.push_back(n);
    f.values.push_back(f.values.back() + std::log(static_cast<double>(n)) / log_inv);
  }
  return f;
}

DimensionFit box_dimension(std::span<const Cube> points, Scale finest, Scale coarsest) {
  if (coarsest.k > finest.k) throw GeometryError("box_dimension: coarsest is finer than finest");
  if (points.empty()) throw std::invalid_argument("box_dimension: empty set");
  DimensionFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = coarsest.k; j <= finest.k; ++j) {
    const std::size_t n = covering_number(points, Scale{j});
    fit.counts.emplace_back(j, n);
    const double x = j * std::log(2.0);
    const double y = std::log(static_cast<double>(n));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(fit.counts.size());
  const double denom = n * sxx - sx * sx;
  fit.slope = denom > 0 ? (n * sxy - sx * sy) / denom : 0.0;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace incidence
