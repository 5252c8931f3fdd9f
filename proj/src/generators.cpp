#include "incidence/generators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

namespace incidence {

namespace {

// All randomness draws raw 64-bit outputs; std distributions are avoided so
// that outputs do not depend on the standard library.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

std::mt19937_64 attempt_stream(std::uint64_t seed, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

// First n entries of a seeded Fisher-Yates shuffle of `v`.
template <typename T>
void random_prefix(std::vector<T>& v, std::size_t n, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < n && i + 1 < v.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(draw(rng, v.size() - i));
    std::swap(v[i], v[j]);
  }
  v.resize(std::min(n, v.size()));
}

int ceil_digits(double s, int block) {
  return static_cast<int>(std::ceil(s * block - 1e-9));
}

std::vector<Cube> product(const CantorSet& x, const CantorSet& y) {
  std::vector<Cube> out;
  out.reserve(x.members.size() * y.members.size());
  for (auto i : x.members)
    for (auto j : y.members) out.push_back({x.k, i, j});
  return out;
}

std::vector<Tube> fan_through(const Cube& p, const std::vector<std::int64_t>& slopes,
                              Orientation o = Orientation::standard) {
  std::vector<Tube> out;
  out.reserve(slopes.size());
  for (auto a : slopes) out.push_back(tube_through(p, a, p.k, o));
  return sorted_unique(std::move(out));
}

void check_nice_parameters(Scale delta, double s, double t, double c, std::int64_t m) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("s must lie in (0,1)");
  if (!(t > s && t <= 2.0)) throw std::invalid_argument("t must lie in (s,2]");
  if (m < 1 || m > (std::int64_t{1} << delta.k)) throw std::invalid_argument("M out of range");
  if (static_cast<double>(m) > std::pow(delta.value(), -s) * c) {
    throw std::invalid_argument("M exceeds C delta^-s");
  }
}

// Attaches seeded spread fans of size m to every point. Returns the largest
// fan spread constant.
double attach_fans(Configuration& cfg, double s, std::int64_t m, std::mt19937_64& rng) {
  double worst = 0.0;
  cfg.tubes_of.clear();
  for (const auto& p : cfg.points) {
    auto fan = fan_through(p, spread_slopes(cfg.delta.k, static_cast<std::size_t>(m), rng));
    worst = std::max(worst, check_tube_spread(fan, cfg.delta, s, 1.0).c_star);
    cfg.tubes_of.push_back(std::move(fan));
  }
  return worst;
}

}  // namespace

GenerationError::GenerationError(const std::string& generator, const std::string& diagnostics)
    : std::runtime_error(generator + ": " + diagnostics), diagnostics_(diagnostics) {}

std::vector<Cube> CantorSet::as_row() const {
  std::vector<Cube> out;
  out.reserve(members.size());
  for (auto i : members) out.push_back({k, i, 0});
  return out;
}

int cantor_block_length(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("cantor dimension must lie in [0,1]");
  int best = 1;
  double best_err = INFINITY;
  for (int b = 1; b <= 8; ++b) {
    const double err = std::abs(static_cast<double>(ceil_digits(s, b)) / b - s);
    if (err < best_err - 1e-12) {
      best = b;
      best_err = err;
    }
  }
  return best;
}

CantorSet cantor1d(double s, Scale delta, std::optional<std::uint64_t> seed) {
  CantorSet c;
  c.k = delta.k;
  c.block = cantor_block_length(s);
  c.kept = ceil_digits(s, c.block);
  std::mt19937_64 rng(seed.value_or(0));

  std::vector<std::int64_t> members{0};
  for (int start = 0; start < c.k; start += c.block) {
    const int len = std::min(c.block, c.k - start);
    std::vector<std::int64_t> patterns;
    if (seed) {
      std::vector<std::int64_t> all(std::size_t{1} << c.block);
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
      random_prefix(all, std::size_t{1} << c.kept, rng);
      patterns = std::move(all);
    } else {
      for (std::int64_t q = 0; q < (std::int64_t{1} << c.kept); ++q)
        patterns.push_back(q << (c.block - c.kept));
    }
    for (auto& p : patterns) p >>= (c.block - len);
    patterns = sorted_unique(std::move(patterns));

    std::vector<std::int64_t> next;
    next.reserve(members.size() * patterns.size());
    for (auto m : members)
      for (auto p : patterns) next.push_back((m << len) | p);
    members = std::move(next);
  }
  c.members = std::move(members);
  return c;
}

CantorTarget cantor_target(double s, double t, Scale delta) {
  if (delta.k < 2) throw std::invalid_argument("cantor_target: delta too coarse");
  CantorTarget out;
  out.radii = cantor1d(s, Scale{delta.k - 1});
  out.angles = cantor1d(t, delta);
  const double n = std::ldexp(1.0, delta.k);
  for (auto v : out.radii.members) {
    const double r = 0.5 * (1.0 + (static_cast<double>(v) + 0.5) * 2.0 / n);
    for (auto u : out.angles.members) {
      const double theta = std::numbers::pi / 2.0 * (static_cast<double>(u) + 0.5) / n;
      const auto ix = static_cast<std::int64_t>(std::floor(r * std::cos(theta) * n));
      const auto iy = static_cast<std::int64_t>(std::floor(r * std::sin(theta) * n));
      out.cubes.push_back({delta.k, ix, iy});
    }
  }
  out.cubes = sorted_unique(std::move(out.cubes));
  out.fit = box_dimension(out.cubes, delta, Scale{(delta.k + 3) / 4});
  return out;
}

std::vector<std::int64_t> spread_slopes(int k, std::size_t m, std::mt19937_64& rng) {
  if (m == 0) return {};
  const int f = std::bit_width(m - 1);
  if (f > k) throw std::invalid_argument("spread_slopes: more slopes than slope cells");
  std::vector<int> free_pos;  // bit positions counted from the least significant end
  std::int64_t fixed_mask = 0;
  for (int i = 0; i < k; ++i) {
    const bool is_free = f > 0 && ((i + 1) * f + k - 1) / k > (i * f + k - 1) / k;
    if (is_free) {
      free_pos.push_back(k - 1 - i);
    } else {
      fixed_mask |= std::int64_t{1} << (k - 1 - i);
    }
  }
  const std::int64_t offset = static_cast<std::int64_t>(rng()) & fixed_mask;
  std::vector<std::int64_t> all;
  all.reserve(std::size_t{1} << f);
  for (std::int64_t code = 0; code < (std::int64_t{1} << f); ++code) {
    std::int64_t a = offset;
    for (int b = 0; b < f; ++b)
      if ((code >> b) & 1) a |= std::int64_t{1} << free_pos[static_cast<std::size_t>(f - 1 - b)];
    all.push_back(a);
  }
  random_prefix(all, m, rng);
  std::sort(all.begin(), all.end());
  return all;
}

Configuration nice_random(Scale delta, double s, double t, double c, std::int64_t m,
                          std::uint64_t seed) {
  check_nice_parameters(delta, s, t, c, m);
  std::ostringstream diag;
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    auto rng = attempt_stream(seed, attempt);
    const auto x = cantor1d(t / 2.0, delta, rng());
    const auto y = cantor1d(t / 2.0, delta, rng());
    Configuration cfg{delta, product(x, y), {}, Niceness{s, c, m, t}};
    const double cp = check_spread(cfg.points, delta, t, c).c_star;
    if (cp > c) {
      diag << "attempt " << attempt << ": C_P = " << cp << "; ";
      continue;
    }
    const double ct = attach_fans(cfg, s, m, rng);
    if (ct > c) {
      diag << "attempt " << attempt << ": C_T = " << ct << "; ";
      continue;
    }
    return cfg;
  }
  throw GenerationError("nice_random", diag.str());
}

Configuration regular_random(Scale delta, double s, double t, double c, double k_reg,
                             std::int64_t m, std::uint64_t seed, bool lopsided) {
  check_nice_parameters(delta, s, t, c, m);
  if (!delta.has_dyadic_sqrt()) throw std::invalid_argument("regular_random: odd scale exponent");
  if (lopsided) {
    // Free digits first, then zeros: all branching happens above delta^{1/2}
    // once t k / 2 <= k / 2.
    auto rng = attempt_stream(seed, 0);
    CantorSet x;
    x.k = delta.k;
    const int free_bits = std::min(delta.k, static_cast<int>(std::lround(t / 2.0 * delta.k)));
    for (std::int64_t i = 0; i < (std::int64_t{1} << free_bits); ++i)
      x.members.push_back(i << (delta.k - free_bits));
    Configuration cfg{delta, product(x, x), {}, Niceness{s, c, m, t}};
    attach_fans(cfg, s, m, rng);
    return cfg;
  }
  std::ostringstream diag;
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    auto rng = attempt_stream(seed, attempt);
    const auto x = cantor1d(t / 2.0, delta, rng());
    const auto y = cantor1d(t / 2.0, delta, rng());
    Configuration cfg{delta, product(x, y), {}, Niceness{s, c, m, t}};
    const auto reg = check_regular(cfg.points, delta, t, c, k_reg);
    if (!reg.pass) {
      diag << "attempt " << attempt << ": C_P = " << reg.spread.c_star
           << ", |P|_half = " << reg.half_scale_count << "; ";
      continue;
    }
    const double ct = attach_fans(cfg, s, m, rng);
    if (ct > c) {
      diag << "attempt " << attempt << ": C_T = " << ct << "; ";
      continue;
    }
    return cfg;
  }
  throw GenerationError("regular_random", diag.str());
}

ProductStructure product_structure(Scale big_delta, double s, double t, std::uint64_t seed,
                                   double c) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("product_structure: s must lie in (0,1)");
  if (!(t >= s && t - s <= 1.0)) throw std::invalid_argument("product_structure: need s <= t <= s+1");
  ProductStructure out;
  auto rng = attempt_stream(seed, 0);
  out.x = cantor1d(s, big_delta, rng());
  out.y = cantor1d(t - s, big_delta, rng());
  const int k = big_delta.k;
  const auto m = static_cast<std::size_t>(std::max(1L, std::lround(std::pow(2.0, s * k))));
  out.slopes = spread_slopes(k, m, rng);

  out.cfg = Configuration{big_delta, product(out.x, out.y), {},
                          Niceness{s, c, static_cast<std::int64_t>(m), t}};
  for (const auto& p : out.cfg.points) {
    out.cfg.tubes_of.push_back(fan_through(p, out.slopes, Orientation::alternate));
  }

  out.budget = log_budget(big_delta, 2.0);
  out.row_spread = check_spread(out.x.as_row(), big_delta, s, c);
  out.column_spread = check_spread(out.y.as_row(), big_delta, t - s, c);
  out.min_fan = out.max_fan = out.slopes.size();
  for (const auto& ts : out.cfg.tubes_of) {
    out.min_fan = std::min(out.min_fan, ts.size());
    out.max_fan = std::max(out.max_fan, ts.size());
  }
  out.fan_target = std::pow(big_delta.value(), -s);
  out.family_ratio = static_cast<double>(out.cfg.tube_family().size()) /
                     std::pow(big_delta.value(), -2.0 * s);
  out.properties_hold = out.row_spread.pass && out.column_spread.pass &&
                        static_cast<double>(out.min_fan) * out.budget >= out.fan_target &&
                        static_cast<double>(out.max_fan) <= out.budget * out.fan_target &&
                        out.family_ratio <= out.budget;
  return out;
}

namespace {

// Position of a direction on a circle of 4 / rho cells, in angular order.
std::int64_t circle_position(const Direction& d, int k) {
  const std::int64_t n = std::int64_t{1} << k;
  const std::int64_t i = d.num << (k - d.exp);
  return d.swapped ? 3 * n - i : i + n;
}

// Predicted exceptional count of a candidate lattice, ignoring the
// neighbourhoods of exceptional directions.
double predicted_count(int k, int a, int b, bool jitter, double threshold) {
  if (jitter) return std::ldexp(1.0, a) < threshold ? 1.0 : 0.0;
  double count = 0.0;
  for (int e = 0; e <= k; ++e) {
    const double per_e = e == 0 ? 2.0 : std::ldexp(1.0, e);  // slopes p 2^-e, p odd (or 0, -1)
    if (std::ldexp(1.0, std::max(a, b + e)) < threshold) count += per_e;
    if (std::ldexp(1.0, std::max(b, a + e)) < threshold) count += per_e;
  }
  return count;
}

}  // namespace

CoverCounterexample cover_counterexample() {
  constexpr int k = 12;
  constexpr int kc = 8;
  constexpr int rows = 16;
  constexpr std::int64_t per_cell = std::int64_t{1} << (k - kc);
  CoverCounterexample out;
  out.coarse = Scale{kc};
  out.cfg.delta = Scale{k};
  for (int r = 0; r < rows; ++r) {
    const Cube p{k, 0, r * per_cell + per_cell / 2};
    std::vector<Tube> fan;
    for (std::int64_t cell = 0; cell < 16; ++cell) fan.push_back(tube_through(p, cell * per_cell, k));
    for (std::int64_t i = 0; i < 16; ++i) {
      const std::int64_t cell = 16 + 15 * i;
      for (std::int64_t q = 0; q < 8; ++q) fan.push_back(tube_through(p, cell * per_cell + 2 * q, k));
    }
    out.cfg.points.push_back(p);
    out.cfg.tubes_of.push_back(sorted_unique(std::move(fan)));
  }
  for (const auto& fam : out.cfg.tubes_of) {
    out.c1 = std::max(out.c1, check_tube_spread(fam, out.cfg.delta, 0.5, 1.0).c_star);
  }
  const auto m = static_cast<std::int64_t>(out.cfg.tubes_of.front().size());
  out.cfg.nice = Niceness{0.5, out.c1, m, std::nullopt};
  return out;
}

ExceptionalConfig exceptional_projection_config(double s, double t, double alpha, Scale delta,
                                                std::uint64_t seed, double tolerance,
                                                int threads) {
  if (!(alpha >= 0.0 && alpha <= s && s <= t && t <= 2.0)) {
    throw std::invalid_argument("exceptional_projection_config: need 0 <= alpha <= s <= t <= 2");
  }
  constexpr double kSpreadC = 4.0;
  constexpr double kDirectionC = 2.0;
  const int k = delta.k;
  const int total = static_cast<int>(std::lround(t * k));
  const double threshold = std::pow(delta.value(), -s);

  // K = {(i 2^-a, j 2^-b + o_i delta)}, a + b = t k, with o_i = 0 (a lattice)
  // or a seeded jitter per column. Lattices are exceptional along slopes of
  // small dyadic height, jittered columns only along the vertical.
  struct Candidate {
    int b;
    bool jitter;
    double predicted;
  };
  std::vector<Candidate> candidates;
  for (int b = std::max(0, total - k); b <= std::min(k, total); ++b) {
    for (bool jitter : {false, true}) {
      const double n = predicted_count(k, total - b, b, jitter, threshold);
      if (n >= 1.0) candidates.push_back({b, jitter, std::log2(n) / k});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& x, const auto& y) {
    return std::abs(x.predicted - alpha) < std::abs(y.predicted - alpha);
  });

  auto rng = attempt_stream(seed, 0);
  std::ostringstream diag;
  constexpr std::size_t kSurveys = 8;
  for (std::size_t c = 0; c < std::min(candidates.size(), kSurveys); ++c) {
    const int b = candidates[c].b;
    const int a = total - b;
    const bool jitter = candidates[c].jitter;
    diag << (jitter ? "jittered" : "lattice") << " b = " << b << ": ";

    ExceptionalConfig out;
    out.x_bits = a;
    out.y_bits = b;
    const std::int64_t ox = static_cast<std::int64_t>(draw(rng, std::uint64_t{1} << (k - a)));
    const std::int64_t oy = static_cast<std::int64_t>(draw(rng, std::uint64_t{1} << (k - b)));
    for (std::int64_t i = 0; i < (std::int64_t{1} << a); ++i) {
      const std::int64_t o =
          jitter ? static_cast<std::int64_t>(draw(rng, std::uint64_t{1} << (k - b))) : oy;
      for (std::int64_t j = 0; j < (std::int64_t{1} << b); ++j)
        out.k_set.push_back({k, (i << (k - a)) + ox, (j << (k - b)) + o});
    }
    out.k_set = sorted_unique(std::move(out.k_set));
    out.k_spread = check_spread(out.k_set, delta, t, kSpreadC);
    if (!out.k_spread.pass) {
      diag << "C_K = " << out.k_spread.c_star << "; ";
      continue;
    }
    out.survey = exceptional_survey(out.k_set, s, delta, DirectionGrid{delta}, t, threads);
    out.realized_alpha = out.survey.exponent;
    if (out.survey.exceptional_count == 0 || std::abs(out.realized_alpha - alpha) > tolerance) {
      diag << "realized " << out.realized_alpha << "; ";
      continue;
    }
    // E must not concentrate at scales above delta^{1/2}: an isolated cluster
    // of neighbouring directions has many delta-cells but few coarse ones.
    std::vector<std::int64_t> pos;
    for (std::size_t i = 0; i < out.survey.grid.size(); ++i) {
      if (out.survey.exceptional[i]) pos.push_back(circle_position(out.survey.grid[i], k));
    }
    bool spread = true;
    for (int j = 0; j <= k / 2 && spread; ++j) {
      std::vector<std::int64_t> cells;
      for (auto q : pos) cells.push_back(q >> (k + 2 - j));
      const double n = static_cast<double>(sorted_unique(std::move(cells)).size());
      if (n * kDirectionC < std::pow(2.0, j * alpha)) {
        spread = false;
        diag << "E concentrates at 2^-" << j << " (" << n << " cells); ";
      }
    }
    if (!spread) continue;
    for (std::size_t i = 0; i < out.survey.grid.size(); ++i) {
      if (out.survey.exceptional[i]) {
        out.directions.push_back(out.survey.grid[i]);
        out.covers.push_back(out.survey.covers[i]);
      }
    }
    out.incidence_lower_bound =
        static_cast<double>(out.directions.size()) * static_cast<double>(out.k_set.size());
    return out;
  }
  throw GenerationError("exceptional_projection_config",
                        "no construction realizes alpha = " + std::to_string(alpha) + ": " +
                            diag.str());
}

PointLineInstance random_point_line_instance(std::size_t n_points, std::size_t n_lines, int g,
                                             std::mt19937_64& rng) {
  if (g < 1) throw std::invalid_argument("random_point_line_instance: empty grid");
  const auto draw = [&rng](std::int64_t n) { return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n)); };
  PointLineInstance out;
  for (std::size_t i = 0; i < n_points; ++i) out.points.push_back({Rational(draw(g)), Rational(draw(g))});
  for (std::size_t i = 0; i < n_lines; ++i) {
    out.lines.push_back({Rational(draw(5) - 2), Rational(draw(5 * g) - 2 * g)});
  }
  return out;
}

std::optional<RandomProfile> random_branching_profile(int m, double s, double eps,
                                                      std::mt19937_64& rng) {
  if (m < 2) throw std::invalid_argument("random_branching_profile: m < 2");
  const int regimes = 1 + static_cast<int>(rng() % 5);
  std::vector<int> cuts{0, m};
  for (int i = 1; i < regimes; ++i) cuts.push_back(1 + static_cast<int>(rng() % (m - 1)));
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> v(m + 1, 0.0);
  for (std::size_t r = 0; r + 1 < cuts.size(); ++r) {
    const double slope = static_cast<double>(rng() % 2001) / 1000.0;
    for (int x = cuts[r]; x < cuts[r + 1]; ++x) {
      const double noise = (static_cast<double>(rng() % 201) - 100.0) / 1000.0;
      v[x + 1] = v[x] + std::clamp(slope + noise, 0.0, 2.0);
    }
  }
  const double fm = v[m];
  double t = (fm - eps * m) / m;
  for (int x = 1; x < m; ++x) t = std::max(t, (fm - v[x] - eps * m) / (m - x));
  if (!(t > s) || fm < (t - eps) * m) return std::nullopt;
  return RandomProfile{BranchingFunction::from_values(Scale{1}, std::move(v)), t};
}

}  // namespace incidence
