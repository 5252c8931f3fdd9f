#include "incidence/multiscale.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace incidence {

namespace {

constexpr double kTol = 1e-9;

std::string join(const std::vector<std::string>& parts) {
  std::ostringstream os;
  for (std::size_t i = 0; i < parts.size(); ++i) os << (i ? "; " : "") << parts[i];
  return os.str();
}

// Evaluation points of a piecewise-linear f on [a, b].
template <typename Fn>
bool all_points(double a, double b, Fn&& ok) {
  if (!ok(a) || !ok(b)) return false;
  for (double x = std::floor(a) + 1; x < b; x += 1) {
    if (!ok(x)) return false;
  }
  return true;
}

}  // namespace

DecompositionError::DecompositionError(std::vector<std::string> problems)
    : std::invalid_argument("decomposition: " + join(problems)), problems_(std::move(problems)) {}

LinearApprox linear_approx(const BranchingFunction& f, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("linear_approx: need a < b");
  if (a < 0 || b > f.levels()) throw std::invalid_argument("linear_approx: interval outside [0, m]");
  LinearApprox l;
  l.a = a;
  l.b = b;
  l.slope = f.chord_slope(a, b);
  l.intercept = f(a) - l.slope * a;
  return l;
}

bool is_eps_linear(const BranchingFunction& f, double a, double b, double eps) {
  const auto l = linear_approx(f, a, b);
  const double slack = eps * (b - a) + kTol;
  return all_points(a, b, [&](double x) { return std::abs(f(x) - l(x)) <= slack; });
}

bool is_eps_superlinear(const BranchingFunction& f, double a, double b, double eps) {
  const auto l = linear_approx(f, a, b);
  const double slack = eps * (b - a) + kTol;
  return all_points(a, b, [&](double x) { return f(x) >= l(x) - slack; });
}

Decomposition decompose(const BranchingFunction& f, double s, double t, double eps) {
  const int m = f.levels();
  std::vector<std::string> problems;
  if (m < 1) problems.push_back("f needs at least one level");
  if (!(s < t)) problems.push_back("need s < t");
  if (eps < 0) problems.push_back("need eps >= 0");
  if (m >= 1) {
    if (std::abs(f.values.front()) > kTol) problems.push_back("f(0) != 0");
    for (int i = 0; i < m; ++i) {
      if (std::abs(f.values[i + 1] - f.values[i]) > 2 + kTol) {
        problems.push_back("f not 2-Lipschitz on [" + std::to_string(i) + "," +
                           std::to_string(i + 1) + "]");
        break;
      }
    }
    if (f.values.back() < (t - eps) * m - kTol) problems.push_back("f(m) < (t - eps) m");
  }
  if (!problems.empty()) throw DecompositionError(std::move(problems));

  Decomposition out;
  out.m = m;
  out.s = s;
  out.t = t;
  out.eps = eps;
  int c = 0;
  while (c < m) {
    int found = -1;
    for (int d = m; d > c; --d) {
      if (f.chord_slope(c, d) >= s - kTol && is_eps_superlinear(f, c, d, eps)) {
        found = d;
        break;
      }
    }
    if (found < 0) {
      ++out.gap_length;
      ++c;
      continue;
    }
    StructuredInterval iv;
    iv.c = c;
    iv.d = found;
    iv.slope = f.chord_slope(c, found);
    iv.kind = is_eps_linear(f, c, found, eps) ? Alternative::linear : Alternative::superlinear;
    out.intervals.push_back(iv);
    c = found;
  }
  int shortest = m;
  for (const auto& iv : out.intervals) shortest = std::min(shortest, iv.length());
  out.tau = out.intervals.empty() ? 0.0 : static_cast<double>(shortest) / m;
  out.k_st = out.gap_length == 0 ? 0.0 : out.gap_length / (eps * m);
  return out;
}

double ScaleDecomposition::log_ratio(int j) const {
  return (levels.at(j) - levels.at(j - 1)) * base.log_inverse();
}

bool ScaleDecomposition::verified() const {
  return !clauses.empty() &&
         std::all_of(clauses.begin(), clauses.end(), [](const ClauseCheck& c) { return c.pass; });
}

std::vector<ClauseCheck> check_clauses(const ScaleDecomposition& d) {
  const double m = d.m;
  double min_structured = m;
  double bad_total = 0;
  double weighted = 0;
  bool consecutive = false;
  for (int j = 1; j <= d.n(); ++j) {
    const double len = d.levels[j] - d.levels[j - 1];
    if (d.classes[j - 1] == ScaleClass::bad) {
      bad_total += len;
      if (j > 1 && d.classes[j - 2] == ScaleClass::bad) consecutive = true;
    } else {
      min_structured = std::min(min_structured, len);
      weighted += d.exponents[j - 1] * len;
    }
  }
  std::vector<ClauseCheck> out;
  out.push_back({"(1a) structured ratio >= delta^-tau", min_structured >= d.tau * m - kTol,
                 min_structured, d.tau * m});
  out.push_back({"(1b) bad product <= delta^-eps", bad_total <= d.eps * m + kTol, bad_total,
                 d.eps * m});
  out.push_back({"(3) structured product >= delta^(eps-t)", weighted >= (d.t - d.eps) * m - kTol,
                 weighted, (d.t - d.eps) * m});
  out.push_back({"(4) no consecutive bad indices", !consecutive, consecutive ? 1.0 : 0.0, 0.0});
  return out;
}

ScaleDecomposition scales_from_decomposition(const Decomposition& dec, Scale base, double eps) {
  ScaleDecomposition out;
  out.base = base;
  out.m = dec.m;
  out.s = dec.s;
  out.t = dec.t;
  out.eps = eps;
  out.tau = dec.tau;
  out.levels.push_back(0);
  auto add = [&](int end, ScaleClass cls, double exponent, bool regular) {
    out.levels.push_back(end);
    out.classes.push_back(cls);
    out.exponents.push_back(exponent);
    out.regular.push_back(regular);
  };
  int at = 0;
  for (const auto& iv : dec.intervals) {
    if (iv.c > at) add(iv.c, ScaleClass::bad, 0.0, false);
    add(iv.d, ScaleClass::structured, iv.slope, iv.kind == Alternative::linear);
    at = iv.d;
  }
  if (at < dec.m) add(dec.m, ScaleClass::bad, 0.0, false);

  out.clauses = check_clauses(out);
  std::vector<std::string> failed;
  for (const auto& c : out.clauses) {
    if (!c.pass) {
      std::ostringstream os;
      os << c.clause << " (lhs " << c.lhs << ", rhs " << c.rhs << ")";
      failed.push_back(os.str());
    }
  }
  if (!failed.empty()) throw DecompositionError(std::move(failed));
  return out;
}

ScaleDecomposition classify(ScaleDecomposition d, double good_threshold) {
  for (int j = 0; j < d.n(); ++j) {
    if (d.classes[j] == ScaleClass::bad) continue;
    const bool good = d.regular[j] && d.exponents[j] >= good_threshold - kTol;
    d.classes[j] = good ? ScaleClass::good : ScaleClass::normal;
  }
  return d;
}

double log_multiscale_bound(const ScaleDecomposition& d, double m, const MultiscaleParams& p) {
  std::vector<std::string> missing;
  if (!p.c_log) missing.push_back("C");
  if (!p.c_prime) missing.push_back("C'");
  if (!p.lambda) missing.push_back("lambda");
  if (!p.eps_n) missing.push_back("eps_N");
  if (!p.eta) missing.push_back("eta");
  if (!missing.empty()) throw std::invalid_argument("multiscale_bound: missing " + join(missing));

  const double log_inv = d.delta().log_inverse();
  double v = -*p.c_log * std::log(log_inv) + std::log(m) - *p.c_prime * *p.lambda * log_inv +
             (d.s - *p.eps_n) * log_inv;
  for (int j = 1; j <= d.n(); ++j) {
    switch (d.classes[j - 1]) {
      case ScaleClass::good:
        v += *p.eta * d.log_ratio(j);
        break;
      case ScaleClass::bad:
        v -= d.log_ratio(j);
        break;
      case ScaleClass::normal:
        break;
      case ScaleClass::structured:
        throw std::invalid_argument("multiscale_bound: index " + std::to_string(j) +
                                    " is not classified as N or G");
    }
  }
  return v;
}

double multiscale_bound(const ScaleDecomposition& d, double m, const MultiscaleParams& p) {
  return std::exp(log_multiscale_bound(d, m, p));
}

}  // namespace incidence

namespace incidence {

namespace {

// j with 2^(j-1) < n <= 2^j.
int dyadic_bucket(std::int64_t n) {
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n - 1)));
}

// Index of the largest mass, ties to the larger index.
template <typename Map>
int heaviest(const Map& mass) {
  int best = -1;
  std::int64_t best_mass = -1;
  for (const auto& [key, value] : mass) {
    if (value >= best_mass) {
      best = key;
      best_mass = value;
    }
  }
  return best;
}

}  // namespace

RefinementError::RefinementError(std::vector<std::string> problems)
    : std::invalid_argument("refinement: " + join(problems)), problems_(std::move(problems)) {}

std::int64_t CoverRefinement::min_tube_incidences() const {
  if (tube_incidences.empty()) return 0;
  return *std::min_element(tube_incidences.begin(), tube_incidences.end());
}

double CoverRefinement::mass_retention() const {
  if (ledger.empty() || ledger.front().mass_before == 0) return 0.0;
  return static_cast<double>(ledger.back().mass_after) / ledger.front().mass_before;
}

double CoverRefinement::point_retention() const {
  return input_points == 0 ? 0.0 : static_cast<double>(kept.size()) / input_points;
}

bool CoverRefinement::pass() const {
  const double floor = 1.0 / std::pow(std::max(coarse.log_inverse(), 1.0), 5.0);
  return spread.pass && 8 * min_tube_incidences() >= h && mass_retention() >= floor &&
         point_retention() >= floor;
}

std::vector<Tube> naive_cover(const std::vector<std::vector<Tube>>& tubes_of, Scale coarse) {
  std::vector<Tube> out;
  for (const auto& fam : tubes_of) {
    for (const auto& t : fam) out.push_back(parent_at(t, coarse));
  }
  return sorted_unique(std::move(out));
}

CoverRefinement refine_cover(std::span<const Cube> points,
                             const std::vector<std::vector<Tube>>& tubes_of, Scale delta,
                             Scale coarse, double s, double c1, std::int64_t m, double c_low) {
  std::vector<std::string> problems;
  if (points.empty()) problems.push_back("empty point set");
  if (points.size() != tubes_of.size()) problems.push_back("tubes_of not parallel to points");
  if (coarse.finer_than(delta)) problems.push_back("Delta finer than delta");
  if (m < 1) problems.push_back("M < 1");
  if (problems.empty()) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& fam = tubes_of[i];
      const auto size = static_cast<std::int64_t>(fam.size());
      if (2 * size < m || size > m) {
        problems.push_back("|T(p)| outside [M/2, M] at point " + std::to_string(i));
        break;
      }
      if (std::any_of(fam.begin(), fam.end(), [&](const Tube& t) { return t.scale() != delta; })) {
        problems.push_back("tube not at scale delta at point " + std::to_string(i));
        break;
      }
      const auto rep = check_tube_spread(fam, delta, s, c1);
      if (!rep.pass) {
        std::ostringstream os;
        os << "T(p) is not a (delta,s,C1)-set at point " << i << " (C* = " << rep.c_star << ")";
        problems.push_back(os.str());
        break;
      }
    }
  }
  if (!problems.empty()) throw RefinementError(std::move(problems));

  const std::size_t n_points = points.size();
  CoverRefinement out;
  out.delta = delta;
  out.coarse = coarse;
  out.c1 = c1;
  out.input_points = n_points;
  const double log_inv = std::max(coarse.log_inverse(), 1.0);
  out.c2_budget = std::pow(log_inv, 5.0) * c1;

  // (i) Delta-cover of every T(p) with per-tube counts.
  std::vector<std::map<Tube, std::int64_t>> cover(n_points);
  std::int64_t mass0 = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    for (const auto& t : tubes_of[i]) ++cover[i][parent_at(t, coarse)];
    mass0 += static_cast<std::int64_t>(tubes_of[i].size());
  }
  out.ledger.push_back({"cover", mass0, mass0, 1.0});

  // (ii) per-point dyadic bucket over the admissible range.
  const double low = c_low * static_cast<double>(m) * std::pow(coarse.value(), 2.0);
  const int j_min = low <= 1 ? 0 : static_cast<int>(std::ceil(std::log2(low)));
  const int j_max = dyadic_bucket(m);
  const double n_buckets = std::max(1, j_max - j_min + 1);
  std::vector<int> bucket_of(n_points, -1);
  std::vector<std::int64_t> bucket_mass(n_points, 0);
  std::int64_t mass1 = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    std::map<int, std::int64_t> mass;
    for (const auto& [tube, n] : cover[i]) {
      const int j = dyadic_bucket(n);
      if (j >= j_min) mass[j] += n;
    }
    if (mass.empty()) continue;
    bucket_of[i] = heaviest(mass);
    bucket_mass[i] = mass[bucket_of[i]];
    mass1 += bucket_mass[i];
  }
  out.ledger.push_back({"bucket", mass0, mass1, n_buckets + 1});

  // (iii) common bucket.
  std::map<int, std::int64_t> by_bucket;
  for (std::size_t i = 0; i < n_points; ++i) {
    if (bucket_of[i] >= 0) by_bucket[bucket_of[i]] += bucket_mass[i];
  }
  if (by_bucket.empty()) throw RefinementError({"empty survivor set after bucketing"});
  const int j = heaviest(by_bucket);
  out.tube_exponent = j;
  std::vector<std::size_t> alive;
  std::int64_t mass2 = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    if (bucket_of[i] == j) {
      alive.push_back(i);
      mass2 += bucket_mass[i];
    }
  }
  out.ledger.push_back({"pigeonhole points", mass1, mass2, n_buckets});

  // (iv) prune Delta-tubes outside bucket j (and their delta-tubes).
  std::map<Tube, std::vector<std::size_t>> represented;
  std::map<Tube, std::int64_t> tube_mass;
  std::int64_t mass3 = 0;
  for (std::size_t i : alive) {
    for (const auto& [tube, n] : cover[i]) {
      if (dyadic_bucket(n) != j) continue;
      represented[tube].push_back(i);
      tube_mass[tube] += n;
      mass3 += n;
    }
  }
  out.ledger.push_back({"prune", mass2, mass3, 1.0});

  // (v) Delta-tubes by number of represented points.
  std::map<int, std::int64_t> by_rep;
  for (const auto& [tube, who] : represented) {
    by_rep[dyadic_bucket(static_cast<std::int64_t>(who.size()))] += tube_mass[tube];
  }
  const int i_exp = heaviest(by_rep);
  out.point_exponent = i_exp;
  std::set<Tube> chosen;
  std::int64_t mass4 = 0;
  for (const auto& [tube, who] : represented) {
    if (dyadic_bucket(static_cast<std::int64_t>(who.size())) != i_exp) continue;
    chosen.insert(tube);
    out.coarse_tubes.push_back(tube);
    out.tube_incidences.push_back(tube_mass[tube]);
    mass4 += tube_mass[tube];
  }
  const double rep_buckets = dyadic_bucket(static_cast<std::int64_t>(alive.size())) + 1;
  out.ledger.push_back({"pigeonhole coarse tubes", mass3, mass4, rep_buckets});

  for (std::size_t i : alive) {
    std::vector<Tube> fam;
    for (const auto& t : tubes_of[i]) {
      if (chosen.count(parent_at(t, coarse)) && dyadic_bucket(cover[i][parent_at(t, coarse)]) == j)
        fam.push_back(t);
    }
    if (fam.empty()) continue;
    out.kept.push_back(i);
    out.tubes_of.push_back(std::move(fam));
  }

  out.h = std::ldexp(1.0, i_exp + j);
  out.h_ratio = static_cast<double>(m) * n_points / out.coarse_tubes.size();
  out.spread = check_tube_spread(out.coarse_tubes, coarse, s, out.c2_budget);
  return out;
}

}  // namespace incidence

namespace incidence {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first
// exception (by index) is rethrown.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, n * w / workers, n * (w + 1) / workers);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Loss factor as a power of log(1/delta); gains count as 0.
double loss_power(double loss, Scale delta) {
  const double ll = std::log(std::max(delta.log_inverse(), std::exp(1.0)));
  return loss <= 1.0 ? 0.0 : std::log(loss) / ll;
}

}  // namespace

bool TwoScaleRefinement::pass() const {
  return !clauses.empty() &&
         std::all_of(clauses.begin(), clauses.end(), [](const ClauseCheck& c) { return c.pass; });
}

TwoScaleRefinement refine_two_scale(const Configuration& cfg, Scale coarse, double log_power,
                                    int threads) {
  if (!cfg.nice) throw RefinementError({"configuration has no niceness metadata"});
  if (cfg.points.empty()) throw RefinementError({"empty point set"});
  if (coarse.finer_than(cfg.delta)) throw RefinementError({"Delta finer than delta"});
  const Scale delta = cfg.delta;
  const double s = cfg.nice->s;
  const double c1 = cfg.nice->c;
  const std::int64_t m = cfg.nice->m;
  const int k_rel = delta.k - coarse.k;

  TwoScaleRefinement out;
  out.delta = delta;
  out.coarse = coarse;
  out.log_power = log_power;
  out.original_family = cfg.tube_family().size();

  std::map<Cube, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < cfg.points.size(); ++i) members[parent_at(cfg.points[i], coarse)].push_back(i);
  std::vector<Cube> squares0;
  for (const auto& [q, idx] : members) squares0.push_back(q);

  // Cover refinement inside every square.
  std::vector<CoverRefinement> local(squares0.size());
  parallel_for(squares0.size(), threads, [&](std::size_t qi) {
    const auto& idx = members[squares0[qi]];
    std::vector<Cube> pts;
    std::vector<std::vector<Tube>> fams;
    for (auto i : idx) {
      pts.push_back(cfg.points[i]);
      fams.push_back(cfg.tubes_of[i]);
    }
    local[qi] = refine_cover(pts, fams, delta, coarse, s, c1, m);
  });
  const std::int64_t mass0 = cfg.declared_incidences();
  std::int64_t mass1 = 0;
  for (const auto& r : local) mass1 += r.ledger.back().mass_after;
  double cover_budget = 1.0;
  for (const auto& r : local) {
    double b = 1.0;
    for (const auto& e : r.ledger) b *= e.budget;
    cover_budget = std::max(cover_budget, b);
  }
  out.ledger.push_back({"refine per square", mass0, mass1, cover_budget});

  // Squares pigeonholed on (|T_Delta(Q)| bucket, tube exponent).
  std::map<std::pair<int, int>, std::int64_t> classes;
  auto class_of = [&](const CoverRefinement& r) {
    return std::make_pair(dyadic_bucket(static_cast<std::int64_t>(r.coarse_tubes.size())),
                          r.tube_exponent);
  };
  for (const auto& r : local) classes[class_of(r)] += r.ledger.back().mass_after;
  std::pair<int, int> best_class{-1, -1};
  std::int64_t best_mass = -1;
  for (const auto& [key, mass] : classes) {
    if (mass >= best_mass) {
      best_class = key;
      best_mass = mass;
    }
  }
  std::vector<std::size_t> kept_squares;
  for (std::size_t qi = 0; qi < local.size(); ++qi) {
    if (class_of(local[qi]) == best_class) kept_squares.push_back(qi);
  }
  out.ledger.push_back({"pigeonhole squares", mass1, best_mass, static_cast<double>(classes.size())});

  // Common M_Delta: keep the first M_Delta coarse tubes of every square.
  std::size_t m_coarse = std::numeric_limits<std::size_t>::max();
  for (auto qi : kept_squares) m_coarse = std::min(m_coarse, local[qi].coarse_tubes.size());
  std::int64_t mass_trim = 0;
  double c_coarse = 0.0;
  struct SquareState {
    Cube q;
    std::vector<Tube> coarse_tubes;
    std::vector<std::size_t> point_index;  // into cfg.points
    std::vector<std::vector<Tube>> fams;
  };
  std::vector<SquareState> states;
  for (auto qi : kept_squares) {
    const auto& r = local[qi];
    SquareState st;
    st.q = squares0[qi];
    st.coarse_tubes.assign(r.coarse_tubes.begin(), r.coarse_tubes.begin() + m_coarse);
    const std::set<Tube> allowed(st.coarse_tubes.begin(), st.coarse_tubes.end());
    for (std::size_t a = 0; a < r.kept.size(); ++a) {
      std::vector<Tube> fam;
      for (const auto& t : r.tubes_of[a]) {
        if (allowed.count(parent_at(t, coarse))) fam.push_back(t);
      }
      if (fam.empty()) continue;
      mass_trim += static_cast<std::int64_t>(fam.size());
      st.point_index.push_back(members[st.q][r.kept[a]]);
      st.fams.push_back(std::move(fam));
    }
    c_coarse = std::max(c_coarse, check_tube_spread(st.coarse_tubes, coarse, s, 1.0).c_star);
    states.push_back(std::move(st));
  }
  out.ledger.push_back({"trim coarse families", best_mass, mass_trim, 2.0});

  // Packets: one tube per (delta/Delta)-slope cell for each p, rescaled.
  std::int64_t mass_packets = 0;
  std::int64_t mass_final = 0;
  double c_fine = 0.0;
  double best_fine_ratio = 0.0;
  for (auto& st : states) {
    const Homothety h{st.q};
    std::vector<std::vector<Tube>> images(st.fams.size());
    std::map<int, std::int64_t> by_size;
    for (std::size_t a = 0; a < st.fams.size(); ++a) {
      std::map<Tube, Tube> packet;  // image -> least delta-tube
      for (const auto& t : st.fams[a]) packet.emplace(h.apply_through(t, cfg.points[st.point_index[a]]), t);
      for (const auto& [img, t] : packet) images[a].push_back(img);
      mass_packets += static_cast<std::int64_t>(images[a].size());
      by_size[dyadic_bucket(static_cast<std::int64_t>(images[a].size()))] +=
          static_cast<std::int64_t>(images[a].size());
    }
    const int size_bucket = heaviest(by_size);
    std::size_t m_q = std::numeric_limits<std::size_t>::max();
    for (const auto& img : images) {
      if (dyadic_bucket(static_cast<std::int64_t>(img.size())) == size_bucket) m_q = std::min(m_q, img.size());
    }
    Configuration local_cfg;
    local_cfg.delta = Scale{k_rel};
    SquareState kept;
    kept.q = st.q;
    kept.coarse_tubes = st.coarse_tubes;
    double c_q = 0.0;
    for (std::size_t a = 0; a < images.size(); ++a) {
      if (dyadic_bucket(static_cast<std::int64_t>(images[a].size())) != size_bucket) continue;
      std::vector<Tube> img(images[a].begin(), images[a].begin() + m_q);
      c_q = std::max(c_q, check_tube_spread(img, Scale{k_rel}, s, 1.0).c_star);
      local_cfg.points.push_back(h.apply(cfg.points[st.point_index[a]]));
      local_cfg.tubes_of.push_back(std::move(img));
      kept.point_index.push_back(st.point_index[a]);
      kept.fams.push_back(st.fams[a]);
      mass_final += static_cast<std::int64_t>(st.fams[a].size());
    }
    local_cfg.nice = Niceness{s, c_q, static_cast<std::int64_t>(m_q), std::nullopt};
    c_fine = std::max(c_fine, c_q);
    best_fine_ratio = std::max(best_fine_ratio,
                               static_cast<double>(local_cfg.tube_family().size()) / m_q);
    out.per_square.push_back(std::move(local_cfg));
    st = std::move(kept);
  }
  out.ledger.push_back({"pigeonhole packet counts", mass_trim, mass_final, 2.0 * k_rel + 2});

  out.coarse_cfg.delta = coarse;
  for (const auto& st : states) {
    out.coarse_cfg.points.push_back(st.q);
    out.coarse_cfg.tubes_of.push_back(st.coarse_tubes);
    for (std::size_t a = 0; a < st.point_index.size(); ++a) {
      out.kept.push_back(st.point_index[a]);
      out.tubes_of.push_back(st.fams[a]);
    }
  }
  out.coarse_cfg.nice = Niceness{s, c_coarse, static_cast<std::int64_t>(m_coarse), std::nullopt};

  out.coarse_family = out.coarse_cfg.tube_family().size();
  out.lhs = static_cast<double>(out.original_family) / m;
  out.rhs = static_cast<double>(out.coarse_family) / m_coarse * best_fine_ratio;

  // Clauses.
  double square_loss = static_cast<double>(squares0.size()) / states.size();
  for (const auto& st : states) {
    square_loss = std::max(square_loss, static_cast<double>(members[st.q].size()) / st.point_index.size());
  }
  std::size_t min_family = std::numeric_limits<std::size_t>::max();
  for (const auto& fam : out.tubes_of) min_family = std::min(min_family, fam.size());
  const double fam_loss = static_cast<double>(m) / min_family;
  auto add = [&](std::string name, double loss, bool structural) {
    const double power = loss_power(loss, delta);
    out.clauses.push_back({std::move(name), structural && power <= log_power + kTol, power, log_power});
  };
  add("(1) squares and points per square retained", square_loss, true);
  add("(2) |T(p)| retained", fam_loss, true);
  add("(3) coarse configuration nice, C_Delta / C1", c_coarse / c1, validate(out.coarse_cfg).empty());
  bool fine_ok = true;
  for (const auto& lc : out.per_square) fine_ok = fine_ok && validate(lc).empty();
  add("(4) rescaled configurations nice, max C_Q / C1", c_fine / c1, fine_ok);
  add("product inequality", out.rhs / out.lhs, true);
  return out;
}

}  // namespace incidence

namespace incidence {

namespace {

void require_regular_metadata(const Configuration& cfg, const char* who) {
  if (!cfg.nice || !cfg.nice->t) {
    throw std::invalid_argument(std::string(who) + ": configuration lacks (s, t) certification");
  }
  if (!cfg.delta.has_dyadic_sqrt()) {
    throw std::invalid_argument(std::string(who) + ": odd scale exponent");
  }
}

std::int64_t floor_div64(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

Cube swap_axes(const Cube& c) { return Cube{c.k, c.iy, c.ix}; }

}  // namespace

DichotomyReport dichotomy_check(const Configuration& cfg, double eps) {
  require_regular_metadata(cfg, "dichotomy_check");
  const double s = cfg.nice->s;
  const double log_inv = cfg.delta.log_inverse();
  const auto family = cfg.tube_family();
  DichotomyReport r;
  r.fine_count = family.size();
  r.coarse_count = cover_tubes(family, cfg.delta.sqrt()).size();
  if (r.coarse_count > r.fine_count) {
    throw std::logic_error("dichotomy_check: coarse cover larger than the family");
  }
  r.fine_exponent = std::log(static_cast<double>(r.fine_count)) / log_inv;
  r.coarse_exponent = std::log(static_cast<double>(r.coarse_count)) / log_inv;
  r.fine_threshold = std::exp((2 * s + eps) * log_inv);
  r.coarse_threshold = std::exp((s + eps) * log_inv);
  r.branch_fine = static_cast<double>(r.fine_count) >= r.fine_threshold * (1 - kTol);
  r.branch_coarse = static_cast<double>(r.coarse_count) >= r.coarse_threshold * (1 - kTol);
  return r;
}

ExtractionReport extract_product_structure(const Configuration& cfg, const ExtractionOptions& options) {
  require_regular_metadata(cfg, "extract_product_structure");
  const double s = cfg.nice->s;
  const double t = *cfg.nice->t;
  const double c = options.c.value_or(cfg.nice->c);
  const int k = cfg.delta.k;
  const int h = k / 2;
  const Scale half{h};
  ExtractionReport out;
  auto fail = [&](std::string stage, std::string detail) {
    out.failed_stage = std::move(stage);
    out.detail = std::move(detail);
    return out;
  };

  // Heavy squares.
  std::map<Cube, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < cfg.points.size(); ++i) members[parent_at(cfg.points[i], half)].push_back(i);
  const double heavy = std::exp((t / 2 - 5 * options.eps) * cfg.delta.log_inverse());
  std::vector<Cube> heavy_squares;
  std::size_t largest = 0;
  for (const auto& [q, idx] : members) {
    largest = std::max(largest, idx.size());
    if (static_cast<double>(idx.size()) >= heavy * (1 - kTol)) heavy_squares.push_back(q);
  }
  out.heavy_squares = heavy_squares.size();
  if (heavy_squares.empty()) {
    std::ostringstream os;
    os << "largest square holds " << largest << " points, threshold " << heavy;
    return fail("heavy squares", os.str());
  }

  // Direction pruning per heavy square.
  std::map<Cube, std::set<Tube>> kept_directions;
  for (const auto& q : heavy_squares) {
    std::vector<Tube> fans;
    for (auto i : members[q]) fans.insert(fans.end(), cfg.tubes_of[i].begin(), cfg.tubes_of[i].end());
    const auto dirs = direction_set(q, sorted_unique(std::move(fans)), s, c);
    const auto pruned = prune_bad_directions(q, dirs.directions, cfg.points, s, c, options.typical_fraction);
    if (!pruned.pass) continue;
    kept_directions[q] = std::set<Tube>(pruned.kept.begin(), pruned.kept.end());
  }
  out.typical_squares = kept_directions.size();
  if (kept_directions.empty()) {
    return fail("direction pruning", "no heavy square keeps the required share of directions");
  }

  // Candidate delta^{1/2}-tubes through typical squares along kept directions.
  std::map<Tube, std::set<Cube>> squares_of;
  for (const auto& [q, dirs] : kept_directions) {
    for (auto i : members[q]) {
      for (const auto& tube : cfg.tubes_of[i]) {
        const Tube coarse = parent_at(tube, half);
        const Tube dir{Cube{h, coarse.param.ix, 0}, coarse.orientation};
        if (dirs.count(dir)) squares_of[coarse].insert(q);
      }
    }
  }
  std::vector<std::pair<Tube, std::size_t>> ranked;
  for (const auto& [tube, qs] : squares_of) ranked.emplace_back(tube, qs.size());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  auto along = [](const Tube& tube, const Cube& q) {
    return tube.orientation == Orientation::standard ? q.ix : q.iy;
  };
  for (const auto& [tube, n] : ranked) {
    std::vector<Cube> positions;
    for (const auto& q : squares_of[tube]) positions.push_back(Cube{h, along(tube, q), 0});
    const auto spread = check_spread(sorted_unique(std::move(positions)), half, t - s, c);
    if (spread.pass) {
      out.tube = tube;
      out.tube_squares = n;
      out.column_spread = spread;
      break;
    }
    ++out.bad_tubes;
  }
  if (!out.tube) {
    return fail("typical tube", "every candidate tube concentrates its squares (" +
                                    std::to_string(out.bad_tubes) + " candidates)");
  }

  // Projection along the tube and horizontal rescaling. Work in the frame
  // where the tube is standard; v = y - a x is the coordinate across it.
  const Tube big = *out.tube;
  const bool standard = big.orientation == Orientation::standard;
  const std::int64_t a_big = big.param.ix;
  const std::int64_t b_big = big.param.iy;
  std::map<Cube, std::set<Tube>> fans;
  for (const auto& q : squares_of[big]) {
    for (auto i : members[q]) {
      const Cube p = standard ? cfg.points[i] : swap_axes(cfg.points[i]);
      const std::int64_t num = (2 * p.iy + 1) * (std::int64_t{1} << h) - a_big * (2 * p.ix + 1) -
                               b_big * (std::int64_t{1} << (2 * h + 1));
      const Cube pp{h, floor_div64(num, std::int64_t{1} << (h + 1)), along(big, q)};
      for (const auto& tube : cfg.tubes_of[i]) {
        if (parent_at(tube, half) != big) continue;
        const std::int64_t slope = tube.param.ix - (a_big << h);
        fans[pp].insert(tube_through(pp, slope, h, Orientation::alternate));
      }
    }
  }
  out.product.delta = half;
  std::vector<Tube> family;
  for (auto& [pp, fan] : fans) {
    out.product.points.push_back(pp);
    out.product.tubes_of.emplace_back(fan.begin(), fan.end());
    family.insert(family.end(), fan.begin(), fan.end());
  }
  family = sorted_unique(std::move(family));

  // The three properties.
  out.budget = log_budget(half, 2.0);
  std::map<std::int64_t, std::vector<Cube>> rows;
  for (const auto& pp : out.product.points) rows[pp.iy].push_back(Cube{h, pp.ix, 0});
  bool rows_ok = true;
  for (auto& [y, row] : rows) {
    const auto rep = check_spread(row, half, s, c);
    rows_ok = rows_ok && rep.pass;
    if (rep.c_star >= out.row_spread.c_star) out.row_spread = rep;
  }
  out.min_fan = std::numeric_limits<std::size_t>::max();
  for (const auto& fan : out.product.tubes_of) {
    out.min_fan = std::min(out.min_fan, fan.size());
    out.max_fan = std::max(out.max_fan, fan.size());
  }
  out.fan_target = std::pow(half.value(), -s);
  out.family_ratio = static_cast<double>(family.size()) / std::pow(half.value(), -2 * s);
  out.properties_hold = rows_ok && out.column_spread.pass &&
                        static_cast<double>(out.min_fan) * out.budget >= out.fan_target &&
                        static_cast<double>(out.max_fan) <= out.budget * out.fan_target &&
                        out.family_ratio <= out.budget;

  // Dual pair: a fan tube x = a y + b through (x0, y0) is a point (a, b) on
  // the line b + y0 a = x0.
  for (const auto& tube : family) out.dual_points.push_back(tube.param);
  std::size_t worst = 0;
  for (const auto& [y, row] : rows) {
    const Direction e{y, h, true};
    out.dual_directions.push_back(e);
    out.dual_covers.push_back(projection_covering(out.dual_points, e, half));
    worst = std::max(worst, out.dual_covers.back());
  }
  out.dual_exponent = worst == 0 ? 0.0 : std::log(static_cast<double>(worst)) / half.log_inverse();
  out.ok = true;
  return out;
}

}  // namespace incidence
