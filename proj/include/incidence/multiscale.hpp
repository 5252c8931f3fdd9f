#pragma once

// Branching-function decomposition into structured and bad scales, the
// multiscale product bound, tube-cover refinement and the two-scale
// induction step, and the dichotomy / product-structure probes for regular
// configurations.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "incidence/dyadic.hpp"
#include "incidence/incidence.hpp"
#include "incidence/projections.hpp"
#include "incidence/spread.hpp"

namespace incidence {

/// Chord of f over [a, b]: L(x) = f(a) + slope (x - a).
struct LinearApprox {
  double a = 0.0;
  double b = 0.0;
  double slope = 0.0;
  double intercept = 0.0;  // f(a) - slope a

  double operator()(double x) const { return intercept + slope * x; }
};

/// Throws std::invalid_argument if a >= b or [a, b] leaves [0, m].
LinearApprox linear_approx(const BranchingFunction& f, double a, double b);

/// |f - L| <= eps (b - a) on [a, b], evaluated at a, b and the integer
/// breakpoints in between.
bool is_eps_linear(const BranchingFunction& f, double a, double b, double eps);
/// f >= L - eps (b - a) on [a, b], same evaluation points.
bool is_eps_superlinear(const BranchingFunction& f, double a, double b, double eps);

enum class Alternative {
  linear,       // eps-linear, chord slope >= s
  superlinear,  // eps-superlinear, chord slope >= s
};

struct StructuredInterval {
  int c = 0;
  int d = 0;
  Alternative kind = Alternative::linear;
  double slope = 0.0;

  int length() const { return d - c; }
};

struct Decomposition {
  std::vector<StructuredInterval> intervals;  // sorted, non-overlapping
  int m = 0;
  double s = 0.0;
  double t = 0.0;
  double eps = 0.0;
  double tau = 0.0;         // shortest interval / m
  int gap_length = 0;       // |[0,m] minus the union|
  double k_st = 0.0;        // gap_length / (eps m); 0 when there is no gap

  int covered_length() const { return m - gap_length; }
};

/// Hypothesis violations or a failed clause check; what() lists them all.
class DecompositionError : public std::invalid_argument {
 public:
  explicit DecompositionError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Greedy left-to-right scan over integer endpoints: from each start c the
/// longest [c, d] whose chord slope is >= s and which is eps-superlinear is
/// taken; intervals that are also eps-linear are labelled linear. Starts
/// with no admissible interval become gap. Requires f 2-Lipschitz,
/// f(0) = 0, f(m) >= (t - eps) m and s < t.
Decomposition decompose(const BranchingFunction& f, double s, double t, double eps);

/// A priori bound K with gap_length <= K eps m: the hypotheses give
/// f(x) >= t x - 2 eps m, so a stretch where f grows slower than s has
/// length at most 2 eps m / (t - s). The scale clauses built from a
/// decomposition are checked with eps replaced by K eps.
inline double gap_constant(double s, double t) { return 2.0 / (t - s); }

enum class ScaleClass : char {
  structured = 'S',
  bad = 'B',
  normal = 'N',
  good = 'G',
};

struct ClauseCheck {
  std::string clause;
  bool pass = false;
  double lhs = 0.0;  // in base-level units (log_{1/Delta})
  double rhs = 0.0;
};

/// Scales Delta_j = base^{levels[j]}, levels[0] = 0 < ... < levels[n] = m.
struct ScaleDecomposition {
  Scale base;
  int m = 0;
  double s = 0.0;
  double t = 0.0;
  double eps = 0.0;
  double tau = 0.0;
  std::vector<int> levels;
  std::vector<double> exponents;  // t_j for index j (at j-1); 0 for bad indices
  std::vector<ScaleClass> classes;
  std::vector<bool> regular;      // interval came from the linear alternative
  std::vector<ClauseCheck> clauses;

  int n() const { return static_cast<int>(classes.size()); }
  Scale delta() const { return Scale{base.k * m}; }
  Scale scale(int j) const { return Scale{base.k * levels.at(j)}; }
  /// log(Delta_{j-1} / Delta_j), natural log.
  double log_ratio(int j) const;
  bool verified() const;
};

/// Recomputes the four clauses: (1a) ratio >= delta^-tau on structured
/// indices, (1b) product over bad ratios <= delta^-eps, (3) product of
/// ratio^{t_j} over structured indices >= delta^{eps - t}, (4) no two
/// consecutive bad indices.
std::vector<ClauseCheck> check_clauses(const ScaleDecomposition& d);

/// Structured intervals become structured indices, gaps between them become
/// single bad indices. Throws DecompositionError naming the failed clauses.
ScaleDecomposition scales_from_decomposition(const Decomposition& dec, Scale base, double eps);

/// Splits structured indices into good (regular with t_j >= good_threshold)
/// and normal.
ScaleDecomposition classify(ScaleDecomposition d, double good_threshold);

struct MultiscaleParams {
  std::optional<double> c_log;     // C
  std::optional<double> c_prime;   // C'
  std::optional<double> lambda;
  std::optional<double> eps_n;
  std::optional<double> eta;
};

/// log(1/delta)^{-C} M delta^{C' lambda} delta^{-s + eps_N}
///   prod_G ratio^eta prod_B ratio^{-1}, as a natural log.
/// Throws on missing parameters or unclassified (structured) indices.
double log_multiscale_bound(const ScaleDecomposition& d, double m, const MultiscaleParams& p);
double multiscale_bound(const ScaleDecomposition& d, double m, const MultiscaleParams& p);

struct LedgerEntry {
  std::string stage;
  std::int64_t mass_before = 0;  // declared incidences (p, T)
  std::int64_t mass_after = 0;
  double budget = 1.0;           // guaranteed retention is at least 1 / budget
};

class RefinementError : public std::invalid_argument {
 public:
  explicit RefinementError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Output of the cover refinement for families T(p) of delta-tubes.
struct CoverRefinement {
  Scale delta;
  Scale coarse;                              // Delta
  std::vector<std::size_t> kept;             // indices of P bar in the input
  std::vector<std::vector<Tube>> tubes_of;   // refined T(p), parallel to kept
  std::vector<Tube> coarse_tubes;            // T bar_Delta, sorted
  std::vector<std::int64_t> tube_incidences; // per coarse tube, parallel
  int tube_exponent = 0;   // every kept Delta-tube of p holds (2^(j-1), 2^j] of T(p)
  int point_exponent = 0;  // every kept Delta-tube represents (2^(i-1), 2^i] points
  double h = 0.0;          // 2^i 2^j
  double h_ratio = 0.0;    // M |P| / |T bar_Delta|
  double c1 = 0.0;
  double c2_budget = 0.0;  // log^5(1/Delta) C1
  SpreadReport spread;     // T bar_Delta at exponent s against c2_budget
  std::vector<LedgerEntry> ledger;
  std::size_t input_points = 0;

  std::int64_t min_tube_incidences() const;
  double mass_retention() const;   // final / initial incidences
  double point_retention() const;  // |P bar| / |P|
  /// Spread certified, every coarse tube has >= H/8 incidences and both
  /// retentions are >= log^-5(1/Delta).
  bool pass() const;
};

/// Five stages: minimal Delta-cover of each T(p); per-p choice of the dyadic
/// bucket 2^(j-1) < n <= 2^j (over c_low M Delta^2 <= 2^j) holding the most
/// delta-tubes; points pigeonholed onto the most massive common j; delta-tubes
/// outside the chosen Delta-tubes pruned; Delta-tubes pigeonholed by the
/// number of points they represent. Ties go to the larger exponent.
/// Requires every T(p) to be a (delta,s,C1)-set of size in [M/2, M].
CoverRefinement refine_cover(std::span<const Cube> points,
                             const std::vector<std::vector<Tube>>& tubes_of, Scale delta,
                             Scale coarse, double s, double c1, std::int64_t m,
                             double c_low = 0.125);

/// The naive cover: every Delta-parent of every tube of every T(p).
std::vector<Tube> naive_cover(const std::vector<std::vector<Tube>>& tubes_of, Scale coarse);

struct TwoScaleRefinement {
  Scale delta;
  Scale coarse;
  std::vector<std::size_t> kept;            // indices of P in cfg.points
  std::vector<std::vector<Tube>> tubes_of;  // refined T(p), parallel to kept
  /// (D_Delta(P), T_Delta) with niceness metadata (s, C_Delta, M_Delta).
  Configuration coarse_cfg;
  /// (S_Q(P cap Q), T_Q) per square of coarse_cfg, metadata (s, C_Q, M_Q).
  std::vector<Configuration> per_square;
  std::size_t original_family = 0;  // |T_0|
  std::size_t coarse_family = 0;    // |T_Delta|, the family of coarse_cfg
  double lhs = 0.0;                 // |T_0| / M
  double rhs = 0.0;                 // |T_Delta| / M_Delta * max_Q |T_Q| / M_Q
  double log_power = 0.0;           // allowed losses are log(1/delta)^log_power
  std::vector<LedgerEntry> ledger;
  /// (1)..(4) and the product inequality. lhs is the measured loss written
  /// as a power of log(1/delta), rhs the allowed power.
  std::vector<ClauseCheck> clauses;

  bool pass() const;
};

/// Runs refine_cover inside every Delta-square (in parallel), keeps the
/// squares of the most massive (|T_Delta(Q)| bucket, tubes-per-coarse-tube
/// bucket) class, trims every T_Delta(Q) to a common size M_Delta, and builds
/// T_Q from one tube per (delta/Delta)-packet rescaled through S_Q.
/// Requires niceness metadata and Delta no finer than delta.
TwoScaleRefinement refine_two_scale(const Configuration& cfg, Scale coarse,
                                    double log_power = 5.0, int threads = 1);

struct DichotomyReport {
  std::size_t fine_count = 0;    // |T|_delta
  std::size_t coarse_count = 0;  // |T|_{delta^{1/2}}
  double fine_exponent = 0.0;    // log|T|_delta / log(1/delta)
  double coarse_exponent = 0.0;
  double fine_threshold = 0.0;   // delta^{-2s-eps}
  double coarse_threshold = 0.0; // delta^{-s-eps}
  bool branch_fine = false;
  bool branch_coarse = false;

  bool any() const { return branch_fine || branch_coarse; }
};

/// Requires niceness metadata with t and an even scale exponent. Throws
/// std::logic_error if the coarse count ever exceeds the fine one.
DichotomyReport dichotomy_check(const Configuration& cfg, double eps);

struct ExtractionOptions {
  double eps = 0.0;
  double typical_fraction = 0.5;  // surviving share of directions in a square
  std::optional<double> c;        // spread constant; niceness C by default
};

/// Product configuration read off one delta^{1/2}-tube. On failure
/// failed_stage is one of "heavy squares", "direction pruning",
/// "typical tube" and detail says why.
struct ExtractionReport {
  bool ok = false;
  std::string failed_stage;
  std::string detail;
  std::size_t heavy_squares = 0;    // |P cap Q| >= delta^{-t/2 + 5 eps}
  std::size_t typical_squares = 0;  // heavy and passing direction pruning
  std::size_t bad_tubes = 0;        // candidates whose squares are not (t-s)-spread
  std::optional<Tube> tube;
  std::size_t tube_squares = 0;

  /// P'' at scale delta^{1/2}: x is the rescaled projection along the tube,
  /// y the position of the square along it; fans are alternate tubes.
  Configuration product;
  double budget = 0.0;              // (log 1/delta^{1/2})^2
  SpreadReport column_spread;       // rows, at (delta^{1/2}, t - s)
  SpreadReport row_spread;          // worst row, at (delta^{1/2}, s)
  std::size_t min_fan = 0;
  std::size_t max_fan = 0;
  double fan_target = 0.0;          // delta^{-s/2}
  double family_ratio = 0.0;        // |union of fans| / delta^{-s}
  bool properties_hold = false;

  /// Dual pair: the fans' parameter cubes and, for every row y, the
  /// covering number of their projection b + y a.
  std::vector<Cube> dual_points;
  std::vector<Direction> dual_directions;
  std::vector<std::size_t> dual_covers;
  double dual_exponent = 0.0;       // log max cover / log(1/delta^{1/2})
};

/// Heavy squares, direction pruning in each (via prune_bad_directions), the
/// delta^{1/2}-tube meeting the most typical squares among those whose
/// squares are (t-s)-spread along it, then projection along the tube and
/// horizontal rescaling. Requires niceness metadata with t and an even
/// scale exponent.
ExtractionReport extract_product_structure(const Configuration& cfg,
                                           const ExtractionOptions& options = {});

}  // namespace incidence
