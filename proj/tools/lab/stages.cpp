#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "runner.hpp"

namespace lab {

using namespace incidence;

namespace {

std::int64_t draw(std::mt19937_64& rng, std::int64_t n) {
  return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
}

double max_fan_c_star(const Configuration& cfg, double s, double c) {
  double worst = 0;
  for (const auto& fan : cfg.tubes_of) worst = std::max(worst, check_tube_spread(fan, cfg.delta, s, c).c_star);
  return worst;
}

void append_ledger(json& ledger, const std::string& prefix, const std::vector<LedgerEntry>& entries) {
  for (const auto& e : entries) {
    auto j = to_json(e);
    j["stage"] = prefix + e.stage;
    ledger.push_back(std::move(j));
  }
}

StageResult cantor_target_stage(Params& p, const StageContext&) {
  const double s = p.get<double>("s");
  const double t = p.get<double>("t");
  const auto ks = p.list<int>("k");
  const auto tol = p.maybe<double>("tolerance");
  StageResult r;
  Table cov{"covering", {"k", "j", "rho", "covering_number"}, {}};
  Series reg{"dimension_regression", "log2(1/delta)", "slope", {}};
  json per = json::array();
  for (int k : ks) {
    const auto ct = cantor_target(s, t, Scale{k});
    Series curve{"covering_k" + std::to_string(k), "log(1/rho)", "log(N)", {}};
    for (const auto& [j, n] : ct.fit.counts) {
      cov.rows.push_back({k, j, std::ldexp(1.0, -j), n});
      curve.points.emplace_back(j * std::numbers::ln2, std::log(static_cast<double>(n)));
    }
    const bool ok = !tol || std::abs(ct.fit.slope - (s + t)) <= *tol;
    r.pass = r.pass && ok;
    per.push_back({{"k", k},
                   {"cubes", ct.cubes.size()},
                   {"slope", ct.fit.slope},
                   {"intercept", ct.fit.intercept},
                   {"error", ct.fit.slope - (s + t)},
                   {"pass", ok}});
    reg.points.emplace_back(k, ct.fit.slope);
    r.series.push_back(std::move(curve));
  }
  r.summary = {{"s", s}, {"t", t}, {"target", s + t}, {"per_scale", per}};
  if (tol) r.summary["tolerance"] = *tol;
  r.tables.push_back(std::move(cov));
  r.series.insert(r.series.begin(), std::move(reg));
  return r;
}

StageResult elementary_st_stage(Params& p, const StageContext& ctx) {
  const auto instances = p.get<int>("instances");
  const auto max_points = p.get<std::int64_t>("max_points");
  const auto max_lines = p.get<std::int64_t>("max_lines");
  const auto grid = p.get<int>("grid");
  const auto budget = p.get<double>("budget");
  if (max_points < 1 || max_lines < 1) throw ConfigError("elementary_st: sizes must be positive");
  std::mt19937_64 rng(ctx.seed);
  StageResult r;
  Table t{"bounds",
          {"instance", "points", "lines", "incidences", "rhs_lines", "rhs_points", "rhs_st", "pass_lines",
           "pass_points", "pass_st", "dual_swap"},
          {}};
  std::size_t failures = 0, swaps = 0;
  double worst_slack = 0;
  for (int i = 0; i < instances; ++i) {
    const auto np = static_cast<std::size_t>(1 + draw(rng, max_points));
    const auto nl = static_cast<std::size_t>(1 + draw(rng, max_lines));
    const auto inst = random_point_line_instance(np, nl, grid, rng);
    const auto a = check_elementary_st(inst.points, inst.lines, budget);
    std::vector<Point> dual_points;
    std::vector<Line> dual_lines;
    for (const auto& l : inst.lines) dual_points.push_back(dualize(l));
    for (const auto& q : inst.points) dual_lines.push_back(dualize(q, Orientation::standard));
    const auto b = check_elementary_st(dual_points, dual_lines, budget);
    const bool swap = a[0].lhs == b[0].lhs && a[0].rhs() == b[1].rhs() && a[1].rhs() == b[0].rhs() &&
                      a[0].pass == b[1].pass && a[1].pass == b[0].pass;
    const bool ok = a[0].pass && a[1].pass && a[2].pass;
    failures += !ok;
    swaps += swap;
    for (const auto& rep : a) worst_slack = std::max(worst_slack, rep.slack);
    const std::set<Point> ps(inst.points.begin(), inst.points.end());
    const std::set<Line> ls(inst.lines.begin(), inst.lines.end());
    t.rows.push_back({i, ps.size(), ls.size(), a[0].lhs, a[0].rhs(), a[1].rhs(), a[2].rhs(), a[0].pass, a[1].pass,
                      a[2].pass, swap});
  }
  r.pass = failures == 0 && swaps == static_cast<std::size_t>(instances);
  r.summary = {{"instances", instances}, {"budget", budget}, {"failures", failures},
               {"dual_swaps", swaps}, {"worst_slack", worst_slack}};
  r.tables.push_back(std::move(t));
  return r;
}

StageResult discretized_st_stage(Params& p, const StageContext& ctx) {
  const auto instances = p.get<int>("instances");
  const auto ks = p.list<int>("k");
  const auto ss = p.list<double>("s");
  const auto t_offset = p.get<double>("t_offset");
  const auto c = p.get<double>("c");
  const auto m_factor = p.get<double>("m_factor");
  const auto log_power = p.get<double>("log_power");
  const auto slack = p.maybe<double>("exponent_slack");
  const auto full_fraction = p.get_or<double>("full_fan_fraction", 0.125);
  StageResult r;
  Table t{"bounds",
          {"instance", "k", "s", "t", "m", "points", "tubes", "incidences", "st_rhs", "st_slack", "st_pass",
           "floor", "floor_pass", "exponent", "exponent_checked", "exponent_pass"},
          {}};
  Series curve{"tube_exponent", "log2(1/delta)", "log|T|/log(1/delta)", {}};
  std::size_t st_fail = 0, floor_fail = 0, exp_fail = 0;
  for (int i = 0; i < instances; ++i) {
    const int k = ks[i % ks.size()];
    const double s = ss[(i / ks.size()) % ss.size()];
    const double fan = std::pow(2.0, k * s);
    const auto m = std::max<std::int64_t>(1, std::llround(m_factor * fan));
    const auto cfg = nice_random(Scale{k}, s, s + t_offset, c, m, ctx.seed + i);
    const auto st = check_discretized_st(cfg, log_power);
    const auto tc = check_tube_count(cfg, log_power);
    const bool checked = slack && static_cast<double>(m) >= full_fraction * fan;
    const bool exp_ok = !checked || tc.exponent >= 2 * s - *slack;
    st_fail += !st.pass;
    floor_fail += !tc.bound.pass;
    exp_fail += !exp_ok;
    t.rows.push_back({i, k, s, s + t_offset, m, cfg.points.size(), tc.tube_count, st.lhs, st.rhs(), st.slack,
                      st.pass, tc.lower_bound, tc.bound.pass, tc.exponent, checked, exp_ok});
    curve.points.emplace_back(k, tc.exponent);
  }
  r.pass = st_fail == 0 && floor_fail == 0 && exp_fail == 0;
  r.summary = {{"instances", instances},   {"log_power", log_power},   {"st_failures", st_fail},
               {"floor_failures", floor_fail}, {"exponent_failures", exp_fail}};
  if (slack) r.summary["exponent_slack"] = *slack;
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(curve));
  return r;
}

StageResult count_oracle_stage(Params& p, const StageContext& ctx) {
  const auto instances = p.get<int>("instances");
  const auto k = p.get<int>("k");
  const auto max_product = p.get<std::int64_t>("max_product");
  if (max_product < 1) throw ConfigError("count_oracle: max_product must be positive");
  std::mt19937_64 rng(ctx.seed);
  const std::int64_t n = std::int64_t{1} << k;
  StageResult r;
  Table t{"counts", {"instance", "points", "tubes", "accelerated", "brute_force", "equal"}, {}};
  std::size_t mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    const auto np = 1 + draw(rng, std::min<std::int64_t>(1000, max_product));
    const auto nt = 1 + draw(rng, max_product / np);
    std::vector<Cube> points;
    std::vector<Tube> tubes;
    for (std::int64_t j = 0; j < np; ++j) points.push_back(Cube{k, draw(rng, n), draw(rng, n)});
    for (std::int64_t j = 0; j < nt; ++j) {
      const Cube param{k, draw(rng, 2 * n) - n, draw(rng, 3 * n) - n};
      tubes.push_back(Tube{param, draw(rng, 2) ? Orientation::alternate : Orientation::standard});
    }
    const auto fast = count_meeting_pairs(points, tubes, ctx.threads);
    const auto brute = count_meeting_pairs_brute(points, tubes);
    mismatches += fast != brute;
    t.rows.push_back({i, np, nt, fast, brute, fast == brute});
  }
  r.pass = mismatches == 0;
  r.summary = {{"instances", instances}, {"k", k}, {"mismatches", mismatches}};
  r.tables.push_back(std::move(t));
  return r;
}

struct NiceSpec {
  int k;
  double s, t, c;
  std::int64_t m;
};

NiceSpec nice_spec(Params& p) {
  return NiceSpec{p.get<int>("k"), p.get<double>("s"), p.get<double>("t"), p.get<double>("c"),
                  p.get<std::int64_t>("m")};
}

StageResult refine_cover_stage(Params& p, const StageContext& ctx) {
  const auto configs = p.get<int>("configs");
  const auto spec = nice_spec(p);
  const Scale coarse{p.get<int>("coarse")};
  StageResult r;
  Table t{"refinements",
          {"config", "points", "kept_points", "c1", "c2", "c2_budget", "h", "min_tube_incidences",
           "mass_retention", "point_retention", "retention_floor", "pass"},
          {}};
  Series ret{"mass_retention", "config", "retention", {}};
  std::size_t failures = 0;
  for (int i = 0; i < configs; ++i) {
    const auto cfg = nice_random(Scale{spec.k}, spec.s, spec.t, spec.c, spec.m, ctx.seed + i);
    const double c1 = max_fan_c_star(cfg, spec.s, spec.c);
    const auto ref = refine_cover(cfg.points, cfg.tubes_of, cfg.delta, coarse, spec.s, c1, spec.m);
    const bool ok = ref.pass();
    failures += !ok;
    t.rows.push_back({i, cfg.points.size(), ref.kept.size(), c1, ref.spread.c_star, ref.c2_budget, ref.h,
                      ref.min_tube_incidences(), ref.mass_retention(), ref.point_retention(),
                      1.0 / log_budget(coarse, 5.0), ok});
    ret.points.emplace_back(i, ref.mass_retention());
    append_ledger(r.ledger, "config " + std::to_string(i) + ": ", ref.ledger);
  }
  r.pass = failures == 0;
  r.summary = {{"configs", configs}, {"coarse_exp", coarse.k}, {"failures", failures}};
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(ret));
  return r;
}

StageResult cover_counterexample_stage(Params&, const StageContext&) {
  const auto cc = cover_counterexample();
  const auto& cfg = cc.cfg;
  const double s = cfg.nice->s;
  const auto naive = naive_cover(cfg.tubes_of, cc.coarse);
  const auto naive_spread = check_tube_spread(naive, cc.coarse, s, cc.c1);
  const auto ref = refine_cover(cfg.points, cfg.tubes_of, cfg.delta, cc.coarse, s, cc.c1, cfg.nice->m);
  const auto refined_spread = check_tube_spread(ref.coarse_tubes, cc.coarse, s, cc.c1);
  StageResult r;
  r.pass = ref.pass() && refined_spread.pass && !naive_spread.pass;
  r.summary = {{"c1", cc.c1},
               {"naive_tubes", naive.size()},
               {"naive_spread", to_json(naive_spread)},
               {"refined_tubes", ref.coarse_tubes.size()},
               {"refined_spread", to_json(refined_spread)},
               {"mass_retention", ref.mass_retention()},
               {"refinement_pass", ref.pass()}};
  append_ledger(r.ledger, "", ref.ledger);
  r.instance = cfg;
  return r;
}

StageResult refine_two_scale_stage(Params& p, const StageContext& ctx) {
  const auto configs = p.get<int>("configs");
  const auto spec = nice_spec(p);
  const Scale coarse{p.get<int>("coarse")};
  const auto log_power = p.get<double>("log_power");
  const auto degenerate = p.get_or<bool>("degenerate", false);
  StageResult r;
  Table runs{"refinements",
             {"config", "coarse_exp", "points", "kept_points", "squares", "original_family", "coarse_family",
              "lhs", "rhs", "pass"},
             {}};
  Table clauses{"clauses", {"config", "coarse_exp", "clause", "lhs", "rhs", "pass"}, {}};
  std::size_t failures = 0;
  auto record = [&](int i, const Configuration& cfg, Scale delta_big) {
    const auto res = refine_two_scale(cfg, delta_big, log_power, ctx.threads);
    failures += !res.pass();
    runs.rows.push_back({i, delta_big.k, cfg.points.size(), res.kept.size(), res.per_square.size(),
                         res.original_family, res.coarse_family, res.lhs, res.rhs, res.pass()});
    for (const auto& cl : res.clauses) clauses.rows.push_back({i, delta_big.k, cl.clause, cl.lhs, cl.rhs, cl.pass});
    append_ledger(r.ledger, "config " + std::to_string(i) + " Delta 2^-" + std::to_string(delta_big.k) + ": ",
                  res.ledger);
  };
  for (int i = 0; i < configs; ++i) {
    const auto cfg = nice_random(Scale{spec.k}, spec.s, spec.t, spec.c, spec.m, ctx.seed + i);
    record(i, cfg, coarse);
    if (degenerate && i == 0) {
      record(i, cfg, Scale{0});
      record(i, cfg, cfg.delta);
    }
  }
  r.pass = failures == 0;
  r.summary = {{"configs", configs}, {"coarse_exp", coarse.k}, {"log_power", log_power}, {"failures", failures}};
  r.tables.push_back(std::move(runs));
  r.tables.push_back(std::move(clauses));
  return r;
}

StageResult decompose_stage(Params& p, const StageContext& ctx) {
  const auto profiles = p.get<int>("profiles");
  const auto m = p.get<int>("m");
  const auto s = p.get<double>("s");
  const auto eps = p.get<double>("eps");
  std::mt19937_64 rng(ctx.seed);
  StageResult r;
  Table t{"decompositions",
          {"profile", "t", "intervals", "covered", "gap", "k_st", "predicates", "clauses", "classes"},
          {}};
  std::size_t failures = 0;
  int made = 0;
  for (int attempt = 0; made < profiles; ++attempt) {
    if (attempt >= 100 * profiles) throw std::runtime_error("decompose: too few admissible random profiles");
    const auto prof = random_branching_profile(m, s, eps, rng);
    if (!prof) continue;
    const auto& f = prof->f;
    const auto d = decompose(f, s, prof->t, eps);
    bool predicates = true;
    for (const auto& iv : d.intervals) {
      predicates = predicates && iv.slope >= s - 1e-9 && is_eps_superlinear(f, iv.c, iv.d, eps);
      if (iv.kind == Alternative::linear) predicates = predicates && is_eps_linear(f, iv.c, iv.d, eps);
    }
    bool clauses_ok = false;
    std::string classes;
    try {
      const auto sd = scales_from_decomposition(d, Scale{1}, gap_constant(s, prof->t) * eps);
      clauses_ok = sd.verified();
      for (auto c : sd.classes) classes += static_cast<char>(c);
    } catch (const DecompositionError& e) {
      classes = e.what();
    }
    const bool gap_ok = d.k_st <= gap_constant(s, prof->t);
    failures += !(predicates && clauses_ok && gap_ok);
    t.rows.push_back({made, prof->t, d.intervals.size(), d.covered_length(), d.gap_length, d.k_st, predicates,
                      clauses_ok, classes});
    ++made;
  }
  r.pass = failures == 0;
  r.summary = {{"profiles", profiles}, {"m", m}, {"s", s}, {"eps", eps}, {"failures", failures}};
  r.tables.push_back(std::move(t));
  return r;
}

StageResult dichotomy_stage(Params& p, const StageContext& ctx) {
  const auto instances = p.get<int>("instances");
  const auto spec = nice_spec(p);
  const auto k_reg = p.get<double>("k_reg");
  const auto eps = p.get<double>("eps");
  StageResult r;
  Table t{"dichotomy",
          {"instance", "fine_count", "coarse_count", "fine_exponent", "coarse_exponent", "branch_fine",
           "branch_coarse"},
          {}};
  Series fine{"fine_exponent", "instance", "log|T|_delta/log(1/delta)", {}};
  Series coarse{"coarse_exponent", "instance", "log|T|_{delta^1/2}/log(1/delta)", {}};
  std::size_t failures = 0;
  for (int i = 0; i < instances; ++i) {
    const auto cfg = regular_random(Scale{spec.k}, spec.s, spec.t, spec.c, k_reg, spec.m, ctx.seed + i);
    const auto d = dichotomy_check(cfg, eps);
    failures += !d.any();
    t.rows.push_back({i, d.fine_count, d.coarse_count, d.fine_exponent, d.coarse_exponent, d.branch_fine,
                      d.branch_coarse});
    fine.points.emplace_back(i, d.fine_exponent);
    coarse.points.emplace_back(i, d.coarse_exponent);
  }
  r.pass = failures == 0;
  r.summary = {{"instances", instances}, {"eps", eps}, {"failures", failures}};
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(fine));
  r.series.push_back(std::move(coarse));
  return r;
}

StageResult projection_survey_stage(Params& p, const StageContext& ctx) {
  const auto kind = p.get<std::string>("kind");
  const auto s = p.get<double>("s");
  const Scale delta{p.get<int>("k")};
  const auto kaufman_slack = p.maybe<double>("kaufman_slack");
  StageResult r;
  SurveyReport survey;
  if (kind == "full_grid") {
    std::vector<Cube> grid;
    const std::int64_t n = std::int64_t{1} << delta.k;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j) grid.push_back(Cube{delta.k, i, j});
    survey = exceptional_survey(grid, s, delta, DirectionGrid{delta}, 2.0, ctx.threads);
    r.pass = s >= 1 || survey.exceptional_count == 0;
    r.summary = {{"kind", kind}, {"points", grid.size()}};
  } else if (kind == "exceptional") {
    const auto t = p.get<double>("t");
    const auto alpha = p.get<double>("alpha");
    const auto tol = p.get<double>("tolerance");
    const auto ex = exceptional_projection_config(s, t, alpha, delta, ctx.seed, tol, ctx.threads);
    survey = ex.survey;
    r.pass = std::abs(ex.realized_alpha - alpha) <= tol;
    r.summary = {{"kind", kind},
                 {"points", ex.k_set.size()},
                 {"alpha", alpha},
                 {"realized_alpha", ex.realized_alpha},
                 {"lattice_bits", {ex.x_bits, ex.y_bits}},
                 {"k_spread", to_json(ex.k_spread)}};
  } else {
    throw ConfigError("projection_survey: kind must be 'full_grid' or 'exceptional'");
  }
  Table t{"survey", {"direction_index", "slope", "swapped", "covering_count", "exceptional_flag"}, {}};
  Series covers{"covers", "angle", "covering_count", {}};
  for (std::size_t i = 0; i < survey.grid.size(); ++i) {
    const auto& e = survey.grid[i];
    t.rows.push_back({i, e.slope(), e.swapped, survey.covers[i], static_cast<bool>(survey.exceptional[i])});
    covers.points.emplace_back(e.angle(), static_cast<double>(survey.covers[i]));
  }
  if (kaufman_slack) r.pass = r.pass && survey.exponent <= s + *kaufman_slack;
  r.summary["s"] = s;
  r.summary["k"] = delta.k;
  r.summary["threshold"] = survey.threshold;
  r.summary["exceptional_count"] = survey.exceptional_count;
  r.summary["exponent"] = survey.exponent;
  r.summary["kaufman"] = survey.kaufman;
  r.tables.push_back(std::move(t));
  r.series.push_back(std::move(covers));
  return r;
}

StageResult extract_stage(Params& p, const StageContext& ctx) {
  const auto spec = nice_spec(p);
  ExtractionOptions options;
  options.eps = p.get<double>("eps");
  options.typical_fraction = p.get_or<double>("typical_fraction", 0.5);
  const auto cfg = nice_random(Scale{spec.k}, spec.s, spec.t, spec.c, spec.m, ctx.seed);
  const auto ex = extract_product_structure(cfg, options);
  StageResult r;
  r.pass = ex.ok && ex.properties_hold;
  r.summary = {{"ok", ex.ok},
               {"failed_stage", ex.failed_stage},
               {"detail", ex.detail},
               {"heavy_squares", ex.heavy_squares},
               {"typical_squares", ex.typical_squares},
               {"bad_tubes", ex.bad_tubes},
               {"tube_squares", ex.tube_squares}};
  if (!ex.ok) return r;
  r.summary["tube"] = to_string(*ex.tube);
  r.summary["product_points"] = ex.product.points.size();
  r.summary["budget"] = ex.budget;
  r.summary["column_spread"] = to_json(ex.column_spread);
  r.summary["row_spread"] = to_json(ex.row_spread);
  r.summary["min_fan"] = ex.min_fan;
  r.summary["max_fan"] = ex.max_fan;
  r.summary["fan_target"] = ex.fan_target;
  r.summary["family_ratio"] = ex.family_ratio;
  r.summary["properties_hold"] = ex.properties_hold;
  r.summary["dual_exponent"] = ex.dual_exponent;
  Table dual{"dual_projections", {"row", "slope", "covering_count"}, {}};
  for (std::size_t i = 0; i < ex.dual_directions.size(); ++i) {
    dual.rows.push_back({ex.dual_directions[i].num, ex.dual_directions[i].slope(), ex.dual_covers[i]});
  }
  r.tables.push_back(std::move(dual));
  r.instance = ex.product;
  return r;
}

StageResult instance_stage(Params& p, const StageContext& ctx) {
  const auto generator = p.get<std::string>("generator");
  StageResult r;
  if (generator == "nice_random") {
    const auto spec = nice_spec(p);
    r.instance = nice_random(Scale{spec.k}, spec.s, spec.t, spec.c, spec.m, ctx.seed);
  } else if (generator == "regular_random") {
    const auto spec = nice_spec(p);
    r.instance = regular_random(Scale{spec.k}, spec.s, spec.t, spec.c, p.get<double>("k_reg"), spec.m, ctx.seed);
  } else if (generator == "product_structure") {
    const auto ps = product_structure(Scale{p.get<int>("k")}, p.get<double>("s"), p.get<double>("t"), ctx.seed,
                                      p.get<double>("c"));
    r.summary["properties_hold"] = ps.properties_hold;
    r.summary["family_ratio"] = ps.family_ratio;
    r.instance = ps.cfg;
  } else if (generator == "cover_counterexample") {
    r.instance = cover_counterexample().cfg;
  } else {
    throw ConfigError("instance: unknown generator '" + generator + "'");
  }
  r.summary["generator"] = generator;
  r.summary["verify"] = verify(*r.instance);
  r.pass = r.summary["verify"]["pass"].get<bool>();
  return r;
}

}  // namespace

const std::map<std::string, StageDef>& stage_registry() {
  static const std::map<std::string, StageDef> registry{
      {"cantor_target", {cantor_target_stage, {"s", "t", "k"}, {"tolerance"}}},
      {"elementary_st", {elementary_st_stage, {"instances", "max_points", "max_lines", "grid", "budget"}, {}}},
      {"discretized_st",
       {discretized_st_stage,
        {"instances", "k", "s", "t_offset", "c", "m_factor", "log_power"},
        {"exponent_slack", "full_fan_fraction"}}},
      {"count_oracle", {count_oracle_stage, {"instances", "k", "max_product"}, {}}},
      {"refine_cover", {refine_cover_stage, {"configs", "k", "coarse", "s", "t", "c", "m"}, {}}},
      {"cover_counterexample", {cover_counterexample_stage, {}, {}}},
      {"refine_two_scale",
       {refine_two_scale_stage, {"configs", "k", "coarse", "s", "t", "c", "m", "log_power"}, {"degenerate"}}},
      {"decompose", {decompose_stage, {"profiles", "m", "s", "eps"}, {}}},
      {"dichotomy", {dichotomy_stage, {"instances", "k", "s", "t", "c", "m", "k_reg", "eps"}, {}}},
      {"projection_survey",
       {projection_survey_stage, {"kind", "s", "k"}, {"t", "alpha", "tolerance", "kaufman_slack"}}},
      {"extract_product_structure",
       {extract_stage, {"k", "s", "t", "c", "m", "eps"}, {"typical_fraction"}}},
      {"instance", {instance_stage, {"generator"}, {"k", "s", "t", "c", "m", "k_reg"}}},
  };
  return registry;
}

}  // namespace lab
