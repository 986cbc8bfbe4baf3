#include "fsdyn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fsdyn/error.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string mode_name(SearchMode m) { return m == SearchMode::exact ? "exact" : "greedy"; }

std::string strategy_name(const WordStrategy& w) {
  if (w.mode == WordStrategy::Mode::exhaustive) return "exhaustive";
  return "montecarlo:" + std::to_string(w.sample_count) + ":" + std::to_string(w.seed);
}

CheckParameters settings_parameters(const CheckSettings& cs, const std::string& system) {
  return {{"system", system},
          {"eps", num(cs.eps)},
          {"horizons", list(cs.horizons)},
          {"mode", mode_name(cs.mode)},
          {"strategy", strategy_name(cs.strategy)},
          {"resolution", std::to_string(cs.resolution)},
          {"candidates", std::to_string(cs.candidates.size())}};
}

PointSet candidates_for(const GeneratorSystem& s, const CheckSettings& cs, std::size_t n, double eps) {
  return cs.candidates.empty() ? default_candidates(s, cs.resolution, n, eps) : cs.candidates;
}

double log_average(const GeneratorSystem& s, const Potential& phi, std::size_t n, double eps, Quantity q,
                   const CheckSettings& cs, const PointSet& cand) {
  auto a = average_over_words(s, phi, n, eps, cs.strategy, q, cand, cs.mode, cs.threads, cs.search);
  return std::log(a.value);
}

// Inequality lhs <= rhs (in logs) at every horizon; keeps the tightest one.
struct Tracker {
  double lhs = 0, rhs = 0, slack = std::numeric_limits<double>::infinity();
  std::size_t at = 0;
  void le(double l, double r, std::size_t n) {
    if (r - l < slack) {
      slack = r - l;
      lhs = l;
      rhs = r;
      at = n;
    }
  }
};

CheckResult make(std::string id, std::string surrogate, const Tracker& t, double tol, CheckParameters params,
                 bool identity = false) {
  CheckResult r;
  r.id = std::move(id);
  r.surrogate = std::move(surrogate);
  r.lhs = t.lhs;
  r.rhs = t.rhs;
  r.slack = t.slack;
  r.tolerance = tol;
  if (identity) r.status = t.slack <= tol ? CheckStatus::pass : CheckStatus::fail;
  else r.status = t.slack >= -tol ? CheckStatus::pass : CheckStatus::fail;
  params.emplace_back("worst_n", std::to_string(t.at));
  r.parameters = std::move(params);
  r.fingerprint = fingerprint(r.parameters);
  return r;
}

std::shared_ptr<const SkewProductSystem> skew_for(const SystemPtr& fiber, const CheckSettings& cs) {
  if (!(cs.eps > 0 && cs.eps < 0.5)) throw DataError("skew checks need 0 < eps < 1/2");
  if (cs.horizons.empty()) throw DataError("horizon list is empty");
  // block totals only read positions -J .. n-1+J
  const std::size_t n = *std::max_element(cs.horizons.begin(), cs.horizons.end());
  return std::make_shared<SkewProductSystem>(fiber, n - 1 + static_cast<std::size_t>(shift_resolution(cs.eps)));
}

// Standard error of log(mean b) - log(mean a) by the delta method.  Paired
// samples (nested across horizons) share their noise; otherwise the two
// relative errors add in quadrature.
double log_ratio_se(const std::vector<double>& a, const std::vector<double>& b, double rel_a, double rel_b,
                    bool paired) {
  if (!paired || a.size() != b.size() || a.size() < 2) return std::sqrt(rel_a * rel_a + rel_b * rel_b);
  const double N = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= N;
  mb /= N;
  std::vector<double> d(a.size());
  double md = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = b[i] / mb - a[i] / ma;
    md += d[i];
  }
  md /= N;
  double ss = 0;
  for (double v : d) ss += (v - md) * (v - md);
  return std::sqrt(ss / (N - 1) / N);
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::underresolved: return "underresolved";
  }
  return "fail";
}

std::string fingerprint(const CheckParameters& p) {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (const auto& [k, v] : p) {
    if (k == "worst_n") continue;
    for (char ch : k + "=" + v + ";") h = mix64(h ^ static_cast<unsigned char>(ch));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CheckStatus overall(const std::vector<CheckResult>& checks) {
  CheckStatus s = CheckStatus::pass;
  for (const auto& c : checks) {
    if (c.status == CheckStatus::fail) return CheckStatus::fail;
    if (c.status == CheckStatus::underresolved) s = CheckStatus::underresolved;
  }
  return s;
}

// ---------------------------------------------------------------- skew products

CheckResult check_skew_lower(const SystemPtr& fiber, const Potential& phi, double c, const CheckSettings& cs) {
  auto F = skew_for(fiber, cs);
  const auto g = skew_potential(*F, phi, c);
  const double logm = std::log(static_cast<double>(fiber->generator_count()));
  Tracker t;
  bool sampled = false;
  for (std::size_t n : cs.horizons) {
    const auto cand = candidates_for(*fiber, cs, n, cs.eps);
    auto total = skew_block_total(*F, g, n, cs.eps, cs.strategy, Quantity::separated, cand, cs.mode, cs.threads,
                                  cs.search);
    sampled |= total.sampled;
    const double rhs = n * c + n * logm + log_average(*fiber, phi, n, cs.eps, Quantity::separated, cs, cand);
    // stated as rhs <= lhs
    t.le(rhs, total.log_value, n);
  }
  std::swap(t.lhs, t.rhs);
  auto params = settings_parameters(cs, fiber->kind());
  params.emplace_back("c", num(c));
  auto r = make("skew_lower_bound", "log P_n(F, c + phi, eps) >= nc + n log m + log P_n(fiber, phi, eps)", t,
                cs.tolerance, params);
  if (sampled) r.note = "blocks sampled; inequality holds only in expectation";
  return r;
}

CheckResult check_skew_upper(const SystemPtr& fiber, const Potential& phi, double c, const CheckSettings& cs) {
  auto F = skew_for(fiber, cs);
  const auto g = skew_potential(*F, phi, c);
  const double logm = std::log(static_cast<double>(fiber->generator_count()));
  std::vector<double> xs, ys;
  for (std::size_t n : cs.horizons) {
    const auto cand = candidates_for(*fiber, cs, n, cs.eps);
    auto total = skew_block_total(*F, g, n, cs.eps, cs.strategy, Quantity::spanning, cand, cs.mode, cs.threads,
                                  cs.search);
    const double lf = log_average(*fiber, phi, n, cs.eps, Quantity::spanning, cs, cand);
    xs.push_back(static_cast<double>(n));
    ys.push_back(total.log_value - n * c - n * logm - lf);
  }
  CheckResult r;
  r.id = "skew_upper_bound";
  r.surrogate = "least-squares slope of log [Q_n(F) / (e^{nc} m^n Q_n(fiber))] in n";
  r.lhs = xs.size() >= 2 ? least_squares_slope(xs, ys) : 0.0;
  r.rhs = 0;
  r.tolerance = 0.05;
  r.slack = r.tolerance - std::fabs(r.lhs);
  r.status = r.slack >= 0 ? CheckStatus::pass : CheckStatus::fail;
  r.parameters = settings_parameters(cs, fiber->kind());
  r.parameters.emplace_back("c", num(c));
  double lo = *std::min_element(ys.begin(), ys.end()), hi = *std::max_element(ys.begin(), ys.end());
  r.note = "log r_n in [" + num(lo) + ", " + num(hi) + "]";
  r.fingerprint = fingerprint(r.parameters);
  return r;
}

CheckResult check_skew_pressure_relation(const SystemPtr& fiber, const Potential& phi, double c,
                                         const CheckSettings& cs, double tolerance) {
  if (cs.horizons.size() < 2) throw DataError("the pressure relation needs two horizons");
  auto F = skew_for(fiber, cs);
  const auto g = skew_potential(*F, phi, c);
  const double logm = std::log(static_cast<double>(fiber->generator_count()));
  const bool mc = cs.strategy.mode == WordStrategy::Mode::montecarlo;
  std::vector<double> skew_log, fiber_log;
  std::vector<BlockTotal> blocks;
  std::vector<WordAverage> words;
  for (std::size_t n : cs.horizons) {
    const auto cand = candidates_for(*fiber, cs, n, cs.eps);
    auto total = skew_block_total(*F, g, n, cs.eps, cs.strategy, Quantity::separated, cand, cs.mode, cs.threads,
                                  cs.search);
    skew_log.push_back(total.log_value);
    auto a = average_over_words(*fiber, phi, n, cs.eps, cs.strategy, Quantity::separated, cand, cs.mode,
                                cs.threads, cs.search);
    fiber_log.push_back(std::log(a.value));
    blocks.push_back(std::move(total));
    words.push_back(std::move(a));
  }
  CheckResult r;
  r.id = "skew_pressure_relation";
  r.surrogate = "two-horizon slopes: P(F, c + phi) against c + log m + P(fiber, phi)";
  r.lhs = two_horizon_slope(cs.horizons, skew_log);
  r.rhs = c + logm + two_horizon_slope(cs.horizons, fiber_log);
  r.tolerance = tolerance;
  const double gap = std::fabs(r.lhs - r.rhs);
  r.slack = tolerance - gap;

  // Sampled blocks and words are nested across horizons, so the slope noise
  // comes from paired differences at the two largest horizons.
  const std::size_t H = cs.horizons.size();
  const double dn = static_cast<double>(cs.horizons[H - 1] - cs.horizons[H - 2]);
  const auto& b1 = blocks[H - 2];
  const auto& b2 = blocks[H - 1];
  const double skew_se =
      b1.sampled || b2.sampled ? log_ratio_se(b1.per_block, b2.per_block, b1.stderr_log, b2.stderr_log,
                                              b1.sampled && b2.sampled)
                               : 0.0;
  const auto& w1 = words[H - 2];
  const auto& w2 = words[H - 1];
  const double fiber_se =
      mc ? log_ratio_se(w1.per_word, w2.per_word, w1.stderr_ / w1.value, w2.stderr_ / w2.value, true) : 0.0;
  // the two sample sets are drawn from related streams; add rather than combine in quadrature
  const double se = (skew_se + fiber_se) / dn;
  if (gap + 2 * se <= tolerance) r.status = CheckStatus::pass;
  else if (gap - 2 * se > tolerance) r.status = CheckStatus::fail;
  else r.status = CheckStatus::underresolved;
  r.parameters = settings_parameters(cs, fiber->kind());
  r.parameters.emplace_back("c", num(c));
  r.note = "slope standard error " + num(se);
  r.fingerprint = fingerprint(r.parameters);
  return r;
}

// ---------------------------------------------------------------- pressure

std::vector<CheckResult> check_pressure_properties(const GeneratorSystem& s, const Potential& phi,
                                                   const Potential& psi, const CheckSettings& cs) {
  const double m = static_cast<double>(s.generator_count());
  const double eps2 = std::min(2 * cs.eps, s.diameter());
  const Potential diff = phi + (-1.0) * psi;
  const Potential above = phi + diff.abs();  // >= phi pointwise
  const Potential mix = 0.5 * phi + 0.5 * psi;
  const Potential shifted = phi + Potential::constant(1.0);
  const Potential sum = phi + psi;
  const Potential twice = 2.0 * phi;
  const Potential absolute = phi.abs();

  Tracker mono, supn, conv, shift, sumb, power, absb, epsm, sandwich;
  for (std::size_t n : cs.horizons) {
    const auto cand = candidates_for(s, cs, n, cs.eps);
    auto P = [&](const Potential& f, double eps = -1) {
      return log_average(s, f, n, eps < 0 ? cs.eps : eps, Quantity::separated, cs, cand);
    };
    const double pphi = P(phi), ppsi = P(psi);
    const double norm = sup_norm(diff, cand);
    mono.le(pphi, P(above), n);
    supn.le(pphi, n * norm + ppsi, n);
    supn.le(ppsi, n * norm + pphi, n);
    conv.le(P(mix), 0.5 * pphi + 0.5 * ppsi, n);
    const double ps = P(shifted), target = n * 1.0 + pphi;
    if (shift.at == 0 || std::fabs(ps - target) > shift.slack) {
      shift.lhs = ps;
      shift.rhs = target;
      shift.slack = std::fabs(ps - target);
      shift.at = n;
    }
    sumb.le(P(sum), n * std::log(m) + pphi + ppsi, n);
    power.le(P(twice), n * std::log(m) + 2 * pphi, n);
    absb.le(-P(absolute), pphi, n);
    epsm.le(P(phi, eps2), pphi, n);
    sandwich.le(log_average(s, phi, n, cs.eps, Quantity::spanning, cs, cand), pphi, n);
  }

  auto params = settings_parameters(cs, s.kind());
  params.emplace_back("phi", phi.describe());
  params.emplace_back("psi", psi.describe());
  const double tol = cs.tolerance;
  std::vector<CheckResult> out;
  out.push_back(make("pressure_absolute_value_bound", "log P_n(phi) >= -log P_n(|phi|)", absb, tol, params));
  out.push_back(make("pressure_constant_shift", "log P_n(phi + 1) = n + log P_n(phi)", shift, tol, params, true));
  out.push_back(make("pressure_log_convex", "log P_n(phi/2 + psi/2) <= (log P_n(phi) + log P_n(psi)) / 2", conv, tol,
                     params));
  out.push_back(make("pressure_monotone_in_eps", "log P_n(phi, 2 eps) <= log P_n(phi, eps)", epsm, tol, params));
  out.push_back(
      make("pressure_monotone_in_potential", "log P_n(phi) <= log P_n(phi + |psi - phi|)", mono, tol, params));
  out.push_back(make("pressure_power_bound", "log P_n(2 phi) <= n log m + 2 log P_n(phi)", power, tol, params));
  out.push_back(
      make("pressure_sum_bound", "log P_n(phi + psi) <= n log m + log P_n(phi) + log P_n(psi)", sumb, tol, params));
  out.push_back(make("pressure_sup_norm_bound", "|log P_n(phi) - log P_n(psi)| <= n ||phi - psi||", supn, tol,
                     params));
  out.push_back(make("spanning_below_separated", "log Q_n(phi) <= log P_n(phi)", sandwich, tol, params));
  return out;
}

std::vector<CheckResult> check_product_rules(const SystemPtr& g1, const SystemPtr& g2, const Potential& phi1,
                                             const Potential& phi2, const CheckSettings& cs) {
  ProductSystem prod(g1, g2);
  const Potential phi = product_potential(prod, phi1, phi2);
  Tracker q, p;
  for (std::size_t n : cs.horizons) {
    const auto c1 = candidates_for(*g1, cs, n, cs.eps), c2 = candidates_for(*g2, cs, n, cs.eps);
    const auto cp = cartesian_product(c1, c2);
    CheckSettings one = cs;
    one.candidates = PointSet();
    q.le(log_average(prod, phi, n, cs.eps, Quantity::spanning, one, cp),
         log_average(*g1, phi1, n, cs.eps, Quantity::spanning, one, c1) +
             log_average(*g2, phi2, n, cs.eps, Quantity::spanning, one, c2),
         n);
    p.le(log_average(*g1, phi1, n, cs.eps, Quantity::separated, one, c1) +
             log_average(*g2, phi2, n, cs.eps, Quantity::separated, one, c2),
         log_average(prod, phi, n, cs.eps, Quantity::separated, one, cp), n);
  }
  std::swap(p.lhs, p.rhs);
  auto params = settings_parameters(cs, g1->kind() + "x" + g2->kind());
  params.emplace_back("phi1", phi1.describe());
  params.emplace_back("phi2", phi2.describe());
  std::vector<CheckResult> out;
  out.push_back(make("product_separated_bound", "log P_n(G1 x G2) >= log P_n(G1) + log P_n(G2)", p, cs.tolerance,
                     params));
  out.push_back(make("product_spanning_bound", "log Q_n(G1 x G2) <= log Q_n(G1) + log Q_n(G2)", q, cs.tolerance,
                     params));
  return out;
}

std::vector<CheckResult> check_product_entropy(const SystemPtr& g1, const Measure& mu1, const Partition& xi1,
                                               const SystemPtr& g2, const Measure& mu2, const Partition& xi2,
                                               const EntropyParams& p) {
  ProductSystem prod(g1, g2);
  Measure mu{ProductMeasure{std::make_shared<Measure>(mu1), std::make_shared<Measure>(mu2)}};
  auto r = entropy_rate(prod, mu, product_partition(xi1, xi2), p);
  auto r1 = entropy_rate(*g1, mu1, xi1, p);
  auto r2 = entropy_rate(*g2, mu2, xi2, p);
  Tracker id;
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const double lhs = r.rows[k].a_n, rhs = r1.rows[k].a_n + r2.rows[k].a_n;
    const double rel = std::fabs(lhs - rhs) / std::max(1.0, std::fabs(rhs));
    if (id.at == 0 || rel > id.slack) {
      id.lhs = lhs;
      id.rhs = rhs;
      id.slack = rel;
      id.at = r.rows[k].n;
    }
  }
  Tracker bound;
  bound.le(r.estimate, r1.estimate + r2.estimate, r.rows.back().n);
  CheckParameters params{{"system", g1->kind() + "x" + g2->kind()},
                         {"partitions", xi1.id + "x" + xi2.id},
                         {"horizons", list(p.horizons)},
                         {"strategy", strategy_name(p.strategy)}};
  const bool same = g1 == g2 && xi1.id == xi2.id;
  std::vector<CheckResult> out;
  out.push_back(make(same ? "product_entropy_doubling" : "product_entropy_identity",
                     same ? "a_n(xi x xi) = 2 a_n(xi)" : "a_n(xi1 x xi2) = a_n(xi1) + a_n(xi2)", id, 1e-9, params,
                     true));
  out.push_back(make("product_entropy_bound", "h(xi1 x xi2) <= h(xi1) + h(xi2)", bound, 1e-9, params));
  return out;
}

// ---------------------------------------------------------------- measures

std::vector<CheckResult> check_variational(const GeneratorSystem& s, const Measure& mu, const Potential& phi,
                                           const VariationalInputs& in) {
  auto h = measure_entropy(s, mu, in.partitions, in.entropy);
  auto integral = integrate(s, mu, phi, in.integral_seed, in.integral_samples);
  auto P = pressure_estimate(s, phi, in.pressure);
  const double lhs = h.value + integral.value;
  CheckParameters params{{"system", s.kind()},
                         {"phi", phi.describe()},
                         {"partitions", std::to_string(in.partitions.size())},
                         {"entropy_horizons", list(in.entropy.horizons)},
                         {"pressure_horizons", list(in.pressure.horizons)},
                         {"pressure_eps", num(in.pressure.epsilons.back())},
                         {"resolution", std::to_string(in.pressure.resolution)}};
  const std::string note = "h = " + num(h.value) + ", integral = " + num(integral.value) +
                           (integral.exact ? "" : " +- " + num(integral.stderr_)) + ", P = " + num(P.estimate);

  Tracker lemma;
  lemma.le(lhs, std::log(2.0) + P.estimate, 0);
  auto a = make("variational_log2_slack", "h_mu + int phi < log 2 + P", lemma, 0.0, params);
  a.status = lemma.slack > 0 ? CheckStatus::pass : CheckStatus::fail;
  a.note = note;

  Tracker thm;
  thm.le(lhs, P.estimate, 0);
  const double tol = in.tolerance + (integral.exact ? 0.0 : 1.96 * integral.stderr_);
  auto b = make("variational_inequality", "h_mu + int phi <= P", thm, tol, params);
  b.note = note;
  return {a, b};
}

CheckResult check_invariance(const GeneratorSystem& s, const Measure& mu, const std::vector<TestSet>& sets,
                             const DefectOptions& opt, double tolerance) {
  auto d = invariance_defect(s, mu, sets, opt);
  Tracker t;
  t.le(d.value, tolerance, 0);
  CheckParameters params{{"system", s.kind()},
                         {"sets", std::to_string(sets.size())},
                         {"samples", std::to_string(opt.samples)},
                         {"seed", std::to_string(opt.seed)}};
  auto r = make("measure_invariance", "max_i max_A |mu(f_i^{-1} A) - mu(A)| <= tolerance", t, 0.0, params);
  r.note = std::string(d.approximate ? "monte carlo" : "exact") + ", worst generator " + std::to_string(d.generator);
  return r;
}

CheckResult check_noninvariant_rejected(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                                        const EntropyParams& p) {
  CheckResult r;
  r.id = "noninvariant_measure_rejected";
  r.surrogate = "entropy_rate refuses a measure whose invariance defect exceeds the tolerance";
  r.rhs = p.invariance_tolerance;
  r.tolerance = 0;
  r.parameters = {{"system", s.kind()}, {"partition", xi.id}};
  r.fingerprint = fingerprint(r.parameters);
  try {
    entropy_rate(s, mu, xi, p);
    r.status = CheckStatus::fail;
    r.note = "entropy run accepted the measure";
  } catch (const NonInvariantError& e) {
    r.lhs = e.defect;
    r.slack = e.defect - p.invariance_tolerance;
    r.status = CheckStatus::pass;
    r.note = "rejected with defect " + num(e.defect);
  }
  return r;
}

std::vector<CheckResult> check_affine(const TorusSystem& t, const AffineParams& p, const EstimatorParams* pressure,
                                      double tolerance) {
  auto rep = entropy_bounds(t, p);
  CheckParameters params{{"system", t.kind()},
                         {"eps", num(p.eps.back())},
                         {"horizons", list(p.horizons)},
                         {"samples", std::to_string(p.sample_count)},
                         {"seed", std::to_string(p.seed)}};
  Tracker order;
  for (const auto& row : rep.rows) order.le(row.lower, row.upper, row.n);
  std::vector<CheckResult> out;
  out.push_back(make("affine_bounds_ordered", "(1/n) avg log 1/mu(D_w) <= (1/n) log avg 1/mu(D_w)", order, 0.0,
                     params));
  if (rep.underresolved) out.back().note = "some balls had too few hits";
  if (pressure) {
    auto P = pressure_estimate(t, Potential(), *pressure);
    Tracker up;
    up.le(rep.upper_estimate, P.estimate, 0);
    auto pp = params;
    pp.emplace_back("pressure_eps", num(pressure->epsilons.back()));
    pp.emplace_back("pressure_horizons", list(pressure->horizons));
    pp.emplace_back("resolution", std::to_string(pressure->resolution));
    out.push_back(make("affine_upper_below_topological", "affine upper estimate <= topological entropy estimate", up,
                       tolerance, pp));
  }
  return out;
}

std::vector<CheckResult> finite_suite(const std::shared_ptr<const FiniteSystem>& s, const Potential& phi,
                                      const Potential& psi, double c, const CheckSettings& cs) {
  auto out = check_pressure_properties(*s, phi, psi, cs);
  out.push_back(check_skew_lower(s, phi, c, cs));
  out.push_back(check_skew_upper(s, phi, c, cs));
  for (auto& r : check_product_rules(s, s, phi, psi, cs)) out.push_back(std::move(r));
  std::stable_sort(out.begin(), out.end(), [](const CheckResult& a, const CheckResult& b) { return a.id < b.id; });
  return out;
}

}  // namespace fsdyn
