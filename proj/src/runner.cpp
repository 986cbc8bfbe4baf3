#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fsdyn/cli.hpp"
#include "fsdyn/verify.hpp"

namespace fsdyn::cli {

namespace {

namespace fs = std::filesystem;

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(header); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + '"';
  }
  std::ostringstream out_;
};

// Two-column series blocks separated by blank lines (gnuplot "index" layout).
class PlotData {
 public:
  void series(const std::string& label) {
    if (any_) out_ << "\n\n";
    any_ = true;
    out_ << "# " << label << '\n';
  }
  void point(std::size_t n, double rate) { out_ << n << ' ' << csv_number(rate) << '\n'; }
  std::string str() const { return out_.str(); }

 private:
  bool any_ = false;
  std::ostringstream out_;
};

std::string num(std::size_t v) { return std::to_string(v); }

struct Outputs {
  std::map<std::string, std::string> files;  // name -> contents
  std::ostringstream summary;
  int exit_code = exit_ok;
};

std::string params_string(const CheckParameters& p) {
  std::string s;
  for (const auto& [k, v] : p) {
    if (!s.empty()) s += ';';
    s += k + '=' + v;
  }
  return s;
}

std::string checks_csv(const std::vector<CheckResult>& checks) {
  Csv csv({"id", "status", "lhs", "rhs", "slack", "tolerance", "fingerprint", "surrogate", "parameters", "note"});
  for (const auto& c : checks)
    csv.row({c.id, to_string(c.status), csv_number(c.lhs), csv_number(c.rhs), csv_number(c.slack),
             csv_number(c.tolerance), c.fingerprint, c.surrogate, params_string(c.parameters), c.note});
  return csv.str();
}

void summarize_checks(Outputs& o, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-32s %-13s lhs=%-12.6g rhs=%-12.6g slack=%.3g", c.id.c_str(),
                  to_string(c.status).c_str(), c.lhs, c.rhs, c.slack);
    o.summary << line << '\n';
  }
  const CheckStatus all = overall(checks);
  o.summary << "overall: " << to_string(all) << '\n';
  if (all == CheckStatus::fail) o.exit_code = exit_failed;
  else if (all == CheckStatus::underresolved) o.exit_code = exit_underresolved;
}

CheckSettings settings_for(const Experiment& x, double eps) {
  CheckSettings cs;
  cs.horizons = x.pressure.horizons;
  cs.eps = eps;
  cs.mode = x.pressure.mode;
  cs.strategy = x.pressure.strategy;
  cs.resolution = x.pressure.resolution;
  cs.threads = x.pressure.threads;
  cs.search = x.pressure.search;
  cs.tolerance = x.verify_tolerance;
  return cs;
}

// ---------------------------------------------------------------- commands

void run_pressure(const Experiment& x, Outputs& o) {
  const auto rep = pressure_estimate(*x.system, x.potential, x.pressure);
  Csv csv({"n", "epsilon", "quantity", "value", "log_rate", "stderr"});
  for (const auto& r : rep.rows) {
    const double nn = static_cast<double>(r.n);
    if (x.pressure.spanning)
      csv.row({num(r.n), csv_number(r.eps), "spanning", csv_number(std::exp(r.log_q)), csv_number(r.log_q / nn),
               csv_number(r.stderr_q)});
    if (x.pressure.separated)
      csv.row({num(r.n), csv_number(r.eps), "separated", csv_number(std::exp(r.log_p)), csv_number(r.log_p / nn),
               csv_number(r.stderr_p)});
  }
  o.files["results.csv"] = csv.str();

  PlotData plot;
  for (double eps : x.pressure.epsilons)
    for (int q = 0; q < 2; ++q) {
      if ((q == 0 && !x.pressure.spanning) || (q == 1 && !x.pressure.separated)) continue;
      plot.series("epsilon=" + csv_number(eps) + " quantity=" + (q == 0 ? "spanning" : "separated"));
      for (const auto& r : rep.rows)
        if (r.eps == eps) plot.point(r.n, (q == 0 ? r.log_q : r.log_p) / static_cast<double>(r.n));
    }
  o.files["plotdata.txt"] = plot.str();

  o.summary << "method: " << rep.method << '\n';
  if (x.pressure.separated) o.summary << "estimate (separated): " << csv_number(rep.estimate) << '\n';
  if (x.pressure.spanning) o.summary << "estimate (spanning): " << csv_number(rep.estimate_spanning) << '\n';
  o.summary << "rate at largest n: " << csv_number(rep.rate_at_nmax) << '\n';
  o.summary << "grid spacing: " << csv_number(rep.grid_spacing) << '\n';
  o.summary << "monotone in eps: " << (rep.eps_monotone ? "yes" : "no") << '\n';
  o.summary << "spanning below separated: " << (rep.sandwich ? "yes" : "no") << '\n';
  for (const auto& d : rep.diagnostics) o.summary << "note: " << d << '\n';
}

void run_entropy(const Experiment& x, Outputs& o) {
  const auto me = measure_entropy(*x.system, *x.measure, x.partitions, x.entropy);
  Csv csv({"n", "a_n", "a_n_over_n", "partition_id", "increment", "stderr"});
  PlotData plot;
  for (const auto& rep : me.reports) {
    plot.series("partition=" + rep.partition_id);
    for (const auto& r : rep.rows) {
      csv.row({num(r.n), csv_number(r.a_n), csv_number(r.rate), rep.partition_id, csv_number(r.increment),
               csv_number(r.stderr_)});
      plot.point(r.n, r.rate);
    }
  }
  o.files["results.csv"] = csv.str();
  o.files["plotdata.txt"] = plot.str();

  for (std::size_t i = 0; i < me.reports.size(); ++i) {
    const auto& rep = me.reports[i];
    o.summary << "partition " << rep.partition_id << ": estimate " << csv_number(rep.estimate) << ", min a_n/n "
              << csv_number(rep.min_rate) << ", H(xi) " << csv_number(rep.entropy_of_partition) << ", defect "
              << csv_number(rep.defect) << (rep.defect_approximate ? " (approximate)" : "") << ", running max "
              << csv_number(me.rows[i].running_max) << '\n';
    for (const auto& d : rep.diagnostics) o.summary << "note: " << d << '\n';
  }
  o.summary << "entropy lower estimate: " << csv_number(me.value) << '\n';
}

void run_affine(const Experiment& x, Outputs& o) {
  const auto& t = dynamic_cast<const TorusSystem&>(*x.system);
  const auto rep = entropy_bounds(t, x.affine);
  std::map<std::pair<std::size_t, double>, const AffineRow*> rows;
  for (const auto& r : rep.rows) rows[{r.n, r.eps}] = &r;
  Csv csv({"n", "epsilon", "word_or_sample_id", "ball_measure", "ci_low", "ci_high", "lower_bound", "upper_bound"});
  for (const auto& b : rep.balls) {
    const AffineRow* r = rows.at({b.n, b.eps});
    csv.row({num(b.n), csv_number(b.eps), b.word_id, csv_number(b.ball.estimate), csv_number(b.ball.ci_low),
             csv_number(b.ball.ci_high), csv_number(r->lower), csv_number(r->upper)});
  }
  o.files["results.csv"] = csv.str();

  PlotData plot;
  for (double eps : x.affine.eps)
    for (int side = 0; side < 2; ++side) {
      plot.series("epsilon=" + csv_number(eps) + " bound=" + (side ? "upper" : "lower"));
      for (const auto& r : rep.rows)
        if (r.eps == eps) plot.point(r.n, side ? r.upper : r.lower);
    }
  o.files["plotdata.txt"] = plot.str();

  o.summary << "lower estimate: " << csv_number(rep.lower_estimate) << '\n';
  o.summary << "upper estimate: " << csv_number(rep.upper_estimate) << '\n';
  o.summary << "raw lower/upper at largest n: " << csv_number(rep.raw_lower) << " " << csv_number(rep.raw_upper)
            << '\n';
  for (const auto& d : rep.diagnostics) o.summary << "note: " << d << '\n';
  if (rep.underresolved) {
    o.summary << "underresolved: some balls collected fewer hits than the target\n";
    o.exit_code = exit_underresolved;
  }
}

void run_skew(const Experiment& x, Outputs& o) {
  const SystemPtr& fiber = x.system;
  const double logm = std::log(static_cast<double>(fiber->generator_count()));
  Csv csv({"n", "epsilon", "quantity", "value", "log_rate", "stderr"});
  PlotData plot;
  std::vector<CheckResult> checks;
  for (double eps : x.pressure.epsilons) {
    const auto cs = settings_for(x, eps);
    const std::size_t radius = x.pressure.horizons.back() - 1 + static_cast<std::size_t>(shift_resolution(eps));
    auto F = std::make_shared<SkewProductSystem>(fiber, radius);
    const auto g = skew_potential(*F, x.potential, x.skew_c);
    std::vector<double> skew_rate, fiber_rate;
    for (std::size_t n : x.pressure.horizons) {
      const auto cand = default_candidates(*fiber, x.pressure.resolution, n, eps);
      const auto total = skew_block_total(*F, g, n, eps, x.pressure.strategy, Quantity::separated, cand,
                                          x.pressure.mode, x.pressure.threads, x.pressure.search);
      const auto a = average_over_words(*fiber, x.potential, n, eps, x.pressure.strategy, Quantity::separated, cand,
                                        x.pressure.mode, x.pressure.threads, x.pressure.search);
      const double nn = static_cast<double>(n);
      const double value = std::exp(total.log_value);
      csv.row({num(n), csv_number(eps), "skew_separated", csv_number(value), csv_number(total.log_value / nn),
               csv_number(value * total.stderr_log)});
      csv.row({num(n), csv_number(eps), "fiber_separated", csv_number(a.value), csv_number(std::log(a.value) / nn),
               csv_number(a.stderr_)});
      skew_rate.push_back(total.log_value / nn);
      fiber_rate.push_back(x.skew_c + logm + std::log(a.value) / nn);
    }
    plot.series("epsilon=" + csv_number(eps) + " series=skew");
    for (std::size_t i = 0; i < skew_rate.size(); ++i) plot.point(x.pressure.horizons[i], skew_rate[i]);
    plot.series("epsilon=" + csv_number(eps) + " series=c_plus_log_m_plus_fiber");
    for (std::size_t i = 0; i < fiber_rate.size(); ++i) plot.point(x.pressure.horizons[i], fiber_rate[i]);

    for (const auto& k : x.skew_checks) {
      if (k == "lower") checks.push_back(check_skew_lower(fiber, x.potential, x.skew_c, cs));
      else if (k == "upper") checks.push_back(check_skew_upper(fiber, x.potential, x.skew_c, cs));
      else checks.push_back(check_skew_pressure_relation(fiber, x.potential, x.skew_c, cs, x.skew_tolerance));
    }
  }
  o.files["results.csv"] = csv.str();
  o.files["checks.csv"] = checks_csv(checks);
  o.files["plotdata.txt"] = plot.str();
  summarize_checks(o, checks);
}

void run_verify(const Experiment& x, Outputs& o) {
  std::vector<CheckResult> checks;
  const GeneratorSystem& s = *x.system;
  const bool has_grid = x.pressure.resolution > 0 || s.kind() == "finite" || s.kind() == "full_shift";
  for (double eps : x.pressure.epsilons) {
    const auto cs = settings_for(x, eps);
    if (auto f = std::dynamic_pointer_cast<const FiniteSystem>(x.system)) {
      auto suite = finite_suite(f, x.potential, x.psi, x.verify_c, cs);
      checks.insert(checks.end(), suite.begin(), suite.end());
    } else if (has_grid) {
      auto props = check_pressure_properties(s, x.potential, x.psi, cs);
      checks.insert(checks.end(), props.begin(), props.end());
    }
  }
  auto* torus = dynamic_cast<const TorusSystem*>(&s);
  if (x.measure) {
    if (!x.expect_invariant) {
      checks.push_back(check_noninvariant_rejected(s, *x.measure, x.partitions.front(), x.entropy));
    } else if (torus) {
      DefectOptions opt;
      opt.samples = x.entropy.defect_samples;
      opt.seed = x.seeds.defect;
      checks.push_back(check_invariance(s, *x.measure, dyadic_boxes(torus->dimension(), 2), opt,
                                        x.defect_tolerance));
    } else if (!x.partitions.empty()) {
      std::vector<TestSet> sets;
      for (const auto& xi : x.partitions) {
        auto t = invariance_test_sets(s, *x.measure, xi);
        sets.insert(sets.end(), t.begin(), t.end());
      }
      DefectOptions opt;
      opt.samples = x.entropy.defect_samples;
      opt.seed = x.seeds.defect;
      checks.push_back(check_invariance(s, *x.measure, sets, opt, x.entropy.invariance_tolerance));
      if (has_grid) {
        VariationalInputs in;
        in.partitions = x.partitions;
        in.entropy = x.entropy;
        in.pressure = x.pressure;
        in.pressure.spanning = false;
        in.pressure.separated = true;
        in.integral_seed = x.seeds.integral;
        in.integral_samples = x.integral_samples;
        in.tolerance = x.variational_tolerance;
        auto v = check_variational(s, *x.measure, x.potential, in);
        checks.insert(checks.end(), v.begin(), v.end());
      }
    }
  }
  if (torus && x.pressure.horizons.size() >= 1) {
    EstimatorParams pp = x.pressure;
    pp.spanning = false;
    auto a = check_affine(*torus, x.affine, x.pressure.resolution > 0 ? &pp : nullptr, x.affine_tolerance);
    checks.insert(checks.end(), a.begin(), a.end());
  }
  if (checks.empty()) throw DataError("the system, measure and partitions admit no checks");
  o.files["results.csv"] = checks_csv(checks);
  o.files["plotdata.txt"] = "# no convergence series for check suites\n";
  summarize_checks(o, checks);
}

json manifest_for(const Experiment& x, const std::vector<std::string>& files) {
  json m;
  m["fsdyn_manifest"] = 1;
  m["version"] = kVersion;
  m["config"] = x.resolved;
  m["seeds"] = {{"run", x.seeds.run},
                {"words", x.seeds.words},
                {"balls", x.seeds.balls},
                {"defect", x.seeds.defect},
                {"integral", x.seeds.integral}};
  m["outputs"] = files;
  return m;
}

}  // namespace

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunResult run(const json& config, const RunOptions& opt) {
  RunResult res;
  json doc = config.is_object() && config.contains("fsdyn_manifest") ? config["config"] : config;
  // the manifest records where the run wrote
  if (opt.output && doc.is_object()) doc["output"] = *opt.output;

  Experiment x;
  try {
    x = build(doc, opt.threads);
  } catch (const ConfigError& e) {
    res.exit_code = exit_invalid;
    res.diagnostics = e.diagnostics;
    return res;
  }

  const std::vector<std::string> planned =
      x.command == "skew" ? std::vector<std::string>{"results.csv", "checks.csv", "plotdata.txt", "summary.txt",
                                                     "manifest.json"}
                          : std::vector<std::string>{"results.csv", "plotdata.txt", "summary.txt", "manifest.json"};
  if (opt.dry_run) {
    res.files = planned;
    res.summary = x.resolved.dump(2) + "\n";
    return res;
  }

  Outputs o;
  o.summary << "fsdyn " << kVersion << " " << x.command << " on " << x.system->kind() << " system, "
            << x.system->generator_count() << " generator(s)\n";
  try {
    if (x.command == "pressure") run_pressure(x, o);
    else if (x.command == "entropy") run_entropy(x, o);
    else if (x.command == "affine") run_affine(x, o);
    else if (x.command == "skew") run_skew(x, o);
    else run_verify(x, o);
  } catch (const Error& e) {
    res.exit_code = exit_invalid;
    std::string msg = e.what();
    if (auto* ni = dynamic_cast<const NonInvariantError*>(&e)) msg += " (defect " + csv_number(ni->defect) + ")";
    res.diagnostics.push_back({"/command", msg});
    return res;
  }

  o.files["summary.txt"] = o.summary.str();
  o.files["manifest.json"] = manifest_for(x, planned).dump(2) + "\n";

  const fs::path dir(x.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    res.exit_code = exit_error;
    res.diagnostics.push_back({"/output", "cannot create " + x.output + ": " + ec.message()});
    return res;
  }
  for (const auto& name : planned) {
    std::ofstream out(dir / name, std::ios::binary);
    out << o.files.at(name);
    if (!out) {
      res.exit_code = exit_error;
      res.diagnostics.push_back({"/output", "cannot write " + (dir / name).string()});
      return res;
    }
    res.files.push_back(name);
  }
  res.exit_code = o.exit_code;
  res.summary = o.summary.str();
  return res;
}

}  // namespace fsdyn::cli
