#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsdyn/affine.hpp"
#include "fsdyn/entropy.hpp"
#include "fsdyn/measure.hpp"
#include "fsdyn/pressure.hpp"

namespace fsdyn {

enum class CheckStatus { pass, fail, underresolved };
std::string to_string(CheckStatus s);

using CheckParameters = std::vector<std::pair<std::string, std::string>>;

struct CheckResult {
  std::string id;
  std::string surrogate;  // the finite-n statement actually tested
  CheckStatus status = CheckStatus::fail;
  double lhs = 0, rhs = 0;
  double slack = 0;       // >= -tolerance passes an inequality; |lhs - rhs| for identities
  double tolerance = 0;
  CheckParameters parameters;
  std::string fingerprint;  // hash of parameters; both sides share it
  std::string note;
};

// 16 hex digits over "key=value;" pairs.
std::string fingerprint(const CheckParameters& p);

// Inputs shared by the pressure-based checks.
struct CheckSettings {
  std::vector<std::size_t> horizons{1, 2, 3};
  double eps = 0.25;
  SearchMode mode = SearchMode::exact;
  WordStrategy strategy;
  std::size_t resolution = 0;  // grid for continuous spaces when candidates is empty
  PointSet candidates;
  std::size_t threads = 1;
  SearchOptions search;
  double tolerance = 1e-9;  // relative, on exact systems
};

// ---------------------------------------------------------------- skew products

// log P_n(F, c + phi) >= nc + n log m + log P_n(fiber, phi) for each horizon.
CheckResult check_skew_lower(const SystemPtr& fiber, const Potential& phi, double c, const CheckSettings& cs);
// r_n = Q_n(F) / (e^{nc} m^n Q_n(fiber)); passes while the least-squares
// slope of log r_n in n stays within +-0.05.
CheckResult check_skew_upper(const SystemPtr& fiber, const Potential& phi, double c, const CheckSettings& cs);
// |P(F, c + phi) - (c + log m + P(fiber, phi))| <= 0.1 for the two-horizon
// estimates at cs.eps, P_n only.  With sampling, passes when the gap plus two
// slope standard errors is within the tolerance, fails when the gap minus two
// standard errors exceeds it, and is underresolved in between.
CheckResult check_skew_pressure_relation(const SystemPtr& fiber, const Potential& phi, double c,
                                         const CheckSettings& cs, double tolerance = 0.1);

// ---------------------------------------------------------------- pressure

// Finite-n surrogates of the pressure property list, one result each:
// pressure_monotone_in_potential, pressure_sup_norm_bound, pressure_log_convex,
// pressure_constant_shift, pressure_sum_bound, pressure_power_bound,
// pressure_absolute_value_bound, pressure_monotone_in_eps, spanning_below_separated.
std::vector<CheckResult> check_pressure_properties(const GeneratorSystem& s, const Potential& phi,
                                                   const Potential& psi, const CheckSettings& cs);

// Q_n(G1 x G2) <= Q_n(G1) Q_n(G2) and P_n(G1 x G2) >= P_n(G1) P_n(G2) on the
// product of the factor candidate sets.
std::vector<CheckResult> check_product_rules(const SystemPtr& g1, const SystemPtr& g2, const Potential& phi1,
                                             const Potential& phi2, const CheckSettings& cs);

// a_n(xi1 x xi2) = a_n(xi1) + a_n(xi2) under the product measure, and the
// rate of the product is at most the sum of the factor rates.
std::vector<CheckResult> check_product_entropy(const SystemPtr& g1, const Measure& mu1, const Partition& xi1,
                                               const SystemPtr& g2, const Measure& mu2, const Partition& xi2,
                                               const EntropyParams& p);

// ---------------------------------------------------------------- measures

struct VariationalInputs {
  std::vector<Partition> partitions;
  EntropyParams entropy;
  EstimatorParams pressure;
  std::uint64_t integral_seed = 0;
  std::size_t integral_samples = 1'000'000;
  double tolerance = 0.05;
};

// variational_log2_slack: h + int phi < log 2 + P, strictly.
// variational_inequality: h + int phi <= P + tolerance (+ 1.96 stderr of the integral).
// Throws NonInvariantError for non-invariant measures.
std::vector<CheckResult> check_variational(const GeneratorSystem& s, const Measure& mu, const Potential& phi,
                                           const VariationalInputs& in);

// invariance_defect against a tolerance.
CheckResult check_invariance(const GeneratorSystem& s, const Measure& mu, const std::vector<TestSet>& sets,
                             const DefectOptions& opt, double tolerance);
// Passes when entropy_rate refuses the measure; lhs is the reported defect.
CheckResult check_noninvariant_rejected(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                                        const EntropyParams& p);

// Affine bounds: lower <= upper on every row, and the upper estimate stays
// below the topological entropy estimate plus the tolerance.
std::vector<CheckResult> check_affine(const TorusSystem& t, const AffineParams& p, const EstimatorParams* pressure,
                                      double tolerance = 0.15);

// Pressure properties, skew lemmas and product rules on one finite system,
// ordered by check id.
std::vector<CheckResult> finite_suite(const std::shared_ptr<const FiniteSystem>& s, const Potential& phi,
                                      const Potential& psi, double c, const CheckSettings& cs);

// Worst status over a list: fail > underresolved > pass.
CheckStatus overall(const std::vector<CheckResult>& checks);

}  // namespace fsdyn
