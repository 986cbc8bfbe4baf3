#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "fsdyn/potential.hpp"
#include "fsdyn/systems.hpp"

namespace fsdyn {

// ---------------------------------------------------------------- measures

// Lebesgue measure on the circle / interval, Haar (= Lebesgue) on the torus.
struct LebesgueHaar {};
// iid symbols on a full shift.
struct Bernoulli {
  std::vector<double> probabilities;
};
struct Atomic {
  PointSet points;
  std::vector<double> weights;
};
// Equal weights on sample points.
struct Empirical {
  PointSet points;
};
struct Measure;
struct ProductMeasure {
  std::shared_ptr<const Measure> first, second;
};

struct Measure {
  std::variant<LebesgueHaar, Bernoulli, Atomic, Empirical, ProductMeasure> v;
};

// Throws DataError unless the measure is a probability measure compatible
// with the system (mass 1 within 1e-12, nonnegative weights, points in space).
void validate_measure(const GeneratorSystem& s, const Measure& mu);

// Atomic view (points, weights) of an Atomic or Empirical measure.
Atomic atoms_of(const Measure& mu);

// ---------------------------------------------------------------- test sets

struct Interval {
  double lo = 0, hi = 0;
  bool lo_closed = true, hi_closed = false;
};
// Finite union of disjoint intervals of the circle / interval.
struct IntervalSet {
  std::vector<Interval> pieces;
};
// Half-open box [lo, hi) in [0,1)^d.
struct BoxSet {
  std::vector<double> lo, hi;
};
// {omega : omega_pos = symbol for every constraint}.
struct CylinderSet {
  std::vector<std::pair<std::int64_t, std::size_t>> constraints;
};
struct FiniteSet {
  std::vector<std::size_t> points;
};
using TestSet = std::variant<IntervalSet, BoxSet, CylinderSet, FiniteSet>;

bool set_contains(const GeneratorSystem& s, const TestSet& a, std::span<const double> x);

// Dyadic boxes of side 2^-level on [0,1)^d.
std::vector<TestSet> dyadic_boxes(std::size_t d, std::size_t level);

// ---------------------------------------------------------------- invariance

struct DefectOptions {
  std::size_t samples = 1'000'000;  // Monte Carlo budget where no exact rule exists
  std::uint64_t seed = 0;
};

struct DefectReport {
  double value = 0;        // max_i max_A |mu(f_i^{-1} A) - mu(A)|
  bool approximate = false;  // Monte Carlo was used
  std::size_t generator = 0, set = 0;  // where the max is attained
};

// Exact for atomic/empirical measures (any system), Lebesgue on
// piecewise-linear circle/interval maps with interval sets, and Bernoulli
// measures with cylinder sets.  Haar on the torus uses stratified Monte Carlo
// and is flagged approximate.  Other combinations throw UnsupportedError.
DefectReport invariance_defect(const GeneratorSystem& s, const Measure& mu,
                               const std::vector<TestSet>& sets, const DefectOptions& opt = {});

// ---------------------------------------------------------------- integration

struct Integral {
  double value = 0;
  double stderr_ = 0;  // Monte Carlo standard error, 0 when deterministic
  bool exact = true;
};

// int phi dmu: exact for atomic measures, constants, and Bernoulli with
// finitely many dependencies; midpoint quadrature (1e6 nodes) for Lebesgue on
// one-dimensional spaces; stratified Monte Carlo otherwise.
Integral integrate(const GeneratorSystem& s, const Measure& mu, const Potential& phi,
                   std::uint64_t seed = 0, std::size_t samples = 1'000'000);

}  // namespace fsdyn
