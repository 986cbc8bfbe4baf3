#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsdyn/rational.hpp"

namespace fsdyn {

enum class LineKind { circle, interval };

// y = y0 + slope * (x - x0) for x in [x0, x1).  On the circle the value is
// read mod 1, so y may leave [0, 1).
template <class T>
struct Branch {
  T x0, x1, y0, slope;
};

// A self-map of the circle R/Z or of [0, 1].  Piecewise-linear maps keep
// their branches (exactly, as rationals, when the data allows) so that
// preimages of intervals are computable; other closed forms only evaluate.
class IntervalMap {
 public:
  static IntervalMap times(std::int64_t k);
  static IntervalMap tent();
  static IntervalMap constant(Rational c);
  static IntervalMap identity();
  static IntervalMap rotation(Rational a);
  // Continuous map interpolating values[j] at breaks[j]; breaks run from 0 to 1.
  static IntervalMap piecewise_linear(const std::vector<Rational>& breaks,
                                      const std::vector<Rational>& values);
  static IntervalMap piecewise_linear(const std::vector<double>& breaks,
                                      const std::vector<double>& values);
  // x -> x + a + b sin(2 pi x) mod 1; has no preimage support.
  static IntervalMap sine_circle(double a, double b);

  double operator()(double x, LineKind kind) const;

  bool piecewise() const { return !branches_.empty(); }
  const std::vector<Branch<double>>& branches() const { return branches_; }
  const std::optional<std::vector<Branch<Rational>>>& exact_branches() const { return exact_; }
  const std::string& name() const { return name_; }

  // Largest |slope| over branches (the Lipschitz constant of a PL map).
  double max_slope() const;

 private:
  static IntervalMap from_exact(std::vector<Branch<Rational>> b, std::string name);

  std::string name_;
  std::vector<Branch<double>> branches_;
  std::optional<std::vector<Branch<Rational>>> exact_;
  double sine_a_ = 0, sine_b_ = 0;
};

}  // namespace fsdyn
