#include "fsdyn/interval_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fsdyn {

namespace {

Branch<double> to_double_branch(const Branch<Rational>& b) {
  return {b.x0.to_double(), b.x1.to_double(), b.y0.to_double(), b.slope.to_double()};
}

template <class T>
void check_breaks(const std::vector<T>& breaks, const std::vector<T>& values) {
  if (breaks.size() < 2 || breaks.size() != values.size())
    throw DataError("piecewise-linear map needs matching breaks/values of length >= 2");
  if (!(breaks.front() == T(0)) || !(breaks.back() == T(1)))
    throw DataError("piecewise-linear breaks must start at 0 and end at 1");
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i - 1] < breaks[i])) throw DataError("piecewise-linear breaks must increase");
}

}  // namespace

IntervalMap IntervalMap::from_exact(std::vector<Branch<Rational>> b, std::string name) {
  IntervalMap f;
  f.name_ = std::move(name);
  for (const auto& br : b) f.branches_.push_back(to_double_branch(br));
  f.exact_ = std::move(b);
  return f;
}

IntervalMap IntervalMap::times(std::int64_t k) {
  return from_exact({{Rational(0), Rational(1), Rational(0), Rational(k)}},
                    "times" + std::to_string(k));
}

IntervalMap IntervalMap::tent() {
  return from_exact({{Rational(0), Rational(1, 2), Rational(0), Rational(2)},
                     {Rational(1, 2), Rational(1), Rational(1), Rational(-2)}},
                    "tent");
}

IntervalMap IntervalMap::constant(Rational c) {
  return from_exact({{Rational(0), Rational(1), c, Rational(0)}}, "constant");
}

IntervalMap IntervalMap::identity() {
  return from_exact({{Rational(0), Rational(1), Rational(0), Rational(1)}}, "identity");
}

IntervalMap IntervalMap::rotation(Rational a) {
  return from_exact({{Rational(0), Rational(1), a, Rational(1)}}, "rotation");
}

IntervalMap IntervalMap::piecewise_linear(const std::vector<Rational>& breaks,
                                          const std::vector<Rational>& values) {
  check_breaks(breaks, values);
  std::vector<Branch<Rational>> b;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    b.push_back({breaks[i], breaks[i + 1], values[i],
                 (values[i + 1] - values[i]) / (breaks[i + 1] - breaks[i])});
  return from_exact(std::move(b), "piecewise_linear");
}

IntervalMap IntervalMap::piecewise_linear(const std::vector<double>& breaks,
                                          const std::vector<double>& values) {
  check_breaks(breaks, values);
  std::vector<Rational> rb, rv;
  bool exact = true;
  try {
    for (double x : breaks) {
      auto r = Rational::from_double(x);
      if (!r) exact = false;
      else rb.push_back(*r);
    }
    for (double x : values) {
      auto r = Rational::from_double(x);
      if (!r) exact = false;
      else rv.push_back(*r);
    }
    if (exact) return piecewise_linear(rb, rv);
  } catch (const RationalOverflow&) {
  }
  IntervalMap f;
  f.name_ = "piecewise_linear";
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    f.branches_.push_back({breaks[i], breaks[i + 1], values[i],
                           (values[i + 1] - values[i]) / (breaks[i + 1] - breaks[i])});
  return f;
}

IntervalMap IntervalMap::sine_circle(double a, double b) {
  IntervalMap f;
  f.name_ = "sine_circle";
  f.sine_a_ = a;
  f.sine_b_ = b;
  return f;
}

double IntervalMap::operator()(double x, LineKind kind) const {
  double y;
  if (branches_.empty()) {
    y = x + sine_a_ + sine_b_ * std::sin(2 * std::numbers::pi * x);
  } else {
    // First branch whose right end exceeds x; x == 1 falls into the last one.
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const Branch<double>& br) { return v < br.x1; });
    if (it == branches_.end()) --it;
    y = it->y0 + it->slope * (x - it->x0);
  }
  if (kind == LineKind::circle) {
    y -= std::floor(y);
    if (y >= 1.0) y = 0.0;
    return y;
  }
  return std::clamp(y, 0.0, 1.0);
}

double IntervalMap::max_slope() const {
  double s = 0;
  for (const auto& b : branches_) s = std::max(s, std::fabs(b.slope));
  if (branches_.empty()) s = 1 + 2 * std::numbers::pi * std::fabs(sine_b_);
  return s;
}

}  // namespace fsdyn
