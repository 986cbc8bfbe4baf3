#include "fsdyn/rational.hpp"

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <limits>

namespace fsdyn {

std::optional<Rational> Rational::from_double(double x, std::int64_t max_den) {
  if (!std::isfinite(x) || std::fabs(x) > 1e15) return std::nullopt;
  // Continued-fraction convergents.
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = x;
  for (int iter = 0; iter < 64; ++iter) {
    double a = std::floor(r);
    if (std::fabs(a) > 1e15) break;
    auto ai = static_cast<std::int64_t>(a);
    __int128 p2 = static_cast<__int128>(ai) * p1 + p0;
    __int128 q2 = static_cast<__int128>(ai) * q1 + q0;
    if (q2 > max_den || p2 > INT64_MAX || p2 < -INT64_MAX) break;
    p0 = p1;
    q0 = q1;
    p1 = static_cast<std::int64_t>(p2);
    q1 = static_cast<std::int64_t>(q2);
    double approx = static_cast<double>(p1) / static_cast<double>(q1);
    if (std::fabs(approx - x) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(x)))
      return Rational(p1, q1);
    double frac = r - a;
    if (frac == 0) break;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

std::optional<Rational> Rational::parse(const std::string& text) {
  auto slash = text.find('/');
  char* end = nullptr;
  if (slash == std::string::npos) {
    long long n = std::strtoll(text.c_str(), &end, 10);
    if (end && *end == '\0' && !text.empty()) return Rational(n);
    double x = std::strtod(text.c_str(), &end);
    if (end && *end == '\0' && !text.empty()) return from_double(x);
    return std::nullopt;
  }
  std::string a = text.substr(0, slash), b = text.substr(slash + 1);
  long long n = std::strtoll(a.c_str(), &end, 10);
  if (a.empty() || *end != '\0') return std::nullopt;
  long long d = std::strtoll(b.c_str(), &end, 10);
  if (b.empty() || *end != '\0' || d == 0) return std::nullopt;
  return Rational(n, d);
}

}  // namespace fsdyn
