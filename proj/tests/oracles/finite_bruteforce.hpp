#pragma once

// Exhaustive subset search on small finite systems, written against raw
// tables so it shares no code with the library's search routines.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

struct Finite {
  std::size_t n = 0;
  std::vector<double> dist;                       // n*n
  std::vector<std::vector<std::size_t>> tables;   // generator -> image
  std::vector<double> phi;                        // potential values
};

// Orbit x, f_{w_n} x, f_{w_{n-1}} f_{w_n} x, ... (n points), w as 0-based letters.
inline std::vector<std::size_t> orbit(const Finite& s, const std::vector<std::size_t>& w, std::size_t x) {
  std::vector<std::size_t> out{x};
  for (std::size_t k = 1; k < w.size(); ++k) out.push_back(s.tables[w[w.size() - k]][out.back()]);
  return out;
}

inline double bowen(const Finite& s, const std::vector<std::size_t>& w, std::size_t x, std::size_t y) {
  auto a = orbit(s, w, x), b = orbit(s, w, y);
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, s.dist[a[k] * s.n + b[k]]);
  return d;
}

inline double birkhoff(const Finite& s, const std::vector<std::size_t>& w, std::size_t x) {
  double t = 0;
  for (std::size_t y : orbit(s, w, x)) t += s.phi[y];
  return t;
}

struct Tables {
  std::vector<double> d;  // pairwise Bowen distances
  std::vector<double> e;  // e^{S_w phi}
};

inline Tables tabulate(const Finite& s, const std::vector<std::size_t>& w) {
  Tables t{std::vector<double>(s.n * s.n), std::vector<double>(s.n)};
  for (std::size_t i = 0; i < s.n; ++i) {
    t.e[i] = std::exp(birkhoff(s, w, i));
    for (std::size_t j = 0; j < s.n; ++j) t.d[i * s.n + j] = bowen(s, w, i, j);
  }
  return t;
}

inline double subset_weight(const Tables& t, std::size_t n, std::uint32_t mask) {
  double total = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask >> i & 1) total += t.e[i];
  return total;
}

inline double max_separated(const Finite& s, const std::vector<std::size_t>& w, double eps) {
  const auto t = tabulate(s, w);
  double best = 0;
  for (std::uint32_t mask = 1; mask < (1u << s.n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < s.n && ok; ++i)
      for (std::size_t j = i + 1; j < s.n && ok; ++j)
        if ((mask >> i & 1) && (mask >> j & 1) && t.d[i * s.n + j] < eps) ok = false;
    if (ok) best = std::max(best, subset_weight(t, s.n, mask));
  }
  return best;
}

inline double min_spanning(const Finite& s, const std::vector<std::size_t>& w, double eps) {
  const auto t = tabulate(s, w);
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << s.n); ++mask) {
    bool ok = true;
    for (std::size_t x = 0; x < s.n && ok; ++x) {
      bool hit = false;
      for (std::size_t i = 0; i < s.n && !hit; ++i)
        if ((mask >> i & 1) && t.d[i * s.n + x] < eps) hit = true;
      ok = hit;
    }
    if (ok) best = std::min(best, subset_weight(t, s.n, mask));
  }
  return best;
}

}  // namespace oracle
