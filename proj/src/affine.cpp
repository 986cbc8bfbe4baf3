#include "fsdyn/affine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsdyn/error.hpp"
#include "fsdyn/parallel.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

namespace {

using Matrix = std::vector<long double>;

Matrix inverse(const std::vector<std::int64_t>& a, std::size_t d) {
  Matrix m(d * 2 * d, 0.0L);
  const std::size_t w = 2 * d;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) m[r * w + c] = static_cast<long double>(a[r * d + c]);
    m[r * w + d + r] = 1.0L;
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::fabs(m[r * w + c]) > std::fabs(m[piv * w + c])) piv = r;
    for (std::size_t k = 0; k < w; ++k) std::swap(m[c * w + k], m[piv * w + k]);
    const long double p = m[c * w + c];
    for (std::size_t k = 0; k < w; ++k) m[c * w + k] /= p;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == c) continue;
      const long double f = m[r * w + c];
      if (f == 0) continue;
      for (std::size_t k = 0; k < w; ++k) m[r * w + k] -= f * m[c * w + k];
    }
  }
  Matrix inv(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) inv[r * d + c] = m[r * w + d + c];
  return inv;
}

long double row_norm(const std::vector<std::int64_t>& a, std::size_t d) {
  long double best = 0;
  for (std::size_t r = 0; r < d; ++r) {
    long double t = 0;
    for (std::size_t c = 0; c < d; ++c) t += std::fabs(static_cast<long double>(a[r * d + c]));
    best = std::max(best, t);
  }
  return best;
}

constexpr std::size_t kBlock = 1 << 14;

}  // namespace

BallMeasure ball_measure(const TorusSystem& s, const BallQuery& q, std::size_t threads) {
  const Word& w = q.word;
  if (w.empty()) throw DataError("dynamics words must be nonempty");
  if (w.alphabet_size() != s.generator_count()) throw DataError("word alphabet does not match the system");
  if (!(q.eps > 0)) throw DataError("eps must be positive");
  if (q.max_samples == 0) throw DataError("max_samples must be positive");
  const std::size_t d = s.dimension();
  const std::size_t n = w.size();

  BallMeasure out;
  if (q.eps >= s.diameter()) {
    out.estimate = out.ci_low = out.ci_high = 1.0;
    return out;
  }

  long double norm = 0;
  for (std::size_t i = 0; i < s.generator_count(); ++i) norm = std::max(norm, row_norm(s.matrix(i), d));
  // While every point of the chain stays within eps of 0 in R^d, the next
  // image is within norm*eps <= 1/2, so circle norms equal real norms.
  out.linear = q.eps < 0.5 && static_cast<long double>(q.eps) * norm <= 0.5L;

  std::vector<Matrix> inv;
  long double volume = 1;
  for (std::size_t c = 0; c < d; ++c) volume *= std::min<long double>(2 * static_cast<long double>(q.eps), 1.0L);
  if (out.linear) {
    for (std::size_t i = 0; i < s.generator_count(); ++i) inv.push_back(inverse(s.matrix(i), d));
    for (std::size_t k = 1; k < n; ++k)
      volume /= std::fabs(static_cast<long double>(integer_determinant(s.matrix(w[k]), d)));
  }
  const bool whole = q.eps >= 0.5;

  auto count = [&](std::size_t lo, std::size_t hi) {
    std::vector<long double> y(d), z(d);
    std::vector<double> a(d), b(d);
    std::size_t hits = 0;
    for (std::size_t j = lo; j < hi; ++j) {
      bool in = true;
      if (out.linear) {
        // y = A_{w_2..w_n} x, pulled back one letter at a time
        for (std::size_t c = 0; c < d; ++c)
          y[c] = q.eps * (2.0L * to_unit(counter_draw(q.seed, q.stream, j * d + c)) - 1.0L);
        for (std::size_t k = 1; k < n && in; ++k) {
          const Matrix& m = inv[w[k]];
          for (std::size_t r = 0; r < d; ++r) {
            long double t = 0;
            for (std::size_t c = 0; c < d; ++c) t += m[r * d + c] * y[c];
            z[r] = t;
          }
          y.swap(z);
          for (std::size_t c = 0; c < d && in; ++c) in = std::fabs(y[c]) < q.eps;
        }
      } else {
        for (std::size_t c = 0; c < d; ++c) {
          const double t = to_unit(counter_draw(q.seed, q.stream, j * d + c));
          a[c] = whole ? t : q.eps * (2.0 * t - 1.0);
          if (a[c] < 0) a[c] += 1.0;
        }
        for (std::size_t c = 0; c < d && in; ++c) in = circle_norm(a[c]) < q.eps;
        for (std::size_t k = n; k-- > 1 && in;) {
          s.apply_linear(w[k], a, b);
          a.swap(b);
          for (std::size_t c = 0; c < d && in; ++c) in = circle_norm(a[c]) < q.eps;
        }
      }
      hits += in;
    }
    return hits;
  };

  auto run = [&](std::size_t lo, std::size_t hi) {
    const std::size_t blocks = (hi - lo + kBlock - 1) / kBlock;
    std::vector<std::size_t> h(blocks, 0);
    parallel_for(blocks, threads, [&](std::size_t b) {
      h[b] = count(lo + b * kBlock, std::min(hi, lo + (b + 1) * kBlock));
    });
    std::size_t t = 0;
    for (auto v : h) t += v;
    return t;
  };

  std::size_t N = std::min(std::max<std::size_t>(1000, q.sample_count), q.max_samples);
  std::size_t hits = run(0, N);
  while (hits < q.target_hits && N < q.max_samples) {
    const std::size_t next = std::min(2 * N, q.max_samples);
    hits += run(N, next);
    N = next;
  }

  out.samples = N;
  out.hits = hits;
  const double v = static_cast<double>(volume);
  const double p = static_cast<double>(hits) / static_cast<double>(N);
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(N));
  out.estimate = v * p;
  out.ci_low = v * std::max(0.0, p - 1.96 * se);
  out.ci_high = v * std::min(1.0, p + 1.96 * se);
  if (hits == 0) {
    out.zero_hits = true;
    out.ci_high = v * 3.0 / static_cast<double>(N);  // rule of three
  }
  out.underresolved = hits < q.target_hits;
  return out;
}

AffineReport entropy_bounds(const TorusSystem& s, const AffineParams& p) {
  if (p.eps.empty() || p.horizons.empty()) throw DataError("eps schedule and horizons must be nonempty");
  for (std::size_t i = 0; i < p.eps.size(); ++i) {
    if (!(p.eps[i] > 0)) throw DataError("eps must be positive");
    if (i && !(p.eps[i] < p.eps[i - 1])) throw DataError("eps schedule must be strictly decreasing");
  }
  for (std::size_t i = 0; i < p.horizons.size(); ++i) {
    if (p.horizons[i] == 0) throw DataError("horizons must be positive");
    if (i && p.horizons[i] <= p.horizons[i - 1]) throw DataError("horizons must be strictly increasing");
  }
  if (p.strategy.mode == WordStrategy::Mode::montecarlo && p.strategy.sample_count == 0)
    throw DataError("montecarlo needs a positive sample count");
  const std::size_t m = s.generator_count();
  for (std::size_t n : p.horizons) strategy_word_count(p.strategy, m, n);

  AffineReport rep;
  for (std::size_t ei = 0; ei < p.eps.size(); ++ei) {
    const double eps = p.eps[ei];
    for (std::size_t n : p.horizons) {
      const std::size_t count = strategy_word_count(p.strategy, m, n);
      std::vector<AffineBall> balls(count);
      parallel_for(count, p.threads, [&](std::size_t i) {
        BallQuery q;
        q.word = strategy_word(p.strategy, m, n, i);
        q.eps = eps;
        q.sample_count = p.sample_count;
        q.max_samples = p.max_samples;
        q.seed = p.seed;
        // the same word at the same eps always sees the same draws
        q.stream = derive_seed(word_index(q.word) * 0x9e3779b97f4a7c15ULL + n, ei);
        balls[i].n = n;
        balls[i].eps = eps;
        balls[i].word_id = p.strategy.mode == WordStrategy::Mode::montecarlo ? "sample:" + std::to_string(i)
                                                                               : q.word.str();
        balls[i].ball = ball_measure(s, q, 1);
      });

      AffineRow row;
      row.n = n;
      row.eps = eps;
      row.words = count;
      // log(1/mu), with the upper CI bound standing in for zero-hit balls
      std::vector<double> l(count);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < count; ++i) {
        const auto& b = balls[i].ball;
        row.underresolved += b.underresolved;
        l[i] = -std::log(b.zero_hits ? b.ci_high : b.estimate);
        top = std::max(top, l[i]);
      }
      // shifted by the largest term so that both averages see the same
      // rounding and Jensen's inequality survives in floating point
      double mean_gap = 0, mean_exp = 0;
      for (double v : l) {
        mean_gap += v - top;
        mean_exp += std::exp(v - top);
      }
      mean_gap /= static_cast<double>(count);
      mean_exp /= static_cast<double>(count);
      row.lower = (top + mean_gap) / static_cast<double>(n);
      row.upper = (top + std::log(mean_exp)) / static_cast<double>(n);
      if (row.lower > row.upper)
        rep.diagnostics.push_back("lower exceeds upper at n=" + std::to_string(n) + " eps=" + std::to_string(eps));
      if (row.underresolved) {
        rep.underresolved = true;
        rep.diagnostics.push_back(std::to_string(row.underresolved) + " underresolved balls at n=" +
                                  std::to_string(n) + " eps=" + std::to_string(eps));
      }
      rep.rows.push_back(row);
      for (auto& b : balls) rep.balls.push_back(std::move(b));
    }
  }

  const std::size_t H = p.horizons.size();
  const auto& last = rep.rows.back();
  rep.raw_lower = last.lower;
  rep.raw_upper = last.upper;
  if (H >= 2) {
    const auto& prev = rep.rows[rep.rows.size() - 2];
    const double dn = static_cast<double>(last.n - prev.n);
    rep.lower_estimate = (last.n * last.lower - prev.n * prev.lower) / dn;
    rep.upper_estimate = (last.n * last.upper - prev.n * prev.upper) / dn;
  } else {
    rep.lower_estimate = last.lower;
    rep.upper_estimate = last.upper;
  }
  return rep;
}

}  // namespace fsdyn
