#include "fsdyn/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsdyn/error.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

PointSet::PointSet(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim == 0 || coords_.size() % dim != 0) throw DataError("point set size mismatch");
}

void PointSet::push_back(std::span<const double> x) {
  if (x.size() != dim_) throw DataError("point dimension mismatch");
  coords_.insert(coords_.end(), x.begin(), x.end());
}

Point apply_generator(const GeneratorSystem& s, std::size_t i, std::span<const double> x) {
  if (i >= s.generator_count())
    throw DataError("generator index " + std::to_string(i) + " out of range");
  if (x.size() != s.dimension()) throw DataError("point dimension mismatch");
  Point out(s.dimension());
  s.apply(i, x, out);
  return out;
}

Point apply_word(const GeneratorSystem& s, const Word& w, std::span<const double> x) {
  Point cur(x.begin(), x.end()), next(x.size());
  for (std::size_t j = w.size(); j-- > 0;) {
    if (w[j] >= s.generator_count()) throw DataError("letter outside the generator range");
    s.apply(w[j], cur, next);
    std::swap(cur, next);
  }
  return cur;
}

void evaluation_orbit_into(const GeneratorSystem& s, const Word& w, std::span<const double> x,
                           double* out) {
  const std::size_t n = w.size(), d = s.dimension();
  if (n == 0) throw DataError("evaluation orbit of the empty word");
  std::copy(x.begin(), x.end(), out);
  for (std::size_t k = 1; k < n; ++k) {
    // f_{w_{n-k+1} ... w_n} = f_{w_{n-k+1}} o f_{w_{n-k+2} ... w_n}
    s.apply(w[n - k], {out + (k - 1) * d, d}, {out + k * d, d});
  }
}

std::vector<Point> evaluation_orbit(const GeneratorSystem& s, const Word& w,
                                    std::span<const double> x) {
  const std::size_t n = w.size(), d = s.dimension();
  if (x.size() != d) throw DataError("point dimension mismatch");
  for (Letter a : w.letters())
    if (a >= s.generator_count()) throw DataError("letter outside the generator range");
  std::vector<double> flat(n * d);
  evaluation_orbit_into(s, w, x, flat.data());
  std::vector<Point> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k].assign(flat.begin() + k * d, flat.begin() + (k + 1) * d);
  return out;
}

double bowen_distance(const GeneratorSystem& s, const Word& w, std::span<const double> x,
                      std::span<const double> y) {
  auto ox = evaluation_orbit(s, w, x);
  auto oy = evaluation_orbit(s, w, y);
  double d = 0;
  for (std::size_t k = 0; k < ox.size(); ++k) d = std::max(d, s.distance(ox[k], oy[k]));
  return d;
}

// ---------------------------------------------------------------- finite

FiniteSystem::FiniteSystem(std::size_t n, std::vector<double> dist,
                           std::vector<std::vector<std::size_t>> tables)
    : n_(n), dist_(std::move(dist)), tables_(std::move(tables)) {
  if (n == 0) throw DataError("finite system needs at least one point");
  if (dist_.size() != n * n) throw DataError("distance matrix must be N x N");
  if (tables_.empty()) throw DataError("finite system needs at least one generator");
  for (const auto& t : tables_) {
    if (t.size() != n) throw DataError("transition table must have N entries");
    for (std::size_t v : t)
      if (v >= n) throw DataError("transition table maps outside {0,...,N-1}");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist_[i * n + i] != 0) throw DataError("distance matrix must vanish on the diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      double d = dist_[i * n + j];
      if (!(d >= 0) || d != dist_[j * n + i])
        throw DataError("distance matrix must be symmetric and nonnegative");
      if (i != j && d == 0) throw DataError("distance between distinct points must be positive");
    }
  }
  if (n <= 200)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          if (dist_[i * n + k] > dist_[i * n + j] + dist_[j * n + k] + 1e-12)
            throw DataError("distance matrix violates the triangle inequality");
}

FiniteSystem FiniteSystem::discrete(std::size_t n, std::vector<std::vector<std::size_t>> tables) {
  std::vector<double> d(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
  return FiniteSystem(n, std::move(d), std::move(tables));
}

void FiniteSystem::apply(std::size_t i, std::span<const double> x, std::span<double> out) const {
  out[0] = static_cast<double>(tables_[i][static_cast<std::size_t>(x[0])]);
}

double FiniteSystem::distance(std::span<const double> x, std::span<const double> y) const {
  return dist_[static_cast<std::size_t>(x[0]) * n_ + static_cast<std::size_t>(y[0])];
}

double FiniteSystem::diameter() const { return *std::max_element(dist_.begin(), dist_.end()); }

bool FiniteSystem::contains(std::span<const double> x) const {
  return x.size() == 1 && x[0] >= 0 && x[0] < static_cast<double>(n_) && x[0] == std::floor(x[0]);
}

// ---------------------------------------------------------------- circle / interval

namespace {

std::int64_t cells_for(double eps) {
  if (!(eps > 0)) throw DataError("epsilon must be positive");
  double k = std::floor(1.0 / eps);
  return static_cast<std::int64_t>(std::clamp(k, 1.0, 1e9));
}

std::int64_t cell_of(double x, std::int64_t k) {
  auto c = static_cast<std::int64_t>(std::floor(x * static_cast<double>(k)));
  return std::clamp<std::int64_t>(c, 0, k - 1);
}

}  // namespace

double circle_norm(double x) {
  double f = x - std::floor(x);
  return std::min(f, 1.0 - f);
}

IntervalSystem::IntervalSystem(LineKind kind, std::vector<IntervalMap> maps)
    : line_(kind), maps_(std::move(maps)) {
  if (maps_.empty()) throw DataError("interval system needs at least one map");
  if (kind == LineKind::interval)
    for (const auto& f : maps_) {
      if (!f.piecewise()) throw DataError("closed-form map " + f.name() + " is a circle map");
      const auto& b = f.branches();
      for (std::size_t j = 0; j < b.size(); ++j) {
        double ya = b[j].y0, yb = b[j].y0 + b[j].slope * (b[j].x1 - b[j].x0);
        if (std::min(ya, yb) < -1e-12 || std::max(ya, yb) > 1 + 1e-12)
          throw DataError("map " + f.name() + " leaves [0,1]");
        if (j + 1 < b.size() && std::fabs(yb - b[j + 1].y0) > 1e-12)
          throw DataError("map " + f.name() + " is discontinuous on [0,1]");
      }
    }
}

void IntervalSystem::apply(std::size_t i, std::span<const double> x, std::span<double> out) const {
  out[0] = maps_[i](x[0], line_);
}

double IntervalSystem::distance(std::span<const double> x, std::span<const double> y) const {
  double d = std::fabs(x[0] - y[0]);
  return line_ == LineKind::circle ? std::min(d, 1.0 - d) : d;
}

bool IntervalSystem::contains(std::span<const double> x) const {
  if (x.size() != 1) return false;
  return line_ == LineKind::circle ? (x[0] >= 0 && x[0] < 1) : (x[0] >= 0 && x[0] <= 1);
}

void IntervalSystem::key_layout(double eps, std::vector<KeyComponent>& layout) const {
  std::int64_t k = cells_for(eps);
  layout.push_back({line_ == LineKind::circle ? KeyComponent::Kind::cyclic
                                              : KeyComponent::Kind::linear,
                    k});
}

void IntervalSystem::cell_key(std::span<const double> x, double eps, std::int64_t* out) const {
  out[0] = cell_of(x[0], cells_for(eps));
}

std::vector<double> range_coverage(const IntervalSystem& s, std::size_t bins) {
  std::vector<double> out;
  const std::size_t fine = 16 * bins;
  for (std::size_t i = 0; i < s.generator_count(); ++i) {
    std::vector<char> hit(bins, 0);
    for (std::size_t j = 0; j <= fine; ++j) {
      double x = static_cast<double>(j) / static_cast<double>(fine);
      if (s.line() == LineKind::circle && j == fine) break;
      double y = s.maps()[i](x, s.line());
      hit[static_cast<std::size_t>(cell_of(y, static_cast<std::int64_t>(bins)))] = 1;
    }
    out.push_back(static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
                  static_cast<double>(bins));
  }
  return out;
}

// ---------------------------------------------------------------- torus

std::int64_t integer_determinant(const std::vector<std::int64_t>& a, std::size_t d) {
  if (a.size() != d * d) throw DataError("matrix must be d x d");
  // Bareiss fraction-free elimination.
  std::vector<__int128> m(a.begin(), a.end());
  __int128 prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    if (m[k * d + k] == 0) {
      std::size_t r = k + 1;
      while (r < d && m[r * d + k] == 0) ++r;
      if (r == d) return 0;
      for (std::size_t c = 0; c < d; ++c) std::swap(m[k * d + c], m[r * d + c]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < d; ++i)
      for (std::size_t j = k + 1; j < d; ++j)
        m[i * d + j] = (m[i * d + j] * m[k * d + k] - m[i * d + k] * m[k * d + j]) / prev;
    prev = m[k * d + k];
  }
  return static_cast<std::int64_t>(sign * m[d * d - 1]);
}

TorusSystem::TorusSystem(std::size_t d, std::vector<std::vector<std::int64_t>> matrices,
                         std::vector<std::vector<double>> translations)
    : d_(d), matrices_(std::move(matrices)), translations_(std::move(translations)) {
  if (d == 0) throw DataError("torus dimension must be positive");
  if (matrices_.empty()) throw DataError("torus system needs at least one matrix");
  if (translations_.empty()) translations_.assign(matrices_.size(), std::vector<double>(d, 0.0));
  if (translations_.size() != matrices_.size())
    throw DataError("one translation per matrix is required");
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    if (matrices_[i].size() != d * d) throw DataError("torus matrix must be d x d");
    if (integer_determinant(matrices_[i], d) == 0)
      throw DataError("torus matrix " + std::to_string(i) +
                      " has determinant 0; endomorphisms must be surjective");
    if (translations_[i].size() != d) throw DataError("translation must have d entries");
    for (double& t : translations_[i]) t -= std::floor(t);
  }
}

void TorusSystem::apply_linear(std::size_t i, std::span<const double> x,
                               std::span<double> out) const {
  const auto& a = matrices_[i];
  for (std::size_t r = 0; r < d_; ++r) {
    double y = 0;
    for (std::size_t c = 0; c < d_; ++c) y += static_cast<double>(a[r * d_ + c]) * x[c];
    y -= std::floor(y);
    out[r] = y >= 1.0 ? 0.0 : y;
  }
}

void TorusSystem::apply(std::size_t i, std::span<const double> x, std::span<double> out) const {
  const auto& a = matrices_[i];
  const auto& t = translations_[i];
  double buf[16];
  std::vector<double> big;
  double* y = buf;
  if (d_ > 16) {
    big.resize(d_);
    y = big.data();
  }
  for (std::size_t r = 0; r < d_; ++r) {
    double v = t[r];
    for (std::size_t c = 0; c < d_; ++c) v += static_cast<double>(a[r * d_ + c]) * x[c];
    v -= std::floor(v);
    y[r] = v >= 1.0 ? 0.0 : v;
  }
  std::copy(y, y + d_, out.begin());
}

double TorusSystem::distance(std::span<const double> x, std::span<const double> y) const {
  double d = 0;
  for (std::size_t c = 0; c < d_; ++c) d = std::max(d, circle_norm(x[c] - y[c]));
  return d;
}

bool TorusSystem::contains(std::span<const double> x) const {
  if (x.size() != d_) return false;
  for (double v : x)
    if (!(v >= 0 && v < 1)) return false;
  return true;
}

void TorusSystem::key_layout(double eps, std::vector<KeyComponent>& layout) const {
  std::int64_t k = cells_for(eps);
  for (std::size_t c = 0; c < d_; ++c) layout.push_back({KeyComponent::Kind::cyclic, k});
}

void TorusSystem::cell_key(std::span<const double> x, double eps, std::int64_t* out) const {
  std::int64_t k = cells_for(eps);
  for (std::size_t c = 0; c < d_; ++c) out[c] = cell_of(x[c], k);
}

// ---------------------------------------------------------------- full shift

std::int64_t shift_resolution(double eps) {
  if (!(eps > 0)) throw DataError("epsilon must be positive");
  if (eps > 1) return -1;
  auto j = static_cast<std::int64_t>(std::floor(std::log2(1.0 / eps)));
  // Guard against log2 rounding: need 2^-J >= eps and 2^-(J+1) < eps.
  while (j > 0 && std::ldexp(1.0, static_cast<int>(-j)) < eps) --j;
  while (std::ldexp(1.0, static_cast<int>(-(j + 1))) >= eps) ++j;
  return j;
}

double shift_window_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t r = (a.size() - 1) / 2;
  for (std::size_t j = 0; j <= r; ++j)
    if (a[r - j] != b[r - j] || a[r + j] != b[r + j]) return std::ldexp(1.0, -static_cast<int>(j));
  return 0.0;
}

FullShiftSystem::FullShiftSystem(std::size_t k, std::size_t radius, std::vector<ShiftGenerator> gens)
    : k_(k), radius_(radius), gens_(std::move(gens)) {
  if (k == 0) throw DataError("full shift needs at least one symbol");
  if (gens_.empty()) throw DataError("full shift needs at least one generator");
  for (auto& g : gens_) {
    if (g.permutation.empty()) {
      g.permutation.resize(k);
      for (std::size_t a = 0; a < k; ++a) g.permutation[a] = a;
    }
    if (g.permutation.size() != k) throw DataError("symbol permutation must have k entries");
    std::vector<char> seen(k, 0);
    for (std::size_t v : g.permutation) {
      if (v >= k || seen[v]) throw DataError("symbol map must be a permutation");
      seen[v] = 1;
    }
    if (static_cast<std::size_t>(std::llabs(g.shift)) > radius)
      throw DataError("shift amount exceeds the window radius");
  }
}

void FullShiftSystem::apply(std::size_t i, std::span<const double> x, std::span<double> out) const {
  const auto& g = gens_[i];
  const auto w = static_cast<std::int64_t>(2 * radius_ + 1);
  for (std::int64_t p = 0; p < w; ++p) {
    std::int64_t q = p + g.shift;
    out[static_cast<std::size_t>(p)] =
        (q >= 0 && q < w)
            ? static_cast<double>(g.permutation[static_cast<std::size_t>(x[static_cast<std::size_t>(q)])])
            : 0.0;
  }
}

double FullShiftSystem::distance(std::span<const double> x, std::span<const double> y) const {
  return shift_window_distance(x, y);
}

bool FullShiftSystem::contains(std::span<const double> x) const {
  if (x.size() != 2 * radius_ + 1) return false;
  for (double v : x)
    if (!(v >= 0 && v < static_cast<double>(k_) && v == std::floor(v))) return false;
  return true;
}

void FullShiftSystem::key_layout(double eps, std::vector<KeyComponent>& layout) const {
  if (shift_resolution(eps) >= 0) layout.push_back({KeyComponent::Kind::exact, 0});
}

namespace {

std::int64_t window_hash(std::span<const double> window, std::int64_t j) {
  const auto r = static_cast<std::int64_t>((window.size() - 1) / 2);
  j = std::min(j, r);
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (std::int64_t i = -j; i <= j; ++i)
    h = mix64(h ^ static_cast<std::uint64_t>(window[static_cast<std::size_t>(i + r)]));
  return static_cast<std::int64_t>(h);
}

}  // namespace

void FullShiftSystem::cell_key(std::span<const double> x, double eps, std::int64_t* out) const {
  std::int64_t j = shift_resolution(eps);
  if (j >= 0) out[0] = window_hash(x, j);
}

std::pair<std::int64_t, std::int64_t> shift_relevant_range(const FullShiftSystem& s,
                                                           std::size_t n, double eps) {
  std::int64_t j = shift_resolution(eps);
  if (j < 0) return {1, 0};
  std::int64_t smin = 0, smax = 0;
  for (const auto& g : s.generators()) {
    smin = std::min(smin, g.shift);
    smax = std::max(smax, g.shift);
  }
  const auto steps = static_cast<std::int64_t>(n) - 1;
  return {steps * smin - j, steps * smax + j};
}

// ---------------------------------------------------------------- product

ProductSystem::ProductSystem(SystemPtr first, SystemPtr second)
    : a_(std::move(first)), b_(std::move(second)) {
  if (!a_ || !b_) throw DataError("product of a null system");
  m1_ = a_->generator_count();
  m2_ = b_->generator_count();
  d1_ = a_->dimension();
  d2_ = b_->dimension();
}

void ProductSystem::apply(std::size_t i, std::span<const double> x, std::span<double> out) const {
  a_->apply(i / m2_, x.subspan(0, d1_), out.subspan(0, d1_));
  b_->apply(i % m2_, x.subspan(d1_, d2_), out.subspan(d1_, d2_));
}

double ProductSystem::distance(std::span<const double> x, std::span<const double> y) const {
  return std::max(a_->distance(x.subspan(0, d1_), y.subspan(0, d1_)),
                  b_->distance(x.subspan(d1_, d2_), y.subspan(d1_, d2_)));
}

double ProductSystem::diameter() const { return std::max(a_->diameter(), b_->diameter()); }

bool ProductSystem::contains(std::span<const double> x) const {
  return x.size() == d1_ + d2_ && a_->contains(x.subspan(0, d1_)) && b_->contains(x.subspan(d1_, d2_));
}

void ProductSystem::key_layout(double eps, std::vector<KeyComponent>& layout) const {
  a_->key_layout(eps, layout);
  b_->key_layout(eps, layout);
}

void ProductSystem::cell_key(std::span<const double> x, double eps, std::int64_t* out) const {
  std::vector<KeyComponent> la;
  a_->key_layout(eps, la);
  a_->cell_key(x.subspan(0, d1_), eps, out);
  b_->cell_key(x.subspan(d1_, d2_), eps, out + la.size());
}

std::pair<Word, Word> ProductSystem::split_word(const Word& w) const {
  if (w.alphabet_size() != m1_ * m2_) throw DataError("word alphabet does not match the product");
  std::vector<Letter> u(w.size()), v(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    u[j] = static_cast<Letter>(w[j] / m2_);
    v[j] = static_cast<Letter>(w[j] % m2_);
  }
  return {Word(m1_, std::move(u)), Word(m2_, std::move(v))};
}

Word ProductSystem::pair_words(const Word& u, const Word& v) const {
  if (u.size() != v.size()) throw DataError("paired words must have equal length");
  if (u.alphabet_size() != m1_ || v.alphabet_size() != m2_)
    throw DataError("word alphabets do not match the factors");
  std::vector<Letter> w(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) w[j] = static_cast<Letter>(u[j] * m2_ + v[j]);
  return Word(m1_ * m2_, std::move(w));
}

SystemPtr build_product(SystemPtr g1, SystemPtr g2) {
  return std::make_shared<ProductSystem>(std::move(g1), std::move(g2));
}

FiniteSystem flatten_finite_product(const FiniteSystem& a, const FiniteSystem& b) {
  const std::size_t n1 = a.point_count(), n2 = b.point_count(), n = n1 * n2;
  std::vector<double> dist(n * n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      dist[x * n + y] = std::max(a.dist(x / n2, y / n2), b.dist(x % n2, y % n2));
  std::vector<std::vector<std::size_t>> tables;
  for (std::size_t i = 0; i < a.generator_count(); ++i)
    for (std::size_t j = 0; j < b.generator_count(); ++j) {
      std::vector<std::size_t> t(n);
      for (std::size_t x = 0; x < n; ++x) t[x] = a.image(i, x / n2) * n2 + b.image(j, x % n2);
      tables.push_back(std::move(t));
    }
  return FiniteSystem(n, std::move(dist), std::move(tables));
}

// ---------------------------------------------------------------- skew product

SkewProductSystem::SkewProductSystem(SystemPtr fiber, std::size_t radius)
    : fiber_(std::move(fiber)), radius_(radius) {
  if (!fiber_) throw DataError("skew product over a null fiber");
}

void SkewProductSystem::apply(std::size_t, std::span<const double> x, std::span<double> out) const {
  const std::size_t w = 2 * radius_ + 1;
  for (std::size_t p = 0; p + 1 < w; ++p) out[p] = x[p + 1];
  out[w - 1] = 0.0;
  auto letter = static_cast<std::size_t>(x[radius_]);
  fiber_->apply(letter, x.subspan(w), out.subspan(w));
}

double SkewProductSystem::distance(std::span<const double> x, std::span<const double> y) const {
  const std::size_t w = 2 * radius_ + 1;
  return std::max(shift_window_distance(x.subspan(0, w), y.subspan(0, w)),
                  fiber_->distance(x.subspan(w), y.subspan(w)));
}

double SkewProductSystem::diameter() const { return std::max(1.0, fiber_->diameter()); }

bool SkewProductSystem::contains(std::span<const double> x) const {
  const std::size_t w = 2 * radius_ + 1;
  if (x.size() != dimension()) return false;
  for (std::size_t p = 0; p < w; ++p)
    if (!(x[p] >= 0 && x[p] < static_cast<double>(base_symbols()) && x[p] == std::floor(x[p])))
      return false;
  return fiber_->contains(x.subspan(w));
}

void SkewProductSystem::key_layout(double eps, std::vector<KeyComponent>& layout) const {
  if (shift_resolution(eps) >= 0) layout.push_back({KeyComponent::Kind::exact, 0});
  fiber_->key_layout(eps, layout);
}

void SkewProductSystem::cell_key(std::span<const double> x, double eps, std::int64_t* out) const {
  const std::size_t w = 2 * radius_ + 1;
  std::int64_t j = shift_resolution(eps);
  if (j >= 0) *out++ = window_hash(x.subspan(0, w), j);
  fiber_->cell_key(x.subspan(w), eps, out);
}

Point SkewProductSystem::make_point(std::span<const double> window, std::span<const double> x) const {
  if (window.size() != base_dimension() || x.size() != fiber_->dimension())
    throw DataError("skew point dimension mismatch");
  Point p(window.begin(), window.end());
  p.insert(p.end(), x.begin(), x.end());
  return p;
}

std::size_t skew_margin(double eps) {
  if (!(eps > 0)) throw DataError("epsilon must be positive");
  double c = std::ceil(std::log2(100.0 / eps));
  return static_cast<std::size_t>(std::max(0.0, c));
}

std::shared_ptr<const SkewProductSystem> build_skew_product(SystemPtr fiber, std::size_t n,
                                                            double eps) {
  if (!(eps > 0)) throw DataError("epsilon must be positive");
  if (n == 0) throw DataError("horizon must be positive");
  return std::make_shared<SkewProductSystem>(std::move(fiber), n + skew_margin(eps));
}

// ---------------------------------------------------------------- candidates

PointSet finite_candidates(std::size_t n) {
  PointSet s(1);
  for (std::size_t i = 0; i < n; ++i) {
    double x = static_cast<double>(i);
    s.push_back({&x, 1});
  }
  return s;
}

PointSet line_grid(LineKind kind, std::size_t m) {
  if (m == 0 || (kind == LineKind::interval && m < 2)) throw DataError("grid too small");
  std::vector<double> c(m);
  for (std::size_t j = 0; j < m; ++j)
    c[j] = kind == LineKind::circle ? static_cast<double>(j) / static_cast<double>(m)
                                    : static_cast<double>(j) / static_cast<double>(m - 1);
  return PointSet(1, std::move(c));
}

PointSet torus_grid(std::size_t d, std::size_t per_axis) {
  std::size_t total = 1;
  for (std::size_t c = 0; c < d; ++c) {
    if (total > 50'000'000 / std::max<std::size_t>(per_axis, 1))
      throw BudgetError("torus grid too large");
    total *= per_axis;
  }
  std::vector<double> coords(total * d);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (std::size_t c = d; c-- > 0;) {
      coords[i * d + c] = static_cast<double>(r % per_axis) / static_cast<double>(per_axis);
      r /= per_axis;
    }
  }
  return PointSet(d, std::move(coords));
}

PointSet cartesian_product(const PointSet& a, const PointSet& b) {
  const std::size_t d = a.dimension() + b.dimension();
  if (a.size() * b.size() > 50'000'000) throw BudgetError("product candidate set too large");
  PointSet out(d);
  std::vector<double> p(d);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::copy(a[i].begin(), a[i].end(), p.begin());
      std::copy(b[j].begin(), b[j].end(), p.begin() + static_cast<std::ptrdiff_t>(a.dimension()));
      out.push_back(p);
    }
  return out;
}

PointSet shift_block_candidates(const FullShiftSystem& s, std::int64_t lo, std::int64_t hi) {
  const auto r = static_cast<std::int64_t>(s.radius());
  const std::size_t w = s.dimension();
  PointSet out(w);
  std::vector<double> p(w, 0.0);
  if (lo > hi) {
    out.push_back(p);
    return out;
  }
  if (lo < -r || hi > r)
    throw DataError("window radius " + std::to_string(r) + " does not cover positions " +
                    std::to_string(lo) + ".." + std::to_string(hi));
  const auto len = static_cast<std::size_t>(hi - lo + 1);
  std::uint64_t count = word_count(s.symbols(), len);
  if (count > 10'000'000) throw BudgetError("too many shift blocks");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t v = i;
    for (std::size_t q = len; q-- > 0;) {
      p[static_cast<std::size_t>(lo + r) + q] = static_cast<double>(v % s.symbols());
      v /= s.symbols();
    }
    out.push_back(p);
  }
  return out;
}

double grid_spacing(const GeneratorSystem& s, std::size_t resolution) {
  if (auto* l = dynamic_cast<const IntervalSystem*>(&s))
    return l->line() == LineKind::circle ? 1.0 / static_cast<double>(resolution)
                                         : 1.0 / static_cast<double>(resolution - 1);
  if (dynamic_cast<const TorusSystem*>(&s)) return 1.0 / static_cast<double>(resolution);
  if (auto* p = dynamic_cast<const ProductSystem*>(&s))
    return std::max(grid_spacing(*p->first(), resolution), grid_spacing(*p->second(), resolution));
  if (auto* k = dynamic_cast<const SkewProductSystem*>(&s)) return grid_spacing(*k->fiber(), resolution);
  return 0.0;
}

PointSet default_candidates(const GeneratorSystem& s, std::size_t resolution, std::size_t n,
                            double eps) {
  if (auto* f = dynamic_cast<const FiniteSystem*>(&s)) return finite_candidates(f->point_count());
  if (auto* l = dynamic_cast<const IntervalSystem*>(&s)) return line_grid(l->line(), resolution);
  if (auto* t = dynamic_cast<const TorusSystem*>(&s)) return torus_grid(t->dimension(), resolution);
  if (auto* sh = dynamic_cast<const FullShiftSystem*>(&s)) {
    auto [lo, hi] = shift_relevant_range(*sh, n, eps);
    return shift_block_candidates(*sh, lo, hi);
  }
  if (auto* p = dynamic_cast<const ProductSystem*>(&s))
    return cartesian_product(default_candidates(*p->first(), resolution, n, eps),
                             default_candidates(*p->second(), resolution, n, eps));
  if (auto* k = dynamic_cast<const SkewProductSystem*>(&s)) {
    std::int64_t j = shift_resolution(eps);
    FullShiftSystem base(k->base_symbols(), k->radius(), {ShiftGenerator{{}, 1}});
    PointSet blocks = j < 0 ? shift_block_candidates(base, 1, 0)
                            : shift_block_candidates(base, -j, static_cast<std::int64_t>(n) - 1 + j);
    return cartesian_product(blocks, default_candidates(*k->fiber(), resolution, n, eps));
  }
  throw UnsupportedError("no default candidates for system kind " + s.kind());
}

}  // namespace fsdyn
