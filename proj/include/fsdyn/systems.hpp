#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsdyn/interval_map.hpp"
#include "fsdyn/words.hpp"

namespace fsdyn {

using Point = std::vector<double>;

// A flat list of points of equal dimension.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return dim_ ? coords_.size() / dim_ : 0; }
  bool empty() const { return size() == 0; }
  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  void push_back(std::span<const double> x);
  const std::vector<double>& coords() const { return coords_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

// Cell-key component used by the Bowen neighbour index.  Two points at
// distance < eps have keys that differ by at most one cell in every cyclic or
// linear component and agree in every exact component.
struct KeyComponent {
  enum class Kind { cyclic, linear, exact };
  Kind kind = Kind::exact;
  std::int64_t modulus = 0;  // cyclic only
};

// m continuous self-maps of a compact metric space.
class GeneratorSystem {
 public:
  virtual ~GeneratorSystem() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t generator_count() const = 0;
  // Coordinates per point.
  virtual std::size_t dimension() const = 0;
  virtual void apply(std::size_t i, std::span<const double> x, std::span<double> out) const = 0;
  virtual double distance(std::span<const double> x, std::span<const double> y) const = 0;
  virtual double diameter() const = 0;
  virtual bool contains(std::span<const double> x) const = 0;

  virtual void key_layout(double eps, std::vector<KeyComponent>& layout) const = 0;
  virtual void cell_key(std::span<const double> x, double eps, std::int64_t* out) const = 0;
};

using SystemPtr = std::shared_ptr<const GeneratorSystem>;

Point apply_generator(const GeneratorSystem& s, std::size_t i, std::span<const double> x);
Point apply_word(const GeneratorSystem& s, const Word& w, std::span<const double> x);
// [f_{w'}(x) for w' in evaluation_suffixes(w)]; the first entry is x.
std::vector<Point> evaluation_orbit(const GeneratorSystem& s, const Word& w,
                                    std::span<const double> x);
// Same orbit written into out[k * dim + c]; out must hold |w| * dim values.
void evaluation_orbit_into(const GeneratorSystem& s, const Word& w, std::span<const double> x,
                           double* out);
double bowen_distance(const GeneratorSystem& s, const Word& w, std::span<const double> x,
                      std::span<const double> y);

// ---------------------------------------------------------------- finite

class FiniteSystem final : public GeneratorSystem {
 public:
  // dist is N x N row-major; tables[i][x] = f_i(x).
  FiniteSystem(std::size_t n, std::vector<double> dist,
               std::vector<std::vector<std::size_t>> tables);
  static FiniteSystem discrete(std::size_t n, std::vector<std::vector<std::size_t>> tables);

  std::string kind() const override { return "finite"; }
  std::size_t generator_count() const override { return tables_.size(); }
  std::size_t dimension() const override { return 1; }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override;
  bool contains(std::span<const double> x) const override;
  void key_layout(double, std::vector<KeyComponent>&) const override {}
  void cell_key(std::span<const double>, double, std::int64_t*) const override {}

  std::size_t point_count() const { return n_; }
  std::size_t image(std::size_t i, std::size_t x) const { return tables_[i][x]; }
  double dist(std::size_t x, std::size_t y) const { return dist_[x * n_ + y]; }
  const std::vector<std::vector<std::size_t>>& tables() const { return tables_; }
  const std::vector<double>& distance_matrix() const { return dist_; }

 private:
  std::size_t n_;
  std::vector<double> dist_;
  std::vector<std::vector<std::size_t>> tables_;
};

// ---------------------------------------------------------------- circle / interval

class IntervalSystem final : public GeneratorSystem {
 public:
  IntervalSystem(LineKind kind, std::vector<IntervalMap> maps);

  std::string kind() const override { return line_ == LineKind::circle ? "circle" : "interval"; }
  std::size_t generator_count() const override { return maps_.size(); }
  std::size_t dimension() const override { return 1; }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override { return line_ == LineKind::circle ? 0.5 : 1.0; }
  bool contains(std::span<const double> x) const override;
  void key_layout(double eps, std::vector<KeyComponent>& layout) const override;
  void cell_key(std::span<const double> x, double eps, std::int64_t* out) const override;

  LineKind line() const { return line_; }
  const std::vector<IntervalMap>& maps() const { return maps_; }

 private:
  LineKind line_;
  std::vector<IntervalMap> maps_;
};

// Fraction of `bins` equal cells of the space hit by f_i applied to a fine
// grid, per generator.  Reported for interval systems, where surjectivity is
// assumed but not enforced.
std::vector<double> range_coverage(const IntervalSystem& s, std::size_t bins);

// ---------------------------------------------------------------- torus

// x -> A x + a mod 1 on [0,1)^d.
class TorusSystem final : public GeneratorSystem {
 public:
  // matrices[i] is d x d row-major; translations may be empty (all zero).
  TorusSystem(std::size_t d, std::vector<std::vector<std::int64_t>> matrices,
              std::vector<std::vector<double>> translations = {});

  std::string kind() const override { return "torus"; }
  std::size_t generator_count() const override { return matrices_.size(); }
  std::size_t dimension() const override { return d_; }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override { return 0.5; }
  bool contains(std::span<const double> x) const override;
  void key_layout(double eps, std::vector<KeyComponent>& layout) const override;
  void cell_key(std::span<const double> x, double eps, std::int64_t* out) const override;

  // x -> A_i x mod 1, ignoring the translation.
  void apply_linear(std::size_t i, std::span<const double> x, std::span<double> out) const;
  const std::vector<std::int64_t>& matrix(std::size_t i) const { return matrices_[i]; }
  const std::vector<double>& translation(std::size_t i) const { return translations_[i]; }

 private:
  std::size_t d_;
  std::vector<std::vector<std::int64_t>> matrices_;
  std::vector<std::vector<double>> translations_;
};

std::int64_t integer_determinant(const std::vector<std::int64_t>& a, std::size_t d);
// Distance from x to the nearest integer.
double circle_norm(double x);

// ---------------------------------------------------------------- full shift

// omega -> pi(sigma^s omega), i.e. (f omega)_i = pi(omega_{i+s}).
struct ShiftGenerator {
  std::vector<std::size_t> permutation;  // empty = identity
  std::int64_t shift = 1;
};

// Full shift on k symbols, points stored as windows omega_{-L..L}.
// Positions shifted in from outside the window read as symbol 0.
class FullShiftSystem final : public GeneratorSystem {
 public:
  FullShiftSystem(std::size_t k, std::size_t radius, std::vector<ShiftGenerator> gens);

  std::string kind() const override { return "full_shift"; }
  std::size_t generator_count() const override { return gens_.size(); }
  std::size_t dimension() const override { return 2 * radius_ + 1; }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override { return 1.0; }
  bool contains(std::span<const double> x) const override;
  void key_layout(double eps, std::vector<KeyComponent>& layout) const override;
  void cell_key(std::span<const double> x, double eps, std::int64_t* out) const override;

  std::size_t symbols() const { return k_; }
  std::size_t radius() const { return radius_; }
  const std::vector<ShiftGenerator>& generators() const { return gens_; }
  std::size_t symbol_at(std::span<const double> x, std::int64_t pos) const {
    return static_cast<std::size_t>(x[static_cast<std::size_t>(pos + static_cast<std::int64_t>(radius_))]);
  }

 private:
  std::size_t k_, radius_;
  std::vector<ShiftGenerator> gens_;
};

// Distance 2^{-j} where j = min |i| over disagreeing positions of two windows
// of the same radius (0 when equal).
double shift_window_distance(std::span<const double> a, std::span<const double> b);
// floor(log2(1/eps)): positions |i| <= J decide whether d < eps.  -1 if eps > 1.
std::int64_t shift_resolution(double eps);

// ---------------------------------------------------------------- product

// G1 x G2 with generator (i, j) at index i * k + j and the max metric.
class ProductSystem final : public GeneratorSystem {
 public:
  ProductSystem(SystemPtr first, SystemPtr second);

  std::string kind() const override { return "product"; }
  std::size_t generator_count() const override { return m1_ * m2_; }
  std::size_t dimension() const override { return d1_ + d2_; }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override;
  bool contains(std::span<const double> x) const override;
  void key_layout(double eps, std::vector<KeyComponent>& layout) const override;
  void cell_key(std::span<const double> x, double eps, std::int64_t* out) const override;

  const SystemPtr& first() const { return a_; }
  const SystemPtr& second() const { return b_; }
  // The word-pairing bijection between words over m*k letters and pairs of
  // words of equal length over m and k letters.
  std::pair<Word, Word> split_word(const Word& w) const;
  Word pair_words(const Word& u, const Word& v) const;

 private:
  SystemPtr a_, b_;
  std::size_t m1_, m2_, d1_, d2_;
};

SystemPtr build_product(SystemPtr g1, SystemPtr g2);
// Finite x finite as a FiniteSystem on N1*N2 points, point (x1, x2) at x1 * N2 + x2.
FiniteSystem flatten_finite_product(const FiniteSystem& a, const FiniteSystem& b);

// ---------------------------------------------------------------- skew product

// F(omega, x) = (sigma omega, f_{omega_0}(x)) on Sigma_m x X with the max
// metric.  Points are the base window omega_{-L..L} followed by the fiber point.
class SkewProductSystem final : public GeneratorSystem {
 public:
  SkewProductSystem(SystemPtr fiber, std::size_t radius);

  std::string kind() const override { return "skew_product"; }
  std::size_t generator_count() const override { return 1; }
  std::size_t dimension() const override { return 2 * radius_ + 1 + fiber_->dimension(); }
  void apply(std::size_t i, std::span<const double> x, std::span<double> out) const override;
  double distance(std::span<const double> x, std::span<const double> y) const override;
  double diameter() const override;
  bool contains(std::span<const double> x) const override;
  void key_layout(double eps, std::vector<KeyComponent>& layout) const override;
  void cell_key(std::span<const double> x, double eps, std::int64_t* out) const override;

  const SystemPtr& fiber() const { return fiber_; }
  std::size_t base_symbols() const { return fiber_->generator_count(); }
  std::size_t radius() const { return radius_; }
  std::size_t base_dimension() const { return 2 * radius_ + 1; }
  // Concatenate a base window (2L+1 symbols) and a fiber point.
  Point make_point(std::span<const double> window, std::span<const double> x) const;

 private:
  SystemPtr fiber_;
  std::size_t radius_;
};

// ceil(log2(100/eps)).
std::size_t skew_margin(double eps);
// Skew product with window radius n + C(eps).
std::shared_ptr<const SkewProductSystem> build_skew_product(SystemPtr fiber, std::size_t n,
                                                            double eps);

// ---------------------------------------------------------------- candidates

PointSet finite_candidates(std::size_t n);
// Circle: j/M; interval: j/(M-1).
PointSet line_grid(LineKind kind, std::size_t m);
PointSet torus_grid(std::size_t d, std::size_t per_axis);
PointSet cartesian_product(const PointSet& a, const PointSet& b);
// Every assignment of symbols to window positions lo..hi (others 0).
PointSet shift_block_candidates(const FullShiftSystem& s, std::int64_t lo, std::int64_t hi);
// Window positions that can influence d_w at threshold eps for some word of
// length n: [-J + n_min_shift, (n-1) * max_shift + J].
std::pair<std::int64_t, std::int64_t> shift_relevant_range(const FullShiftSystem& s,
                                                           std::size_t n, double eps);

// Grid spacing of the default candidate set (the largest gap between a space
// point and its nearest candidate is at most this).
double grid_spacing(const GeneratorSystem& s, std::size_t resolution);

// Default candidates for a system: finite points, uniform grids with
// `resolution` points per axis, and for shifts all blocks on the range that
// matters for horizon n at eps.
PointSet default_candidates(const GeneratorSystem& s, std::size_t resolution, std::size_t n,
                            double eps);

}  // namespace fsdyn
