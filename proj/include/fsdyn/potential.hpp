#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsdyn/systems.hpp"

namespace fsdyn {

// A continuous observable on the state space, built as a small expression
// tree over point coordinates.
class Potential {
 public:
  Potential();  // the zero potential

  static Potential constant(double c);
  // scale * x[index]
  static Potential coordinate(std::size_t index, double scale = 1.0);
  // sum_k a_k cos(2 pi k x[index]) + b_k sin(2 pi k x[index]), k = 0, 1, ...
  static Potential trig(std::size_t index, std::vector<double> cos_coeffs,
                        std::vector<double> sin_coeffs);
  // values[x] on a finite system.
  static Potential table(std::vector<double> values);
  // values[omega_position] on a shift window (positions relative to the centre).
  static Potential symbol(std::int64_t position, std::vector<double> values);
  // values[omega_start ... omega_{start+length-1} read in base k] on a shift window.
  static Potential block(std::int64_t start, std::size_t length, std::size_t k,
                         std::vector<double> values);
  // sum_i decay^{|i|} omega_i over the whole window; depends on every coordinate.
  static Potential window_sum(double decay);
  // inner evaluated on the coordinate slice [offset, offset + length).
  static Potential lift(Potential inner, std::size_t offset, std::size_t length);

  friend Potential operator+(const Potential& a, const Potential& b);
  friend Potential operator*(double c, const Potential& a);
  Potential abs() const;

  double operator()(std::span<const double> x) const;

  // Constant potentials report their value.
  std::optional<double> constant_value() const;
  // Shift positions (relative to the window centre) the value depends on;
  // nullopt when the dependence is not on finitely many named positions.
  std::optional<std::vector<std::int64_t>> shift_dependencies() const;
  std::string describe() const;

  struct Node;

 private:
  explicit Potential(std::shared_ptr<const Node> n) : root_(std::move(n)) {}
  std::shared_ptr<const Node> root_;
};

// max |phi| over the given points.
double sup_norm(const Potential& phi, const PointSet& points);

// S_w phi(x) = sum of phi over the evaluation orbit (n terms).
double birkhoff_sum(const GeneratorSystem& s, const Potential& phi, const Word& w,
                    std::span<const double> x);

// (phi1 x phi2)(x1, x2) = phi1(x1) + phi2(x2) on a product system.
Potential product_potential(const ProductSystem& p, const Potential& phi1, const Potential& phi2);
// g(omega, x) = c + phi(x) on a skew product.
Potential skew_potential(const SkewProductSystem& s, const Potential& phi, double c);

}  // namespace fsdyn
