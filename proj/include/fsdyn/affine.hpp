#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsdyn/systems.hpp"
#include "fsdyn/words.hpp"

namespace fsdyn {

// Haar measure of D_w(e, eps) = {x : d(A_{w'} x, 0) < eps for every
// evaluation suffix w'} on the torus.  Translations never enter.
struct BallQuery {
  Word word;
  double eps = 0.1;
  std::size_t sample_count = 1000;      // first pass, at least 10^3
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;             // separates the draws of different queries
  std::size_t max_samples = 10'000'000;
  std::size_t target_hits = 100;        // keep doubling until this many hits
};

struct BallMeasure {
  double estimate = 0;
  double ci_low = 0, ci_high = 0;  // 95%, normal approximation
  std::size_t samples = 0, hits = 0;
  bool zero_hits = false;          // estimate is 0 and only ci_high is meaningful
  bool underresolved = false;      // fewer than target_hits at max_samples
  // Samples were drawn through the inverse of the suffix matrices (the ball
  // is then the linear polytope around 0); otherwise uniformly from the eps-box.
  bool linear = false;
};

BallMeasure ball_measure(const TorusSystem& s, const BallQuery& q, std::size_t threads = 1);

struct AffineParams {
  std::vector<double> eps;            // strictly decreasing
  std::vector<std::size_t> horizons;  // strictly increasing
  WordStrategy strategy;
  std::size_t sample_count = 1'000'000;
  std::size_t max_samples = 10'000'000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct AffineBall {
  std::size_t n = 0;
  double eps = 0;
  std::string word_id;  // the word, or "sample:<i>" under montecarlo
  BallMeasure ball;
};

struct AffineRow {
  std::size_t n = 0;
  double eps = 0;
  double lower = 0;  // (1/n) avg_w log(1 / mu(D_w))
  double upper = 0;  // (1/n) log avg_w (1 / mu(D_w))
  std::size_t words = 0;
  std::size_t underresolved = 0;  // words whose ball had too few hits
};

struct AffineReport {
  std::vector<AffineRow> rows;   // eps-major, then n
  std::vector<AffineBall> balls; // same order, words in strategy order
  // Slope (n2 b_{n2} - n1 b_{n1}) / (n2 - n1) over the two largest horizons
  // at the smallest eps; the raw row value when only one horizon is given.
  double lower_estimate = 0, upper_estimate = 0;
  double raw_lower = 0, raw_upper = 0;  // row at the largest n and smallest eps
  bool underresolved = false;
  std::vector<std::string> diagnostics;
};

AffineReport entropy_bounds(const TorusSystem& s, const AffineParams& p);

}  // namespace fsdyn
