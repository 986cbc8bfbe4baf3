#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsdyn/potential.hpp"
#include "fsdyn/systems.hpp"
#include "fsdyn/words.hpp"

namespace fsdyn {

enum class SearchMode { exact, greedy };
enum class Quantity { spanning, separated };

struct SearchOptions {
  // Exact mode brute-forces every connected component of the conflict graph
  // {d_w < eps}; components larger than this are rejected.
  std::size_t exact_limit = 20;
};

struct SetResult {
  double weight = 0;                // sum of e^{S_w phi} over the witness
  std::vector<std::size_t> witness;  // candidate indices, ascending
};

// Maximum-weight (w, eps)-separated subset (pairwise d_w >= eps) of the candidates.
SetResult max_separated(const GeneratorSystem& s, const Potential& phi, const Word& w, double eps,
                        const PointSet& candidates, SearchMode mode, const SearchOptions& opt = {});

// Minimum-weight subset of the candidates whose open d_w-balls of radius eps
// cover the universe (the candidates themselves when universe is null).
// Throws InfeasibleError when some universe point is not covered.
SetResult min_spanning(const GeneratorSystem& s, const Potential& phi, const Word& w, double eps,
                       const PointSet& candidates, SearchMode mode, const SearchOptions& opt = {},
                       const PointSet* universe = nullptr);

// Whether every candidate lies within d_w-distance < eps of the witness.
bool spans(const GeneratorSystem& s, const Word& w, double eps, const PointSet& candidates,
           const std::vector<std::size_t>& witness);

struct WordAverage {
  double value = 0;      // (1/#words) sum of per-word values
  double stderr_ = 0;    // standard error (montecarlo only)
  std::size_t words = 0;
  std::vector<double> per_word;
};

// Q_n (spanning) or P_n (separated) averaged over words of length n.
WordAverage average_over_words(const GeneratorSystem& s, const Potential& phi, std::size_t n,
                               double eps, const WordStrategy& strategy, Quantity q,
                               const PointSet& candidates, SearchMode mode, std::size_t threads = 1,
                               const SearchOptions& opt = {});

// ---------------------------------------------------------------- skew products

// Sum of per-block optima of the skew product F = (sigma, f_{omega_0}).  Blocks
// are the symbol assignments on positions [-J, n-1+J], J = floor(log2(1/eps)):
// points in different blocks are always (n, eps)-separated, so P_n(F) and
// Q_n(F) split over blocks.  Blocks are enumerated when strategy is exhaustive
// and m^{n+2J} is within its budget, otherwise strategy.sample_count blocks are
// sampled (nested across horizons) and the mean is scaled by m^{n+2J}.
struct BlockTotal {
  double log_value = 0;  // log of the total over all blocks
  double stderr_log = 0;  // standard error of log_value (sampled blocks only)
  std::size_t blocks = 0;
  bool sampled = false;
  std::vector<double> per_block;  // optimum per visited block
};
BlockTotal skew_block_total(const SkewProductSystem& F, const Potential& g, std::size_t n, double eps,
                            const WordStrategy& strategy, Quantity q, const PointSet& fiber_candidates,
                            SearchMode mode, std::size_t threads = 1, const SearchOptions& opt = {});

// ---------------------------------------------------------------- estimation

struct EstimatorParams {
  std::vector<double> epsilons;       // strictly decreasing
  std::vector<std::size_t> horizons;  // strictly increasing
  WordStrategy strategy;
  std::size_t resolution = 0;        // grid points per axis for continuous spaces
  std::optional<PointSet> candidates;  // explicit candidates override the grid
  SearchMode mode = SearchMode::greedy;
  bool spanning = true, separated = true;
  std::size_t threads = 1;
  SearchOptions search;
};

// Throws DataError describing the first violated invariant.
void validate_params(const GeneratorSystem& s, const EstimatorParams& p);

struct PressureRow {
  std::size_t n = 0;
  double eps = 0;
  double log_q = 0, log_p = 0;         // log Q_n, log P_n (NaN when not computed)
  double stderr_q = 0, stderr_p = 0;   // standard errors of Q_n, P_n (relative for skew blocks)
  std::size_t words = 0;
};

struct PressureReport {
  std::vector<PressureRow> rows;
  std::string method;      // how the headline estimate was extracted
  double estimate = 0;     // headline: slope of log P_n over the two largest n at the smallest eps
  double estimate_spanning = 0;  // same slope for log Q_n
  double rate_at_nmax = 0;       // (1/n_max) log P_{n_max} at the smallest eps
  double limsup_proxy = 0;       // max over the upper half of horizons of (1/n) log P_n
  double liminf_proxy = 0;       // min over the same tail
  double grid_spacing = 0;
  bool eps_monotone = true;      // P_n and Q_n nonincreasing in eps at fixed n
  bool sandwich = true;          // Q_n <= P_n row-wise
  std::vector<std::string> diagnostics;
};

PressureReport pressure_estimate(const GeneratorSystem& s, const Potential& phi,
                                 const EstimatorParams& params);

// Slope (y2 - y1) / (n2 - n1) over the two largest horizons.
double two_horizon_slope(const std::vector<std::size_t>& n, const std::vector<double>& y);

// ---------------------------------------------------------------- cylinder covers

enum class CoverBound { q, p };

// q_w / p_w for the cover of a full shift by 1-cylinders at position 0: the
// join over evaluation suffixes consists of cylinders, and inf/sup of
// e^{S_w phi} over each is found by enumerating the finitely many positions
// phi reads.  Throws UnsupportedError when phi depends on unboundedly many
// coordinates.
double cylinder_pressure(const FullShiftSystem& s, const Potential& phi, const Word& w, CoverBound b);
WordAverage cylinder_pressure_average(const FullShiftSystem& s, const Potential& phi, std::size_t n,
                                      const WordStrategy& strategy, CoverBound b,
                                      std::size_t threads = 1);

}  // namespace fsdyn
