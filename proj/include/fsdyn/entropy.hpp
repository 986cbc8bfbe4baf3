#pragma once

#include <string>
#include <vector>

#include "fsdyn/measure.hpp"
#include "fsdyn/partition.hpp"
#include "fsdyn/words.hpp"

namespace fsdyn {

// Masses of the cells of xi, indexed by label.
std::vector<double> cell_masses(const GeneratorSystem& s, const Measure& mu, const Partition& xi);

// -sum mu(A) log mu(A), natural log, 0 log 0 = 0.  Throws DataError on a
// negative cell mass.
double partition_entropy(const GeneratorSystem& s, const Measure& mu, const Partition& xi);
double entropy_of_masses(const std::vector<double>& masses);
// H(xi | eta)
double conditional_entropy(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                           const Partition& eta);
// H(xi | eta) + H(eta | xi)
double rho_distance(const GeneratorSystem& s, const Measure& mu, const Partition& xi, const Partition& eta);

// The join of f_{w'}^{-1} xi over the evaluation suffixes w' of w.  Needs
// preimages: finite systems, piecewise-linear circle/interval maps, full
// shifts, and products of these.
Partition refine_under_word(const GeneratorSystem& s, const Partition& xi, const Word& w);

struct EntropyParams {
  std::vector<std::size_t> horizons;  // strictly increasing
  WordStrategy strategy;
  std::size_t threads = 1;
  double invariance_tolerance = 1e-6;
  double prune_threshold = 1e-14;  // cells lighter than this are dropped ...
  double ledger_limit = 1e-10;     // ... as long as the dropped mass stays below this
  std::vector<TestSet> test_sets;  // empty: invariance_test_sets(s, mu, xi)
  std::size_t defect_samples = 1'000'000;
  std::uint64_t defect_seed = 0;
};

struct EntropyRow {
  std::size_t n = 0;
  double a_n = 0;        // word average of H_mu(join over suffixes of f_{w'}^{-1} xi)
  double rate = 0;       // a_n / n
  double increment = 0;  // a_n - a_{n-1}
  double stderr_ = 0;    // standard error of a_n (montecarlo only)
  std::size_t words = 0;
};

struct EntropyReport {
  std::vector<EntropyRow> rows;
  std::string partition_id;
  std::string method;
  double estimate = 0;   // min over computed n of the increment a_n - a_{n-1}
  double min_rate = 0;   // min over computed n of a_n / n
  double entropy_of_partition = 0;  // H_mu(xi)
  double defect = 0;
  bool defect_approximate = false;
  bool exact_arithmetic = true;  // rational interval endpoints throughout
  double pruned_mass = 0;        // largest mass dropped from any join
  std::vector<std::string> diagnostics;
};

// Throws NonInvariantError when the invariance defect exceeds the tolerance.
EntropyReport entropy_rate(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                           const EntropyParams& params);

struct MeasureEntropyRow {
  std::string partition_id;
  double estimate = 0;
  double running_max = 0;
};
struct MeasureEntropyReport {
  std::vector<MeasureEntropyRow> rows;
  std::vector<EntropyReport> reports;
  double value = 0;  // lower estimate of h_mu: running max over the sequence
};
MeasureEntropyReport measure_entropy(const GeneratorSystem& s, const Measure& mu,
                                     const std::vector<Partition>& sequence, const EntropyParams& params);

// Test sets used for the invariance check: the cells of xi plus a few
// standard sets for the measure type.
std::vector<TestSet> invariance_test_sets(const GeneratorSystem& s, const Measure& mu, const Partition& xi);

}  // namespace fsdyn
