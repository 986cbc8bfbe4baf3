#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fsdyn/rational.hpp"
#include "fsdyn/systems.hpp"

namespace fsdyn {

// Cells are identified by labels 0..K-1, numbered in order of first appearance.

// One label per point of a finite system.
struct LabelPartition {
  std::vector<std::size_t> labels;
};

// Pieces [breaks[j], breaks[j+1]) of [0, 1), breaks[0] = 0 and breaks.back() = 1.
// Several pieces may share a label.  exact_breaks is set when every break is rational.
struct IntervalPartition {
  std::vector<double> breaks;
  std::vector<std::size_t> labels;
  std::optional<std::vector<Rational>> exact_breaks;
};

// Cells given by the symbols at a few shift positions; labels has one entry
// per assignment, read in base `symbols` with the first position most significant.
struct CylinderPartition {
  std::vector<std::int64_t> positions;  // strictly increasing
  std::size_t symbols = 2;
  std::vector<std::size_t> labels;
};

struct Partition;
// xi1 x xi2 on a product system; label = l1 * cells(xi2) + l2.
struct ProductPartition {
  std::shared_ptr<const Partition> first, second;
};

struct Partition {
  std::string id;
  std::variant<LabelPartition, IntervalPartition, CylinderPartition, ProductPartition> v;

  std::size_t cell_count() const;
};

Partition label_partition(std::vector<std::size_t> labels, std::string id = "labels");
Partition singleton_partition(std::size_t n);
Partition interval_partition(const std::vector<Rational>& breaks, std::vector<std::size_t> labels = {},
                             std::string id = "intervals");
Partition interval_partition(const std::vector<double>& breaks, std::vector<std::size_t> labels = {},
                             std::string id = "intervals");
// 2^level equal pieces.
Partition dyadic_partition(std::size_t level);
// One cell per assignment of the given positions.
Partition cylinder_partition(std::vector<std::int64_t> positions, std::size_t symbols);
Partition product_partition(const Partition& a, const Partition& b);
// The one-cell partition suited to the system.
Partition trivial_partition(const GeneratorSystem& s);

// Throws DataError unless the partition is well formed and fits the system.
void validate_partition(const GeneratorSystem& s, const Partition& xi);

// Label of the cell containing x.
std::size_t partition_label(const GeneratorSystem& s, const Partition& xi, std::span<const double> x);

// Common refinement.  pairs[c] gives the (a, b) labels of joint cell c.
struct JoinResult {
  Partition partition;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};
JoinResult join_partitions(const Partition& a, const Partition& b);
inline Partition join(const Partition& a, const Partition& b) { return join_partitions(a, b).partition; }

// Renumber labels in order of first appearance.
std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels, std::size_t* count = nullptr);

}  // namespace fsdyn
