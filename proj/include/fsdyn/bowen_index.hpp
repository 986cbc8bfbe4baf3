#pragma once

#include <cstdint>
#include <vector>

#include "fsdyn/systems.hpp"

namespace fsdyn {

// Neighbour index for the Bowen metric d_w at threshold eps.  Each point is
// filed under the cell keys of its n orbit points, one trie level per orbit
// point.  A query walks only the neighbouring cells at every level, so it
// returns a superset of the points within d_w-distance eps (hash collisions
// can only add candidates).  Callers confirm with the exact distance.
class BowenIndex {
 public:
  BowenIndex(const GeneratorSystem& s, double eps, std::size_t levels);

  std::size_t key_width() const { return layout_.size(); }
  // keys[level * key_width() + c] for an orbit stored as orbit[level * dim + c].
  void compute_keys(const double* orbit, std::int64_t* keys) const;

  void insert(std::uint32_t id, const std::int64_t* keys);

  // Calls visit(id) for every stored id whose keys neighbour the query at
  // every level, until visit returns true.  Returns whether it stopped early.
  template <class Visit>
  bool find(const std::int64_t* keys, Visit&& visit) const {
    stack_.clear();
    stack_.push_back({0, 0});
    std::fill(cache_valid_.begin(), cache_valid_.end(), 0);
    while (!stack_.empty()) {
      auto [node, level] = stack_.back();
      stack_.pop_back();
      if (level == levels_) {
        for (std::uint32_t id : leaves_[leaf_of_[node]])
          if (visit(id)) return true;
        continue;
      }
      if (!cache_valid_[level]) {
        neighbour_hashes(keys + level * layout_.size(), cache_[level]);
        cache_valid_[level] = 1;
      }
      for (std::uint64_t h : cache_[level]) {
        std::uint32_t child = lookup(node, h);
        if (child != kNone) stack_.push_back({child, level + 1});
      }
    }
    return false;
  }

  std::size_t size() const { return count_; }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;
  struct Slot {
    std::uint64_t key;
    std::uint32_t value;
  };

  std::uint64_t level_hash(const std::int64_t* v) const;
  void neighbour_hashes(const std::int64_t* v, std::vector<std::uint64_t>& out) const;
  std::uint32_t lookup(std::uint32_t node, std::uint64_t h) const;
  std::uint32_t child_or_create(std::uint32_t node, std::uint64_t h, std::size_t level);
  void grow();

  const GeneratorSystem& sys_;
  double eps_;
  std::size_t levels_, dim_;
  std::vector<KeyComponent> layout_;
  std::vector<Slot> table_;
  std::size_t used_ = 0;
  std::uint32_t nodes_ = 1;  // node 0 is the root
  std::vector<std::uint32_t> leaf_of_;  // node -> leaf slot (only for last-level nodes)
  std::vector<std::vector<std::uint32_t>> leaves_;
  std::size_t count_ = 0;

  struct Frame {
    std::uint32_t node;
    std::size_t level;
  };
  mutable std::vector<Frame> stack_;
  mutable std::vector<std::vector<std::uint64_t>> cache_;
  mutable std::vector<char> cache_valid_;
  mutable std::vector<std::int64_t> scratch_;
  mutable std::vector<std::vector<std::int64_t>> opts_;
  mutable std::vector<std::size_t> odo_;
};

}  // namespace fsdyn
