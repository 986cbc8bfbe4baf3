#include "fsdyn/bowen_index.hpp"

#include <algorithm>

#include "fsdyn/rng.hpp"

namespace fsdyn {

BowenIndex::BowenIndex(const GeneratorSystem& s, double eps, std::size_t levels)
    : sys_(s), eps_(eps), levels_(levels), dim_(s.dimension()) {
  s.key_layout(eps, layout_);
  table_.assign(1024, Slot{0, kNone});
  leaf_of_.assign(1, kNone);
  cache_.resize(levels_);
  cache_valid_.assign(levels_, 0);
  opts_.resize(layout_.size());
  odo_.resize(layout_.size());
  if (levels_ == 0) {
    leaf_of_[0] = 0;
    leaves_.emplace_back();
  }
}

void BowenIndex::compute_keys(const double* orbit, std::int64_t* keys) const {
  const std::size_t w = layout_.size();
  if (w == 0) return;
  for (std::size_t k = 0; k < levels_; ++k) sys_.cell_key({orbit + k * dim_, dim_}, eps_, keys + k * w);
}

std::uint64_t BowenIndex::level_hash(const std::int64_t* v) const {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (std::size_t c = 0; c < layout_.size(); ++c) h = mix64(h ^ static_cast<std::uint64_t>(v[c]));
  return h;
}

void BowenIndex::neighbour_hashes(const std::int64_t* v, std::vector<std::uint64_t>& out) const {
  out.clear();
  const std::size_t w = layout_.size();
  scratch_.assign(v, v + w);
  // Enumerate the product of per-component neighbour offsets.
  auto& o = opts_;
  for (std::size_t c = 0; c < w; ++c) {
    auto& list = o[c];
    list.clear();
    const auto& kc = layout_[c];
    switch (kc.kind) {
      case KeyComponent::Kind::exact:
        list.push_back(v[c]);
        break;
      case KeyComponent::Kind::linear:
        list.push_back(v[c] - 1);
        list.push_back(v[c]);
        list.push_back(v[c] + 1);
        break;
      case KeyComponent::Kind::cyclic: {
        const std::int64_t k = kc.modulus;
        for (std::int64_t d = -1; d <= 1; ++d) {
          std::int64_t u = ((v[c] + d) % k + k) % k;
          if (std::find(list.begin(), list.end(), u) == list.end()) list.push_back(u);
        }
        break;
      }
    }
  }
  auto& idx = odo_;
  std::fill(idx.begin(), idx.end(), 0);
  while (true) {
    for (std::size_t c = 0; c < w; ++c) scratch_[c] = o[c][idx[c]];
    out.push_back(level_hash(scratch_.data()));
    std::size_t c = 0;
    while (c < w && ++idx[c] == o[c].size()) idx[c++] = 0;
    if (c == w) break;
  }
}

std::uint32_t BowenIndex::lookup(std::uint32_t node, std::uint64_t h) const {
  const std::uint64_t key = mix64(h ^ (static_cast<std::uint64_t>(node) * 0x9e3779b97f4a7c15ULL));
  const std::size_t mask = table_.size() - 1;
  for (std::size_t p = key & mask;; p = (p + 1) & mask) {
    if (table_[p].value == kNone) return kNone;
    if (table_[p].key == key) return table_[p].value;
  }
}

void BowenIndex::grow() {
  std::vector<Slot> old;
  old.swap(table_);
  table_.assign(old.size() * 2, Slot{0, kNone});
  const std::size_t mask = table_.size() - 1;
  for (const auto& s : old) {
    if (s.value == kNone) continue;
    std::size_t p = s.key & mask;
    while (table_[p].value != kNone) p = (p + 1) & mask;
    table_[p] = s;
  }
}

std::uint32_t BowenIndex::child_or_create(std::uint32_t node, std::uint64_t h, std::size_t level) {
  const std::uint64_t key = mix64(h ^ (static_cast<std::uint64_t>(node) * 0x9e3779b97f4a7c15ULL));
  if (2 * (used_ + 1) > table_.size()) grow();
  const std::size_t mask = table_.size() - 1;
  std::size_t p = key & mask;
  for (;; p = (p + 1) & mask) {
    if (table_[p].value == kNone) break;
    if (table_[p].key == key) return table_[p].value;
  }
  const std::uint32_t child = nodes_++;
  table_[p] = Slot{key, child};
  ++used_;
  leaf_of_.push_back(kNone);
  if (level + 1 == levels_) {
    leaf_of_[child] = static_cast<std::uint32_t>(leaves_.size());
    leaves_.emplace_back();
  }
  return child;
}

void BowenIndex::insert(std::uint32_t id, const std::int64_t* keys) {
  std::uint32_t node = 0;
  const std::size_t w = layout_.size();
  for (std::size_t k = 0; k < levels_; ++k) node = child_or_create(node, level_hash(keys + k * w), k);
  leaves_[leaf_of_[node]].push_back(id);
  ++count_;
}

}  // namespace fsdyn
