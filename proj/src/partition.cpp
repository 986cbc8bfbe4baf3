#include "fsdyn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "fsdyn/error.hpp"

namespace fsdyn {

std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels, std::size_t* count) {
  std::unordered_map<std::size_t, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = ids.try_emplace(labels[i], ids.size());
    out[i] = it->second;
  }
  if (count) *count = ids.size();
  return out;
}

std::size_t Partition::cell_count() const {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ProductPartition>) {
          return p.first->cell_count() * p.second->cell_count();
        } else {
          std::size_t k = 0;
          for (std::size_t l : p.labels) k = std::max(k, l + 1);
          return k;
        }
      },
      v);
}

Partition label_partition(std::vector<std::size_t> labels, std::string id) {
  if (labels.empty()) throw DataError("label partition needs at least one point");
  return Partition{std::move(id), LabelPartition{canonical_labels(labels)}};
}

Partition singleton_partition(std::size_t n) {
  std::vector<std::size_t> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = i;
  return label_partition(std::move(l), "singletons");
}

namespace {

template <class T>
void check_breaks(const std::vector<T>& b) {
  if (b.size() < 2 || !(b.front() == T(0)) || !(b.back() == T(1)))
    throw DataError("interval partition breaks must run from 0 to 1");
  for (std::size_t i = 1; i < b.size(); ++i)
    if (!(b[i - 1] < b[i])) throw DataError("interval partition breaks must be strictly increasing");
}

std::vector<std::size_t> piece_labels(std::vector<std::size_t> labels, std::size_t pieces) {
  if (labels.empty()) {
    labels.resize(pieces);
    for (std::size_t i = 0; i < pieces; ++i) labels[i] = i;
  }
  if (labels.size() != pieces) throw DataError("interval partition needs one label per piece");
  return canonical_labels(labels);
}

}  // namespace

Partition interval_partition(const std::vector<Rational>& breaks, std::vector<std::size_t> labels,
                             std::string id) {
  check_breaks(breaks);
  IntervalPartition p;
  for (const auto& r : breaks) p.breaks.push_back(r.to_double());
  p.exact_breaks = breaks;
  p.labels = piece_labels(std::move(labels), breaks.size() - 1);
  return Partition{std::move(id), std::move(p)};
}

Partition interval_partition(const std::vector<double>& breaks, std::vector<std::size_t> labels,
                             std::string id) {
  check_breaks(breaks);
  std::vector<Rational> exact;
  bool ok = true;
  for (double x : breaks) {
    auto r = Rational::from_double(x);
    if (!r) {
      ok = false;
      break;
    }
    exact.push_back(*r);
  }
  if (ok) return interval_partition(exact, std::move(labels), std::move(id));
  IntervalPartition p;
  p.breaks = breaks;
  p.labels = piece_labels(std::move(labels), breaks.size() - 1);
  return Partition{std::move(id), std::move(p)};
}

Partition dyadic_partition(std::size_t level) {
  if (level > 30) throw DataError("dyadic level above 30");
  const std::int64_t n = std::int64_t{1} << level;
  std::vector<Rational> b;
  for (std::int64_t j = 0; j <= n; ++j) b.emplace_back(j, n);
  return interval_partition(b, {}, "dyadic" + std::to_string(level));
}

Partition cylinder_partition(std::vector<std::int64_t> positions, std::size_t symbols) {
  if (symbols < 1) throw DataError("cylinder partition needs at least one symbol");
  std::sort(positions.begin(), positions.end());
  if (std::adjacent_find(positions.begin(), positions.end()) != positions.end())
    throw DataError("cylinder positions must be distinct");
  std::size_t count = 1;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    count *= symbols;
    if (count > (std::size_t{1} << 22)) throw BudgetError("cylinder partition too large");
  }
  std::vector<std::size_t> l(count);
  for (std::size_t i = 0; i < count; ++i) l[i] = i;
  std::string id = "cylinders";
  for (auto p : positions) id += "_" + std::to_string(p);
  return Partition{id, CylinderPartition{std::move(positions), symbols, std::move(l)}};
}

Partition product_partition(const Partition& a, const Partition& b) {
  return Partition{a.id + "x" + b.id,
                   ProductPartition{std::make_shared<const Partition>(a), std::make_shared<const Partition>(b)}};
}

Partition trivial_partition(const GeneratorSystem& s) {
  if (auto* f = dynamic_cast<const FiniteSystem*>(&s))
    return label_partition(std::vector<std::size_t>(f->point_count(), 0), "trivial");
  if (dynamic_cast<const IntervalSystem*>(&s)) {
    auto p = interval_partition(std::vector<Rational>{Rational(0), Rational(1)});
    p.id = "trivial";
    return p;
  }
  if (auto* sh = dynamic_cast<const FullShiftSystem*>(&s)) {
    auto p = cylinder_partition({}, sh->symbols());
    p.id = "trivial";
    return p;
  }
  if (auto* pr = dynamic_cast<const ProductSystem*>(&s)) {
    auto p = product_partition(trivial_partition(*pr->first()), trivial_partition(*pr->second()));
    p.id = "trivial";
    return p;
  }
  throw UnsupportedError("no partitions are available on a " + s.kind() + " system");
}

void validate_partition(const GeneratorSystem& s, const Partition& xi) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LabelPartition>) {
          auto* f = dynamic_cast<const FiniteSystem*>(&s);
          if (!f) throw DataError("label partitions need a finite system");
          if (p.labels.size() != f->point_count()) throw DataError("label partition needs one label per point");
        } else if constexpr (std::is_same_v<P, IntervalPartition>) {
          if (!dynamic_cast<const IntervalSystem*>(&s)) throw DataError("interval partitions need a circle or interval system");
          check_breaks(p.breaks);
          if (p.labels.size() + 1 != p.breaks.size()) throw DataError("interval partition needs one label per piece");
        } else if constexpr (std::is_same_v<P, CylinderPartition>) {
          auto* sh = dynamic_cast<const FullShiftSystem*>(&s);
          if (!sh) throw DataError("cylinder partitions need a full shift");
          if (p.symbols != sh->symbols()) throw DataError("cylinder partition alphabet does not match the shift");
          std::size_t count = 1;
          for (std::size_t i = 0; i < p.positions.size(); ++i) count *= p.symbols;
          if (p.labels.size() != count) throw DataError("cylinder partition needs one label per assignment");
        } else {
          auto* pr = dynamic_cast<const ProductSystem*>(&s);
          if (!pr) throw DataError("product partitions need a product system");
          validate_partition(*pr->first(), *p.first);
          validate_partition(*pr->second(), *p.second);
        }
      },
      xi.v);
}

std::size_t partition_label(const GeneratorSystem& s, const Partition& xi, std::span<const double> x) {
  return std::visit(
      [&](const auto& p) -> std::size_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LabelPartition>) {
          return p.labels.at(static_cast<std::size_t>(x[0]));
        } else if constexpr (std::is_same_v<P, IntervalPartition>) {
          double y = x[0];
          auto* l = dynamic_cast<const IntervalSystem*>(&s);
          if (l && l->line() == LineKind::circle) y -= std::floor(y);
          auto it = std::upper_bound(p.breaks.begin(), p.breaks.end(), y);
          std::size_t j = it == p.breaks.begin() ? 0 : static_cast<std::size_t>(it - p.breaks.begin()) - 1;
          return p.labels[std::min(j, p.labels.size() - 1)];
        } else if constexpr (std::is_same_v<P, CylinderPartition>) {
          auto& sh = dynamic_cast<const FullShiftSystem&>(s);
          std::size_t code = 0;
          for (auto pos : p.positions) {
            if (static_cast<std::size_t>(std::llabs(pos)) > sh.radius())
              throw DataError("cylinder position outside the shift window");
            code = code * p.symbols + sh.symbol_at(x, pos);
          }
          return p.labels[code];
        } else {
          auto& pr = dynamic_cast<const ProductSystem&>(s);
          const std::size_t d1 = pr.first()->dimension();
          const std::size_t l1 = partition_label(*pr.first(), *p.first, x.subspan(0, d1));
          const std::size_t l2 = partition_label(*pr.second(), *p.second, x.subspan(d1));
          return l1 * p.second->cell_count() + l2;
        }
      },
      xi.v);
}

namespace {

struct PairIds {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> ids;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t operator()(std::size_t a, std::size_t b) {
    auto [it, fresh] = ids.try_emplace({a, b}, pairs.size());
    if (fresh) pairs.push_back({a, b});
    return it->second;
  }
};

template <class T>
void overlay(const std::vector<T>& ba, const std::vector<std::size_t>& la, const std::vector<T>& bb,
             const std::vector<std::size_t>& lb, std::vector<T>& out_b, std::vector<std::size_t>& out_l,
             PairIds& ids) {
  std::size_t i = 0, j = 0;
  out_b.push_back(T(0));
  while (i < la.size() && j < lb.size()) {
    out_l.push_back(ids(la[i], lb[j]));
    const T& ea = ba[i + 1];
    const T& eb = bb[j + 1];
    if (ea < eb) {
      out_b.push_back(ea);
      ++i;
    } else if (eb < ea) {
      out_b.push_back(eb);
      ++j;
    } else {
      out_b.push_back(ea);
      ++i;
      ++j;
    }
  }
  out_b.back() = T(1);
}

}  // namespace

JoinResult join_partitions(const Partition& a, const Partition& b) {
  if (a.v.index() != b.v.index()) throw DataError("cannot join partitions of different kinds");
  JoinResult res;
  PairIds ids;
  res.partition.id = a.id + "v" + b.id;
  if (auto* pa = std::get_if<LabelPartition>(&a.v)) {
    const auto& pb = std::get<LabelPartition>(b.v);
    if (pa->labels.size() != pb.labels.size()) throw DataError("label partitions of different sizes");
    LabelPartition out;
    for (std::size_t i = 0; i < pa->labels.size(); ++i) out.labels.push_back(ids(pa->labels[i], pb.labels[i]));
    res.partition.v = std::move(out);
  } else if (auto* pa = std::get_if<IntervalPartition>(&a.v)) {
    const auto& pb = std::get<IntervalPartition>(b.v);
    IntervalPartition out;
    if (pa->exact_breaks && pb.exact_breaks) {
      std::vector<Rational> eb;
      overlay(*pa->exact_breaks, pa->labels, *pb.exact_breaks, pb.labels, eb, out.labels, ids);
      for (const auto& r : eb) out.breaks.push_back(r.to_double());
      out.exact_breaks = std::move(eb);
    } else {
      overlay(pa->breaks, pa->labels, pb.breaks, pb.labels, out.breaks, out.labels, ids);
    }
    res.partition.v = std::move(out);
  } else if (auto* pa = std::get_if<CylinderPartition>(&a.v)) {
    const auto& pb = std::get<CylinderPartition>(b.v);
    if (pa->symbols != pb.symbols) throw DataError("cylinder partitions over different alphabets");
    std::vector<std::int64_t> u;
    std::set_union(pa->positions.begin(), pa->positions.end(), pb.positions.begin(), pb.positions.end(),
                   std::back_inserter(u));
    const std::size_t k = pa->symbols;
    std::size_t count = 1;
    for (std::size_t i = 0; i < u.size(); ++i) {
      count *= k;
      if (count > (std::size_t{1} << 22)) throw BudgetError("joined cylinder partition too large");
    }
    auto index_of = [&](const std::vector<std::int64_t>& pos) {
      std::vector<std::size_t> idx;
      for (auto p : pos) idx.push_back(static_cast<std::size_t>(std::lower_bound(u.begin(), u.end(), p) - u.begin()));
      return idx;
    };
    const auto ia = index_of(pa->positions), ib = index_of(pb.positions);
    CylinderPartition out{u, k, std::vector<std::size_t>(count)};
    std::vector<std::size_t> sym(u.size());
    for (std::size_t code = 0; code < count; ++code) {
      std::size_t c = code;
      for (std::size_t q = u.size(); q-- > 0;) {
        sym[q] = c % k;
        c /= k;
      }
      std::size_t ca = 0, cb = 0;
      for (auto q : ia) ca = ca * k + sym[q];
      for (auto q : ib) cb = cb * k + sym[q];
      out.labels[code] = ids(pa->labels[ca], pb.labels[cb]);
    }
    res.partition.v = std::move(out);
  } else {
    const auto& pa2 = std::get<ProductPartition>(a.v);
    const auto& pb = std::get<ProductPartition>(b.v);
    auto j1 = join_partitions(*pa2.first, *pb.first);
    auto j2 = join_partitions(*pa2.second, *pb.second);
    const std::size_t ka2 = pa2.second->cell_count(), kb2 = pb.second->cell_count();
    const std::size_t k2 = j2.partition.cell_count();
    res.pairs.resize(j1.partition.cell_count() * k2);
    for (std::size_t c1 = 0; c1 < j1.pairs.size(); ++c1)
      for (std::size_t c2 = 0; c2 < j2.pairs.size(); ++c2)
        res.pairs[c1 * k2 + c2] = {j1.pairs[c1].first * ka2 + j2.pairs[c2].first,
                                   j1.pairs[c1].second * kb2 + j2.pairs[c2].second};
    res.partition.v = ProductPartition{std::make_shared<const Partition>(std::move(j1.partition)),
                                       std::make_shared<const Partition>(std::move(j2.partition))};
    return res;
  }
  res.pairs = std::move(ids.pairs);
  return res;
}

}  // namespace fsdyn
