#include "fsdyn/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <unordered_map>

#include "fsdyn/error.hpp"
#include "fsdyn/parallel.hpp"

namespace fsdyn {

namespace {

constexpr std::uint32_t kGap = 0xffffffffu;

// Relabels (a, b) pairs by first appearance.
class PairIds {
 public:
  std::uint32_t operator()(std::uint32_t a, std::uint32_t b) {
    if (a == kGap || b == kGap) return kGap;
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    auto [it, fresh] = ids_.try_emplace(key, static_cast<std::uint32_t>(ids_.size()));
    return it->second;
  }
  std::uint32_t size() const { return static_cast<std::uint32_t>(ids_.size()); }

 private:
  std::unordered_map<std::uint64_t, std::uint32_t> ids_;
};

std::vector<std::uint32_t> to_u32(const std::vector<std::size_t>& v) {
  return std::vector<std::uint32_t>(v.begin(), v.end());
}

struct State {
  virtual ~State() = default;
};

// Join refinement R(w_1..w_n) = xi v f_{w_n}^{-1} R(w_1..w_{n-1}) in one
// set representation.
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual std::unique_ptr<State> root() const = 0;
  virtual std::unique_ptr<State> step(const State& parent, std::size_t a) const = 0;
  virtual std::vector<double> masses(const State& st) const = 0;
  virtual double lost(const State&) const { return 0; }
  virtual Partition to_partition(const State& st, std::string id) const = 0;
};

// ---------------------------------------------------------------- labelled points

struct PointState : State {
  std::vector<std::uint32_t> labels;
  std::uint32_t count = 0;
};

class PointRefiner final : public Refiner {
 public:
  PointRefiner(std::vector<std::uint32_t> base, std::uint32_t base_count,
               std::vector<std::vector<std::uint32_t>> images, std::vector<double> weights, bool finite)
      : base_(std::move(base)), base_count_(base_count), img_(std::move(images)), w_(std::move(weights)),
        finite_(finite) {}

  std::unique_ptr<State> root() const override {
    auto st = std::make_unique<PointState>();
    st->labels = base_;
    st->count = base_count_;
    return st;
  }

  std::unique_ptr<State> step(const State& parent, std::size_t a) const override {
    const auto& p = static_cast<const PointState&>(parent);
    auto st = std::make_unique<PointState>();
    PairIds ids;
    st->labels.resize(base_.size());
    for (std::size_t x = 0; x < base_.size(); ++x) st->labels[x] = ids(base_[x], p.labels[img_[a][x]]);
    st->count = ids.size();
    return st;
  }

  std::vector<double> masses(const State& s) const override {
    const auto& st = static_cast<const PointState&>(s);
    if (w_.empty()) throw DataError("no measure attached to the partition");
    std::vector<double> out(st.count, 0.0);
    for (std::size_t x = 0; x < st.labels.size(); ++x) out[st.labels[x]] += w_[x];
    return out;
  }

  Partition to_partition(const State& s, std::string id) const override {
    if (!finite_) throw UnsupportedError("atom labellings are not partitions of the space");
    const auto& st = static_cast<const PointState&>(s);
    return Partition{std::move(id), LabelPartition{std::vector<std::size_t>(st.labels.begin(), st.labels.end())}};
  }

 private:
  std::vector<std::uint32_t> base_;
  std::uint32_t base_count_;
  std::vector<std::vector<std::uint32_t>> img_;
  std::vector<double> w_;
  bool finite_;
};

// ---------------------------------------------------------------- interval pieces

std::int64_t floor_int(double x) { return static_cast<std::int64_t>(std::floor(x)); }
std::int64_t floor_int(const Rational& x) { return x.floor(); }
double as_double(double x) { return x; }
double as_double(const Rational& x) { return x.to_double(); }

template <class T>
struct LineState : State {
  std::vector<T> b;                 // piece j is [b[j], b[j+1])
  std::vector<std::uint32_t> l;     // kGap marks pruned mass
  std::uint32_t count = 0;
};

template <class T>
class LineRefiner final : public Refiner {
 public:
  LineRefiner(LineKind kind, std::vector<std::vector<Branch<T>>> maps, std::vector<T> xb,
              std::vector<std::uint32_t> xl, std::uint32_t xcount, bool lebesgue, double prune)
      : kind_(kind), maps_(std::move(maps)), xb_(std::move(xb)), xl_(std::move(xl)), xcount_(xcount),
        lebesgue_(lebesgue), prune_(prune) {}

  std::unique_ptr<State> root() const override {
    auto st = std::make_unique<LineState<T>>();
    st->b = xb_;
    st->l = xl_;
    st->count = xcount_;
    return st;
  }

  std::unique_ptr<State> step(const State& parent, std::size_t a) const override {
    const auto& p = static_cast<const LineState<T>&>(parent);
    std::vector<T> pb;
    std::vector<std::uint32_t> pl;
    pullback(p, maps_[a], pb, pl);

    // Overlay with xi.
    auto st = std::make_unique<LineState<T>>();
    PairIds ids;
    std::size_t i = 0, j = 0;
    st->b.push_back(T(0));
    while (i < xl_.size() && j < pl.size()) {
      push_piece(*st, ids(xl_[i], pl[j]));
      const T& ea = xb_[i + 1];
      const T& eb = pb[j + 1];
      if (ea < eb) {
        st->b.push_back(ea);
        ++i;
      } else if (eb < ea) {
        st->b.push_back(eb);
        ++j;
      } else {
        st->b.push_back(ea);
        ++i;
        ++j;
      }
    }
    st->b.back() = T(1);
    st->count = ids.size();
    if (lebesgue_ && prune_ > 0) prune(*st);
    return st;
  }

  std::vector<double> masses(const State& s) const override {
    const auto& st = static_cast<const LineState<T>&>(s);
    std::vector<double> out(st.count, 0.0);
    for (std::size_t j = 0; j < st.l.size(); ++j)
      if (st.l[j] != kGap) out[st.l[j]] += as_double(st.b[j + 1] - st.b[j]);
    return out;
  }

  double lost(const State& s) const override {
    const auto& st = static_cast<const LineState<T>&>(s);
    double t = 0;
    for (std::size_t j = 0; j < st.l.size(); ++j)
      if (st.l[j] == kGap) t += as_double(st.b[j + 1] - st.b[j]);
    return t;
  }

  Partition to_partition(const State& s, std::string id) const override {
    const auto& st = static_cast<const LineState<T>&>(s);
    for (auto l : st.l)
      if (l == kGap) throw DataError("refinement lost mass; no partition to report");
    std::vector<std::size_t> labels(st.l.begin(), st.l.end());
    return interval_partition(st.b, std::move(labels), std::move(id));
  }

 private:
  // Appends a piece, extending the previous one when the label repeats.
  static void push_piece(LineState<T>& st, std::uint32_t label) {
    if (!st.l.empty() && st.l.back() == label) {
      st.b.pop_back();
      return;
    }
    st.l.push_back(label);
  }

  std::uint32_t label_at(const LineState<T>& p, const T& y) const {
    auto it = std::upper_bound(p.b.begin(), p.b.end(), y);
    std::size_t j = it == p.b.begin() ? 0 : static_cast<std::size_t>(it - p.b.begin()) - 1;
    return p.l[std::min(j, p.l.size() - 1)];
  }

  void pullback(const LineState<T>& p, const std::vector<Branch<T>>& branches, std::vector<T>& starts,
                std::vector<std::uint32_t>& labels) const {
    auto add = [&](const T& x, std::uint32_t l) {
      if (!starts.empty() && !(starts.back() < x)) {
        // zero-length piece (rounding): keep the later label
        labels.back() = l;
        return;
      }
      if (!labels.empty() && labels.back() == l) return;
      starts.push_back(x);
      labels.push_back(l);
    };
    struct Seg {
      T lo, hi;
      std::uint32_t l;
    };
    std::vector<Seg> segs;
    for (const auto& br : branches) {
      const T len = br.x1 - br.x0;
      const T ya = br.y0;
      if (br.slope == T(0)) {
        T y = ya;
        if (kind_ == LineKind::circle) y = y - T(floor_int(y));
        add(br.x0, label_at(p, y));
        continue;
      }
      const T yb = br.y0 + br.slope * len;
      const T lo = ya < yb ? ya : yb;
      const T hi = ya < yb ? yb : ya;
      std::int64_t t0 = 0, t1 = 0;
      if (kind_ == LineKind::circle) {
        t0 = floor_int(lo);
        t1 = floor_int(hi);
      }
      segs.clear();
      for (std::int64_t t = t0; t <= t1; ++t) {
        const T shift(t);
        const T from = lo - shift;
        auto it = std::upper_bound(p.b.begin(), p.b.end(), from);
        std::size_t j = it == p.b.begin() ? 0 : static_cast<std::size_t>(it - p.b.begin()) - 1;
        for (; j < p.l.size(); ++j) {
          T s = p.b[j] + shift, e = p.b[j + 1] + shift;
          if (!(s < hi)) break;
          if (s < lo) s = lo;
          if (hi < e) e = hi;
          if (s < e) segs.push_back({s, e, p.l[j]});
        }
      }
      if (br.slope > T(0)) {
        for (const auto& sg : segs) add(br.x0 + (sg.lo - br.y0) / br.slope, sg.l);
      } else {
        for (auto it = segs.rbegin(); it != segs.rend(); ++it) add(br.x0 + (it->hi - br.y0) / br.slope, it->l);
      }
    }
    starts.push_back(T(1));
    if (starts.size() >= 2 && !(starts[starts.size() - 2] < starts.back())) {
      starts.erase(starts.end() - 2);
      labels.pop_back();
    }
  }

  void prune(LineState<T>& st) const {
    auto m = masses(st);
    bool any = false;
    for (double v : m) any |= v < prune_;
    if (!any) return;
    std::vector<std::uint32_t> relabel(m.size());
    std::uint32_t next = 0;
    // keep first-appearance order of survivors
    std::vector<char> seen(m.size(), 0);
    for (auto l : st.l) {
      if (l == kGap || seen[l]) continue;
      seen[l] = 1;
      relabel[l] = m[l] < prune_ ? kGap : next++;
    }
    LineState<T> out;
    out.b.push_back(T(0));
    for (std::size_t j = 0; j < st.l.size(); ++j) {
      std::uint32_t l = st.l[j] == kGap ? kGap : relabel[st.l[j]];
      push_piece(out, l);
      out.b.push_back(st.b[j + 1]);
    }
    st.b = std::move(out.b);
    st.l = std::move(out.l);
    st.count = next;
  }

  LineKind kind_;
  std::vector<std::vector<Branch<T>>> maps_;
  std::vector<T> xb_;
  std::vector<std::uint32_t> xl_;
  std::uint32_t xcount_;
  bool lebesgue_;
  double prune_;
};

// ---------------------------------------------------------------- cylinders

struct CylState : State {
  std::vector<std::int64_t> pos;
  std::vector<std::uint32_t> table;
  std::uint32_t count = 0;
};

class CylRefiner final : public Refiner {
 public:
  CylRefiner(const FullShiftSystem& s, const CylinderPartition& xi, std::vector<double> probs)
      : k_(s.symbols()), gens_(s.generators()), xi_(xi), p_(std::move(probs)) {}

  std::unique_ptr<State> root() const override {
    auto st = std::make_unique<CylState>();
    st->pos = xi_.positions;
    st->table = to_u32(xi_.labels);
    std::size_t c = 0;
    for (auto l : xi_.labels) c = std::max(c, l + 1);
    st->count = static_cast<std::uint32_t>(c);
    return st;
  }

  std::unique_ptr<State> step(const State& parent, std::size_t a) const override {
    const auto& p = static_cast<const CylState&>(parent);
    const auto& g = gens_.at(a);
    std::vector<std::int64_t> moved(p.pos);
    for (auto& x : moved) x += g.shift;
    auto st = std::make_unique<CylState>();
    std::set_union(xi_.positions.begin(), xi_.positions.end(), moved.begin(), moved.end(),
                   std::back_inserter(st->pos));
    std::size_t count = 1;
    for (std::size_t i = 0; i < st->pos.size(); ++i) {
      count *= k_;
      if (count > (std::size_t{1} << 22)) throw BudgetError("cylinder refinement needs more than 2^22 assignments");
    }
    auto index_of = [&](const std::vector<std::int64_t>& pos) {
      std::vector<std::size_t> idx;
      for (auto q : pos)
        idx.push_back(static_cast<std::size_t>(std::lower_bound(st->pos.begin(), st->pos.end(), q) - st->pos.begin()));
      return idx;
    };
    const auto ix = index_of(xi_.positions), ip = index_of(moved);
    PairIds ids;
    st->table.resize(count);
    std::vector<std::size_t> sym(st->pos.size());
    for (std::size_t code = 0; code < count; ++code) {
      std::size_t c = code;
      for (std::size_t q = st->pos.size(); q-- > 0;) {
        sym[q] = c % k_;
        c /= k_;
      }
      std::size_t cx = 0, cp = 0;
      for (auto q : ix) cx = cx * k_ + sym[q];
      // (f omega)_i = pi(omega_{i+s})
      for (auto q : ip) cp = cp * k_ + (g.permutation.empty() ? sym[q] : g.permutation[sym[q]]);
      st->table[code] = ids(static_cast<std::uint32_t>(xi_.labels[cx]), p.table[cp]);
    }
    st->count = ids.size();
    return st;
  }

  std::vector<double> masses(const State& s) const override {
    const auto& st = static_cast<const CylState&>(s);
    if (p_.empty()) throw DataError("no measure attached to the partition");
    std::vector<double> out(st.count, 0.0);
    const std::size_t n = st.pos.size();
    std::vector<std::size_t> sym(n);
    for (std::size_t code = 0; code < st.table.size(); ++code) {
      std::size_t c = code;
      double w = 1;
      for (std::size_t q = n; q-- > 0;) {
        w *= p_[c % k_];
        c /= k_;
      }
      out[st.table[code]] += w;
    }
    return out;
  }

  Partition to_partition(const State& s, std::string id) const override {
    const auto& st = static_cast<const CylState&>(s);
    return Partition{std::move(id),
                     CylinderPartition{st.pos, k_, std::vector<std::size_t>(st.table.begin(), st.table.end())}};
  }

 private:
  std::size_t k_;
  std::vector<ShiftGenerator> gens_;
  CylinderPartition xi_;
  std::vector<double> p_;
};

// ---------------------------------------------------------------- products

struct ProductState : State {
  std::unique_ptr<State> a, b;
};

class ProductRefiner final : public Refiner {
 public:
  ProductRefiner(std::unique_ptr<Refiner> a, std::unique_ptr<Refiner> b, std::size_t m2)
      : a_(std::move(a)), b_(std::move(b)), m2_(m2) {}

  std::unique_ptr<State> root() const override {
    auto st = std::make_unique<ProductState>();
    st->a = a_->root();
    st->b = b_->root();
    return st;
  }
  std::unique_ptr<State> step(const State& parent, std::size_t g) const override {
    const auto& p = static_cast<const ProductState&>(parent);
    auto st = std::make_unique<ProductState>();
    st->a = a_->step(*p.a, g / m2_);
    st->b = b_->step(*p.b, g % m2_);
    return st;
  }
  std::vector<double> masses(const State& s) const override {
    const auto& st = static_cast<const ProductState&>(s);
    auto ma = a_->masses(*st.a), mb = b_->masses(*st.b);
    std::vector<double> out(ma.size() * mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i)
      for (std::size_t j = 0; j < mb.size(); ++j) out[i * mb.size() + j] = ma[i] * mb[j];
    return out;
  }
  double lost(const State& s) const override {
    const auto& st = static_cast<const ProductState&>(s);
    return a_->lost(*st.a) + b_->lost(*st.b);
  }
  Partition to_partition(const State& s, std::string id) const override {
    const auto& st = static_cast<const ProductState&>(s);
    auto pa = a_->to_partition(*st.a, "a"), pb = b_->to_partition(*st.b, "b");
    auto out = product_partition(pa, pb);
    out.id = std::move(id);
    return out;
  }

 private:
  std::unique_ptr<Refiner> a_, b_;
  std::size_t m2_;
};

// ---------------------------------------------------------------- dispatch

bool is_atomic(const Measure* mu) {
  return mu && (std::holds_alternative<Atomic>(mu->v) || std::holds_alternative<Empirical>(mu->v));
}

// Atoms with positive weight and the index of each generator image among them.
struct AtomGraph {
  PointSet points;
  std::vector<double> weights;
  std::vector<std::vector<std::uint32_t>> images;  // kGap when an image is not an atom
};

AtomGraph atom_graph(const GeneratorSystem& s, const Measure& mu) {
  Atomic a = atoms_of(mu);
  AtomGraph g{PointSet(s.dimension()), {}, {}};
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (!(a.weights[i] > 0)) continue;
    // merge repeated points
    bool merged = false;
    for (std::size_t j = 0; j < g.points.size() && !merged; ++j)
      if (s.distance(g.points[j], a.points[i]) <= 1e-12) {
        g.weights[j] += a.weights[i];
        merged = true;
      }
    if (!merged) {
      g.points.push_back(a.points[i]);
      g.weights.push_back(a.weights[i]);
    }
  }
  Point y(s.dimension());
  g.images.assign(s.generator_count(), std::vector<std::uint32_t>(g.points.size(), kGap));
  for (std::size_t f = 0; f < s.generator_count(); ++f)
    for (std::size_t i = 0; i < g.points.size(); ++i) {
      s.apply(f, g.points[i], y);
      for (std::size_t j = 0; j < g.points.size(); ++j)
        if (s.distance(g.points[j], y) <= 1e-9) {
          g.images[f][i] = static_cast<std::uint32_t>(j);
          break;
        }
    }
  return g;
}

std::unique_ptr<Refiner> make_refiner(const GeneratorSystem& s, const Measure* mu, const Partition& xi,
                                      double prune, bool force_double) {
  validate_partition(s, xi);
  if (auto* f = dynamic_cast<const FiniteSystem*>(&s)) {
    const auto& lp = std::get<LabelPartition>(xi.v);
    std::vector<double> w;
    if (mu) {
      if (!is_atomic(mu)) throw DataError("measures on finite systems must be atomic");
      Atomic a = atoms_of(*mu);
      w.assign(f->point_count(), 0.0);
      for (std::size_t i = 0; i < a.points.size(); ++i) w[static_cast<std::size_t>(a.points[i][0])] += a.weights[i];
    }
    std::vector<std::vector<std::uint32_t>> img;
    for (const auto& t : f->tables()) img.push_back(to_u32(t));
    return std::make_unique<PointRefiner>(to_u32(lp.labels), static_cast<std::uint32_t>(xi.cell_count()),
                                          std::move(img), std::move(w), true);
  }
  if (is_atomic(mu)) {
    auto g = atom_graph(s, *mu);
    for (const auto& row : g.images)
      for (auto j : row)
        if (j == kGap) throw DataError("atomic measure is not carried onto itself by the generators");
    std::vector<std::uint32_t> base(g.points.size());
    for (std::size_t i = 0; i < g.points.size(); ++i)
      base[i] = static_cast<std::uint32_t>(partition_label(s, xi, g.points[i]));
    return std::make_unique<PointRefiner>(std::move(base), static_cast<std::uint32_t>(xi.cell_count()),
                                          std::move(g.images), std::move(g.weights), false);
  }
  if (auto* l = dynamic_cast<const IntervalSystem*>(&s)) {
    if (mu && !std::holds_alternative<LebesgueHaar>(mu->v))
      throw UnsupportedError("interval refinements need Lebesgue or atomic measures");
    const auto& ip = std::get<IntervalPartition>(xi.v);
    bool exact = !force_double && ip.exact_breaks.has_value();
    for (const auto& f : l->maps()) {
      if (!f.piecewise()) throw UnsupportedError("map " + f.name() + " has no interval preimages");
      exact = exact && f.exact_branches().has_value();
    }
    const auto labels = to_u32(ip.labels);
    const auto count = static_cast<std::uint32_t>(xi.cell_count());
    if (exact) {
      std::vector<std::vector<Branch<Rational>>> maps;
      for (const auto& f : l->maps()) maps.push_back(*f.exact_branches());
      return std::make_unique<LineRefiner<Rational>>(l->line(), std::move(maps), *ip.exact_breaks, labels, count,
                                                     mu != nullptr, prune);
    }
    std::vector<std::vector<Branch<double>>> maps;
    for (const auto& f : l->maps()) maps.push_back(f.branches());
    return std::make_unique<LineRefiner<double>>(l->line(), std::move(maps), ip.breaks, labels, count,
                                                 mu != nullptr, prune);
  }
  if (auto* sh = dynamic_cast<const FullShiftSystem*>(&s)) {
    std::vector<double> p;
    if (mu) {
      auto* b = std::get_if<Bernoulli>(&mu->v);
      if (!b) throw UnsupportedError("cylinder refinements need Bernoulli or atomic measures");
      p = b->probabilities;
    }
    return std::make_unique<CylRefiner>(*sh, std::get<CylinderPartition>(xi.v), std::move(p));
  }
  if (auto* pr = dynamic_cast<const ProductSystem*>(&s)) {
    const auto& pp = std::get<ProductPartition>(xi.v);
    const Measure *m1 = nullptr, *m2 = nullptr;
    if (mu) {
      auto* pm = std::get_if<ProductMeasure>(&mu->v);
      if (!pm) throw UnsupportedError("product refinements need product or atomic measures");
      m1 = pm->first.get();
      m2 = pm->second.get();
    }
    return std::make_unique<ProductRefiner>(make_refiner(*pr->first(), m1, *pp.first, prune, force_double),
                                            make_refiner(*pr->second(), m2, *pp.second, prune, force_double),
                                            pr->second()->generator_count());
  }
  throw UnsupportedError("join refinements are not available on a " + s.kind() + " system");
}

double atomic_defect(const GeneratorSystem& s, const Measure& mu) {
  auto g = atom_graph(s, mu);
  double worst = 0;
  for (const auto& row : g.images) {
    std::vector<double> pre(g.points.size(), 0.0);
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] != kGap) pre[row[i]] += g.weights[i];
    for (std::size_t j = 0; j < pre.size(); ++j) worst = std::max(worst, std::fabs(pre[j] - g.weights[j]));
  }
  return worst;
}

struct Defect {
  double value = 0;
  bool approximate = false;
};

Defect measure_defect(const GeneratorSystem& s, const Measure& mu, const Partition& xi, const EntropyParams& p) {
  if (is_atomic(&mu) && !dynamic_cast<const FiniteSystem*>(&s)) return {atomic_defect(s, mu), false};
  if (auto* pm = std::get_if<ProductMeasure>(&mu.v)) {
    auto& pr = dynamic_cast<const ProductSystem&>(s);
    const auto& pp = std::get<ProductPartition>(xi.v);
    EntropyParams sub = p;
    sub.test_sets.clear();
    auto a = measure_defect(*pr.first(), *pm->first, *pp.first, sub);
    auto b = measure_defect(*pr.second(), *pm->second, *pp.second, sub);
    return {std::max(a.value, b.value), a.approximate || b.approximate};
  }
  auto sets = p.test_sets.empty() ? invariance_test_sets(s, mu, xi) : p.test_sets;
  auto r = invariance_defect(s, mu, sets, DefectOptions{p.defect_samples, p.defect_seed});
  return {r.value, r.approximate};
}

}  // namespace

// ---------------------------------------------------------------- static entropies

double entropy_of_masses(const std::vector<double>& masses) {
  double h = 0;
  for (double m : masses) {
    if (m < 0) throw DataError("partition cell has negative measure");
    if (m > 0) h -= m * std::log(m);
  }
  return h;
}

std::vector<double> cell_masses(const GeneratorSystem& s, const Measure& mu, const Partition& xi) {
  validate_measure(s, mu);
  auto r = make_refiner(s, &mu, xi, 0.0, false);
  return r->masses(*r->root());
}

double partition_entropy(const GeneratorSystem& s, const Measure& mu, const Partition& xi) {
  return entropy_of_masses(cell_masses(s, mu, xi));
}

double conditional_entropy(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                           const Partition& eta) {
  auto j = join_partitions(xi, eta);
  auto joint = cell_masses(s, mu, j.partition);
  std::vector<double> marginal(eta.cell_count(), 0.0);
  for (std::size_t c = 0; c < joint.size(); ++c) marginal[j.pairs[c].second] += joint[c];
  double h = 0;
  for (std::size_t c = 0; c < joint.size(); ++c) {
    if (joint[c] < 0) throw DataError("partition cell has negative measure");
    if (joint[c] > 0) h += joint[c] * std::log(marginal[j.pairs[c].second] / joint[c]);
  }
  return std::max(h, 0.0);
}

double rho_distance(const GeneratorSystem& s, const Measure& mu, const Partition& xi, const Partition& eta) {
  return conditional_entropy(s, mu, xi, eta) + conditional_entropy(s, mu, eta, xi);
}

Partition refine_under_word(const GeneratorSystem& s, const Partition& xi, const Word& w) {
  if (w.empty()) throw DataError("dynamics words must be nonempty");
  if (w.alphabet_size() != s.generator_count()) throw DataError("word alphabet does not match the system");
  auto run = [&](bool force_double) {
    auto r = make_refiner(s, nullptr, xi, 0.0, force_double);
    auto st = r->root();
    for (std::size_t k = 1; k < w.size(); ++k) st = r->step(*st, w[k]);
    return r->to_partition(*st, xi.id + "@" + w.str());
  };
  try {
    return run(false);
  } catch (const RationalOverflow&) {
    return run(true);
  }
}

// ---------------------------------------------------------------- entropy rate

std::vector<TestSet> invariance_test_sets(const GeneratorSystem& s, const Measure& mu, const Partition& xi) {
  std::vector<TestSet> sets;
  if (auto* f = dynamic_cast<const FiniteSystem*>(&s)) {
    const auto& lp = std::get<LabelPartition>(xi.v);
    for (std::size_t c = 0; c < xi.cell_count(); ++c) {
      FiniteSet a;
      for (std::size_t x = 0; x < lp.labels.size(); ++x)
        if (lp.labels[x] == c) a.points.push_back(x);
      sets.push_back(std::move(a));
    }
    for (std::size_t x = 0; x < f->point_count() && x < 256; ++x) sets.push_back(FiniteSet{{x}});
    return sets;
  }
  if (dynamic_cast<const IntervalSystem*>(&s)) {
    if (auto* ip = std::get_if<IntervalPartition>(&xi.v)) {
      for (std::size_t c = 0; c < xi.cell_count(); ++c) {
        IntervalSet a;
        for (std::size_t j = 0; j < ip->labels.size(); ++j)
          if (ip->labels[j] == c) a.pieces.push_back(Interval{ip->breaks[j], ip->breaks[j + 1], true, false});
        sets.push_back(std::move(a));
      }
    }
    for (std::size_t j = 0; j < 16; ++j) sets.push_back(IntervalSet{{Interval{j / 16.0, (j + 1) / 16.0, true, false}}});
    if (is_atomic(&mu)) {
      Atomic a = atoms_of(mu);
      for (std::size_t i = 0; i < a.points.size(); ++i)
        sets.push_back(IntervalSet{{Interval{a.points[i][0], a.points[i][0], true, true}}});
    }
    return sets;
  }
  if (auto* sh = dynamic_cast<const FullShiftSystem*>(&s)) {
    if (auto* cp = std::get_if<CylinderPartition>(&xi.v)) {
      const std::size_t k = cp->symbols;
      for (std::size_t code = 0; code < cp->labels.size(); ++code) {
        CylinderSet c;
        std::size_t r = code;
        for (std::size_t q = cp->positions.size(); q-- > 0;) {
          c.constraints.push_back({cp->positions[q], r % k});
          r /= k;
        }
        sets.push_back(std::move(c));
      }
    }
    for (std::size_t a = 0; a < sh->symbols(); ++a) sets.push_back(CylinderSet{{{0, a}}});
    return sets;
  }
  if (auto* t = dynamic_cast<const TorusSystem*>(&s)) return dyadic_boxes(t->dimension(), 2);
  return sets;
}

EntropyReport entropy_rate(const GeneratorSystem& s, const Measure& mu, const Partition& xi,
                           const EntropyParams& params) {
  validate_measure(s, mu);
  validate_partition(s, xi);
  if (params.horizons.empty()) throw DataError("horizon list is empty");
  for (std::size_t i = 0; i < params.horizons.size(); ++i) {
    if (params.horizons[i] == 0) throw DataError("horizons must be positive");
    if (i && params.horizons[i] <= params.horizons[i - 1]) throw DataError("horizons must be strictly increasing");
  }
  if (dynamic_cast<const TorusSystem*>(&s))
    throw UnsupportedError("measure entropy on the torus is not supported; use the affine bounds");

  EntropyReport rep;
  rep.partition_id = xi.id;
  const auto d = measure_defect(s, mu, xi, params);
  rep.defect = d.value;
  rep.defect_approximate = d.approximate;
  if (!(d.value <= params.invariance_tolerance))
    throw NonInvariantError("measure is not invariant: defect " + std::to_string(d.value) + " exceeds tolerance " +
                                std::to_string(params.invariance_tolerance),
                            d.value);

  const std::size_t m = s.generator_count();
  const std::size_t nmax = params.horizons.back();
  const bool mc = params.strategy.mode == WordStrategy::Mode::montecarlo;
  // a_n depends on w_2..w_n only, so the tree runs over words of length n - 1.
  if (!mc && word_count(m, nmax - 1) > params.strategy.budget)
    throw BudgetError("entropy: " + std::to_string(m) + "^" + std::to_string(nmax - 1) +
                      " words exceed the budget; use montecarlo");
  if (mc && params.strategy.sample_count == 0) throw DataError("montecarlo needs a positive sample count");

  std::vector<double> sums(nmax + 1, 0.0), sq(nmax + 1, 0.0);
  double lost = 0;

  auto run = [&](bool force_double) {
    auto ref = make_refiner(s, &mu, xi, params.prune_threshold, force_double);
    auto root = ref->root();
    rep.entropy_of_partition = entropy_of_masses(ref->masses(*root));
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    lost = 0;
    if (mc) {
      const std::size_t N = params.strategy.sample_count;
      std::vector<std::vector<double>> h(N);
      std::vector<double> worst(N, 0.0);
      parallel_for(N, params.threads, [&](std::size_t i) {
        Word w = sample_word(m, nmax, params.strategy.seed, i);
        h[i].resize(nmax + 1, 0.0);
        std::unique_ptr<State> st;
        const State* cur = root.get();
        h[i][1] = rep.entropy_of_partition;
        for (std::size_t k = 2; k <= nmax; ++k) {
          st = ref->step(*cur, w[k - 1]);
          cur = st.get();
          h[i][k] = entropy_of_masses(ref->masses(*cur));
          worst[i] = std::max(worst[i], ref->lost(*cur));
        }
      });
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 1; k <= nmax; ++k) {
          sums[k] += h[i][k];
          sq[k] += h[i][k] * h[i][k];
        }
        lost = std::max(lost, worst[i]);
      }
      for (std::size_t k = 1; k <= nmax; ++k) {
        sums[k] /= static_cast<double>(N);
        sq[k] /= static_cast<double>(N);
      }
      return;
    }
    // Exhaustive prefix DFS split into a fixed set of subtrees (independent
    // of the thread count), reduced in subtree order.
    const std::size_t len = nmax - 1;
    std::size_t t = 0;
    while (t < len && word_count(m, t) < 64) ++t;
    const std::size_t tasks = word_count(m, t);
    std::vector<std::vector<double>> part(tasks, std::vector<double>(nmax + 1, 0.0));
    std::vector<double> worst(tasks, 0.0);
    parallel_for(tasks, params.threads, [&](std::size_t task) {
      auto& acc = part[task];
      // letters of the task prefix, most significant first
      std::vector<std::size_t> pre(t);
      std::size_t c = task;
      for (std::size_t q = t; q-- > 0;) {
        pre[q] = c % m;
        c /= m;
      }
      std::vector<std::unique_ptr<State>> chain;
      const State* cur = root.get();
      for (std::size_t q = 0; q < t; ++q) {
        chain.push_back(ref->step(*cur, pre[q]));
        cur = chain.back().get();
        // depth q+2 belongs to this task only if the remaining prefix letters are 0
        bool first = std::all_of(pre.begin() + static_cast<std::ptrdiff_t>(q + 1), pre.end(),
                                 [](std::size_t v) { return v == 0; });
        if (first) acc[q + 2] += entropy_of_masses(ref->masses(*cur));
        worst[task] = std::max(worst[task], ref->lost(*cur));
      }
      if (task == 0) acc[1] += rep.entropy_of_partition;
      // DFS below the prefix
      std::function<void(const State&, std::size_t)> dfs = [&](const State& node, std::size_t depth) {
        if (depth == len) return;
        for (std::size_t a = 0; a < m; ++a) {
          auto child = ref->step(node, a);
          acc[depth + 2] += entropy_of_masses(ref->masses(*child));
          worst[task] = std::max(worst[task], ref->lost(*child));
          dfs(*child, depth + 1);
        }
      };
      dfs(*cur, t);
    });
    for (std::size_t task = 0; task < tasks; ++task) {
      for (std::size_t k = 1; k <= nmax; ++k) sums[k] += part[task][k];
      lost = std::max(lost, worst[task]);
    }
    for (std::size_t k = 1; k <= nmax; ++k) sums[k] /= static_cast<double>(word_count(m, k - 1));
  };

  try {
    run(false);
  } catch (const RationalOverflow&) {
    rep.exact_arithmetic = false;
    rep.diagnostics.push_back("rational interval endpoints overflowed; recomputed in double precision");
    run(true);
  }
  if (auto* ip = std::get_if<IntervalPartition>(&xi.v); ip && !ip->exact_breaks) rep.exact_arithmetic = false;
  rep.pruned_mass = lost;
  if (lost >= params.ledger_limit)
    throw BudgetError("pruned cell mass " + std::to_string(lost) + " exceeds the ledger limit; lower prune_threshold");

  rep.estimate = std::numeric_limits<double>::infinity();
  rep.min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t n : params.horizons) {
    EntropyRow row;
    row.n = n;
    row.a_n = sums[n];
    row.rate = sums[n] / static_cast<double>(n);
    row.increment = sums[n] - sums[n - 1];
    row.words = mc ? params.strategy.sample_count : word_count(m, n);
    if (mc && params.strategy.sample_count > 1) {
      const double N = static_cast<double>(params.strategy.sample_count);
      const double var = std::max(0.0, sq[n] - sums[n] * sums[n]) * N / (N - 1);
      row.stderr_ = std::sqrt(var / N);
    }
    rep.rows.push_back(row);
    rep.estimate = std::min(rep.estimate, row.increment);
    rep.min_rate = std::min(rep.min_rate, row.rate);
  }
  rep.method = "min over n of a_n - a_(n-1)";
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    if (rep.rows[k].increment > rep.rows[k - 1].increment + 1e-9 && !mc)
      rep.diagnostics.push_back("increment grew at n=" + std::to_string(rep.rows[k].n));
  return rep;
}

MeasureEntropyReport measure_entropy(const GeneratorSystem& s, const Measure& mu,
                                     const std::vector<Partition>& sequence, const EntropyParams& params) {
  MeasureEntropyReport out;
  double best = 0;
  for (const auto& xi : sequence) {
    auto r = entropy_rate(s, mu, xi, params);
    best = std::max(best, r.estimate);
    out.rows.push_back({xi.id, r.estimate, best});
    out.reports.push_back(std::move(r));
  }
  out.value = best;
  return out;
}

}  // namespace fsdyn
