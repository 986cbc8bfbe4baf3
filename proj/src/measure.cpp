#include "fsdyn/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsdyn/error.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_mass(const std::vector<double>& w, const char* what) {
  double total = 0;
  for (double x : w) {
    if (!(x >= 0)) throw DataError(std::string(what) + " has a negative weight");
    total += x;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw DataError(std::string(what) + " has total mass " + std::to_string(total) + ", not 1");
}

}  // namespace

void validate_measure(const GeneratorSystem& s, const Measure& mu) {
  std::visit(overloaded{
                 [&](const LebesgueHaar&) {
                   if (!dynamic_cast<const IntervalSystem*>(&s) && !dynamic_cast<const TorusSystem*>(&s))
                     throw DataError("Lebesgue/Haar measure needs a circle, interval or torus system");
                 },
                 [&](const Bernoulli& b) {
                   auto* sh = dynamic_cast<const FullShiftSystem*>(&s);
                   if (!sh) throw DataError("Bernoulli measure needs a full shift");
                   if (b.probabilities.size() != sh->symbols())
                     throw DataError("Bernoulli measure needs one probability per symbol");
                   check_mass(b.probabilities, "Bernoulli measure");
                 },
                 [&](const Atomic& a) {
                   if (a.points.size() != a.weights.size() || a.points.empty())
                     throw DataError("atomic measure needs one weight per point");
                   check_mass(a.weights, "atomic measure");
                   for (std::size_t i = 0; i < a.points.size(); ++i)
                     if (!s.contains(a.points[i])) throw DataError("atom outside the space");
                 },
                 [&](const Empirical& e) {
                   if (e.points.empty()) throw DataError("empirical measure needs samples");
                   for (std::size_t i = 0; i < e.points.size(); ++i)
                     if (!s.contains(e.points[i])) throw DataError("sample outside the space");
                 },
                 [&](const ProductMeasure& p) {
                   auto* ps = dynamic_cast<const ProductSystem*>(&s);
                   if (!ps || !p.first || !p.second) throw DataError("product measure needs a product system");
                   validate_measure(*ps->first(), *p.first);
                   validate_measure(*ps->second(), *p.second);
                 },
             },
             mu.v);
}

Atomic atoms_of(const Measure& mu) {
  if (auto* a = std::get_if<Atomic>(&mu.v)) return *a;
  if (auto* e = std::get_if<Empirical>(&mu.v)) {
    Atomic a{e->points, std::vector<double>(e->points.size(), 1.0 / static_cast<double>(e->points.size()))};
    return a;
  }
  if (auto* p = std::get_if<ProductMeasure>(&mu.v)) {
    Atomic a = atoms_of(*p->first), b = atoms_of(*p->second);
    Atomic out{cartesian_product(a.points, b.points), {}};
    for (double wa : a.weights)
      for (double wb : b.weights) out.weights.push_back(wa * wb);
    return out;
  }
  throw UnsupportedError("measure has no atomic representation");
}

// ---------------------------------------------------------------- test sets

bool set_contains(const GeneratorSystem& s, const TestSet& a, std::span<const double> x) {
  return std::visit(
      overloaded{
          [&](const IntervalSet& iv) {
            for (const auto& p : iv.pieces) {
              bool lo_ok = p.lo_closed ? x[0] >= p.lo : x[0] > p.lo;
              bool hi_ok = p.hi_closed ? x[0] <= p.hi : x[0] < p.hi;
              if (lo_ok && hi_ok) return true;
            }
            return false;
          },
          [&](const BoxSet& b) {
            for (std::size_t c = 0; c < b.lo.size(); ++c)
              if (!(x[c] >= b.lo[c] && x[c] < b.hi[c])) return false;
            return true;
          },
          [&](const CylinderSet& cyl) {
            const auto* sh = dynamic_cast<const FullShiftSystem*>(&s);
            if (!sh) throw UnsupportedError("cylinder sets need a full shift");
            for (const auto& [pos, sym] : cyl.constraints)
              if (sh->symbol_at(x, pos) != sym) return false;
            return true;
          },
          [&](const FiniteSet& f) {
            auto v = static_cast<std::size_t>(x[0]);
            return std::find(f.points.begin(), f.points.end(), v) != f.points.end();
          },
      },
      a);
}

std::vector<TestSet> dyadic_boxes(std::size_t d, std::size_t level) {
  const std::size_t per = std::size_t{1} << level;
  std::size_t total = 1;
  for (std::size_t c = 0; c < d; ++c) total *= per;
  std::vector<TestSet> out;
  for (std::size_t i = 0; i < total; ++i) {
    BoxSet b{std::vector<double>(d), std::vector<double>(d)};
    std::size_t r = i;
    for (std::size_t c = 0; c < d; ++c) {
      double lo = static_cast<double>(r % per) / static_cast<double>(per);
      b.lo[c] = lo;
      b.hi[c] = lo + 1.0 / static_cast<double>(per);
      r /= per;
    }
    out.emplace_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------- invariance

namespace {

double interval_length(const IntervalSet& a) {
  double t = 0;
  for (const auto& p : a.pieces) t += std::max(0.0, p.hi - p.lo);
  return t;
}

// Lebesgue measure of f^{-1}(A) for a piecewise-linear map.
double lebesgue_preimage(const IntervalMap& f, LineKind kind, const IntervalSet& a) {
  if (!f.piecewise()) throw UnsupportedError("map " + f.name() + " has no interval preimages");
  double total = 0;
  for (const auto& br : f.branches()) {
    const double len = br.x1 - br.x0;
    const double ya = br.y0, yb = br.y0 + br.slope * len;
    if (br.slope == 0) {
      double y = kind == LineKind::circle ? ya - std::floor(ya) : ya;
      for (const auto& p : a.pieces) {
        bool in = (p.lo_closed ? y >= p.lo : y > p.lo) && (p.hi_closed ? y <= p.hi : y < p.hi);
        if (in) {
          total += len;
          break;
        }
      }
      continue;
    }
    const double lo = std::min(ya, yb), hi = std::max(ya, yb);
    std::int64_t t0 = 0, t1 = 0;
    if (kind == LineKind::circle) {
      t0 = static_cast<std::int64_t>(std::floor(lo)) - 1;
      t1 = static_cast<std::int64_t>(std::ceil(hi)) + 1;
    }
    for (const auto& p : a.pieces)
      for (std::int64_t t = t0; t <= t1; ++t) {
        double ov = std::min(hi, p.hi + static_cast<double>(t)) - std::max(lo, p.lo + static_cast<double>(t));
        if (ov > 0) total += ov / std::fabs(br.slope);
      }
  }
  return total;
}

double cylinder_mass(const std::vector<double>& p, const CylinderSet& c) {
  double m = 1;
  for (const auto& [pos, sym] : c.constraints) m *= p.at(sym);
  return m;
}

}  // namespace

DefectReport invariance_defect(const GeneratorSystem& s, const Measure& mu,
                               const std::vector<TestSet>& sets, const DefectOptions& opt) {
  validate_measure(s, mu);
  DefectReport rep;
  auto record = [&](double d, std::size_t i, std::size_t j) {
    if (d > rep.value) {
      rep.value = d;
      rep.generator = i;
      rep.set = j;
    }
  };
  const std::size_t m = s.generator_count();

  if (std::holds_alternative<Atomic>(mu.v) || std::holds_alternative<Empirical>(mu.v)) {
    Atomic a = atoms_of(mu);
    Point img(s.dimension());
    for (std::size_t j = 0; j < sets.size(); ++j) {
      double base = 0;
      for (std::size_t k = 0; k < a.points.size(); ++k)
        if (set_contains(s, sets[j], a.points[k])) base += a.weights[k];
      for (std::size_t i = 0; i < m; ++i) {
        double pre = 0;
        for (std::size_t k = 0; k < a.points.size(); ++k) {
          s.apply(i, a.points[k], img);
          if (set_contains(s, sets[j], img)) pre += a.weights[k];
        }
        record(std::fabs(pre - base), i, j);
      }
    }
    return rep;
  }

  if (std::holds_alternative<LebesgueHaar>(mu.v)) {
    if (auto* l = dynamic_cast<const IntervalSystem*>(&s)) {
      for (std::size_t j = 0; j < sets.size(); ++j) {
        auto* iv = std::get_if<IntervalSet>(&sets[j]);
        if (!iv) throw UnsupportedError("Lebesgue defect on a line needs interval test sets");
        double base = interval_length(*iv);
        for (std::size_t i = 0; i < m; ++i)
          record(std::fabs(lebesgue_preimage(l->maps()[i], l->line(), *iv) - base), i, j);
      }
      return rep;
    }
    if (auto* t = dynamic_cast<const TorusSystem*>(&s)) {
      // Jittered stratified sampling: one point per cell of a g^d grid.
      const std::size_t d = t->dimension();
      auto g = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(opt.samples), 1.0 / static_cast<double>(d)) - 1e-9));
      std::size_t total = 1;
      for (std::size_t c = 0; c < d; ++c) total *= g;
      std::vector<const BoxSet*> boxes;
      for (const auto& a : sets) {
        auto* b = std::get_if<BoxSet>(&a);
        if (!b) throw UnsupportedError("Haar defect on a torus needs box test sets");
        boxes.push_back(b);
      }
      std::vector<std::vector<double>> hits(m, std::vector<double>(boxes.size(), 0.0));
      Point x(d), y(d);
      for (std::size_t cell = 0; cell < total; ++cell) {
        std::size_t r = cell;
        for (std::size_t c = 0; c < d; ++c) {
          x[c] = (static_cast<double>(r % g) + to_unit(counter_draw(opt.seed, cell, c))) / static_cast<double>(g);
          r /= g;
        }
        for (std::size_t i = 0; i < m; ++i) {
          t->apply(i, x, y);
          for (std::size_t j = 0; j < boxes.size(); ++j)
            if (set_contains(s, *boxes[j], y)) hits[i][j] += 1;
        }
      }
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        double vol = 1;
        for (std::size_t c = 0; c < d; ++c) vol *= boxes[j]->hi[c] - boxes[j]->lo[c];
        for (std::size_t i = 0; i < m; ++i)
          record(std::fabs(hits[i][j] / static_cast<double>(total) - vol), i, j);
      }
      rep.approximate = true;
      return rep;
    }
  }

  if (auto* b = std::get_if<Bernoulli>(&mu.v)) {
    auto* sh = dynamic_cast<const FullShiftSystem*>(&s);
    for (std::size_t j = 0; j < sets.size(); ++j) {
      auto* cyl = std::get_if<CylinderSet>(&sets[j]);
      if (!cyl) throw UnsupportedError("Bernoulli defect needs cylinder test sets");
      double base = cylinder_mass(b->probabilities, *cyl);
      for (std::size_t i = 0; i < m; ++i) {
        const auto& g = sh->generators()[i];
        std::vector<std::size_t> inv(sh->symbols());
        for (std::size_t a = 0; a < inv.size(); ++a) inv[g.permutation.empty() ? a : g.permutation[a]] = a;
        CylinderSet pre;
        for (const auto& [pos, sym] : cyl->constraints) pre.constraints.push_back({pos + g.shift, inv.at(sym)});
        record(std::fabs(cylinder_mass(b->probabilities, pre) - base), i, j);
      }
    }
    return rep;
  }

  throw UnsupportedError("invariance defect is not available for this measure on a " + s.kind() +
                         " system");
}

// ---------------------------------------------------------------- integration

Integral integrate(const GeneratorSystem& s, const Measure& mu, const Potential& phi,
                   std::uint64_t seed, std::size_t samples) {
  validate_measure(s, mu);
  if (auto c = phi.constant_value()) return {*c, 0, true};

  if (std::holds_alternative<Atomic>(mu.v) || std::holds_alternative<Empirical>(mu.v) ||
      std::holds_alternative<ProductMeasure>(mu.v)) {
    Atomic a = atoms_of(mu);
    double v = 0;
    for (std::size_t k = 0; k < a.points.size(); ++k) v += a.weights[k] * phi(a.points[k]);
    return {v, 0, true};
  }

  if (std::holds_alternative<LebesgueHaar>(mu.v)) {
    const std::size_t d = s.dimension();
    auto g = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(samples), 1.0 / static_cast<double>(d)) - 1e-9));
    std::size_t total = 1;
    for (std::size_t c = 0; c < d; ++c) total *= g;
    Point x(d);
    double v = 0;
    for (std::size_t cell = 0; cell < total; ++cell) {
      std::size_t r = cell;
      for (std::size_t c = 0; c < d; ++c) {
        x[c] = (static_cast<double>(r % g) + 0.5) / static_cast<double>(g);
        r /= g;
      }
      v += phi(x);
    }
    return {v / static_cast<double>(total), 0, false};
  }

  if (auto* b = std::get_if<Bernoulli>(&mu.v)) {
    auto* sh = dynamic_cast<const FullShiftSystem*>(&s);
    const auto k = sh->symbols();
    const auto r = static_cast<std::int64_t>(sh->radius());
    if (auto deps = phi.shift_dependencies(); deps && deps->size() <= 20) {
      Point x(sh->dimension(), 0.0);
      double v = 0;
      const std::uint64_t count = word_count(k, deps->size());
      for (std::uint64_t code = 0; code < count; ++code) {
        std::uint64_t c = code;
        double w = 1;
        for (std::size_t q = 0; q < deps->size(); ++q) {
          auto sym = static_cast<std::size_t>(c % k);
          c /= k;
          x[static_cast<std::size_t>((*deps)[q] + r)] = static_cast<double>(sym);
          w *= b->probabilities[sym];
        }
        v += w * phi(x);
      }
      return {v, 0, true};
    }
    // Monte Carlo with iid symbols.
    Point x(sh->dimension());
    double sum = 0, sq = 0;
    std::vector<double> cdf(k);
    std::partial_sum(b->probabilities.begin(), b->probabilities.end(), cdf.begin());
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t p = 0; p < x.size(); ++p) {
        double u = to_unit(counter_draw(seed, i, p));
        x[p] = static_cast<double>(std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), k - 1));
      }
      double f = phi(x);
      sum += f;
      sq += f * f;
    }
    double n = static_cast<double>(samples), mean = sum / n;
    return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean) / n), false};
  }
  throw UnsupportedError("integration not available for this measure");
}

}  // namespace fsdyn
