#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fsdyn/cli.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn::cli {

namespace {

class Ctx {
 public:
  std::vector<Diagnostic> diags;
  void error(std::string path, std::string msg) { diags.push_back({std::move(path), std::move(msg)}); }
  std::size_t mark() const { return diags.size(); }
  bool clean_since(std::size_t m) const { return diags.size() == m; }
};

std::string at(const std::string& base, const std::string& key) { return base + "/" + key; }
std::string at(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

const json* member(Ctx& c, const json& obj, const std::string& path, const char* key, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) c.error(at(path, key), "missing");
    return nullptr;
  }
  return &*it;
}

std::optional<double> as_number(Ctx& c, const json& v, const std::string& path) {
  if (!v.is_number()) {
    c.error(path, "expected a number");
    return std::nullopt;
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    c.error(path, "expected a finite number");
    return std::nullopt;
  }
  return x;
}

std::optional<std::int64_t> as_int(Ctx& c, const json& v, const std::string& path) {
  if (!v.is_number_integer()) {
    c.error(path, "expected an integer");
    return std::nullopt;
  }
  return v.get<std::int64_t>();
}

std::optional<std::size_t> as_count(Ctx& c, const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    c.error(path, "expected a nonnegative integer");
    return std::nullopt;
  }
  return v.get<std::size_t>();
}

std::optional<std::string> as_string(Ctx& c, const json& v, const std::string& path) {
  if (!v.is_string()) {
    c.error(path, "expected a string");
    return std::nullopt;
  }
  return v.get<std::string>();
}

template <class T, class F>
std::optional<std::vector<T>> as_list(Ctx& c, const json& v, const std::string& path, F&& each) {
  if (!v.is_array()) {
    c.error(path, "expected an array");
    return std::nullopt;
  }
  std::vector<T> out;
  bool ok = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto x = each(c, v[i], at(path, i));
    if (x) out.push_back(*x);
    else ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<std::vector<double>> numbers(Ctx& c, const json& v, const std::string& path) {
  return as_list<double>(c, v, path, as_number);
}
std::optional<std::vector<std::size_t>> counts(Ctx& c, const json& v, const std::string& path) {
  return as_list<std::size_t>(c, v, path, as_count);
}

// Optional fields fall back to the default; present fields of the wrong type
// are reported.
double number_or(Ctx& c, const json& obj, const std::string& path, const char* key, double def) {
  const json* v = member(c, obj, path, key, false);
  if (!v) return def;
  return as_number(c, *v, at(path, key)).value_or(def);
}
std::size_t count_or(Ctx& c, const json& obj, const std::string& path, const char* key, std::size_t def) {
  const json* v = member(c, obj, path, key, false);
  if (!v) return def;
  return as_count(c, *v, at(path, key)).value_or(def);
}

std::optional<Rational> rational(const json& v) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (v.is_number_float()) return Rational::from_double(v.get<double>());
  if (v.is_string()) return Rational::parse(v.get<std::string>());
  return std::nullopt;
}

std::optional<Rational> as_rational(Ctx& c, const json& v, const std::string& path) {
  auto r = rational(v);
  if (!r) c.error(path, "expected a rational number (integer, decimal or \"p/q\")");
  return r;
}

// Numbers or "p/q" strings as doubles.
std::optional<std::vector<double>> reals(Ctx& c, const json& v, const std::string& path) {
  return as_list<double>(c, v, path, [](Ctx& c2, const json& x, const std::string& p) -> std::optional<double> {
    if (x.is_string()) {
      auto r = Rational::parse(x.get<std::string>());
      if (!r) c2.error(p, "not a number");
      return r ? std::optional<double>(r->to_double()) : std::nullopt;
    }
    return as_number(c2, x, p);
  });
}

// Exact when every entry is an integer, a "p/q" string or a short decimal.
std::optional<std::vector<Rational>> exact_list(const json& v) {
  std::vector<Rational> out;
  for (const auto& x : v) {
    auto r = rational(x);
    if (!r) return std::nullopt;
    out.push_back(*r);
  }
  return out;
}

std::string kind_of(Ctx& c, const json& j, const std::string& path) {
  if (!j.is_object()) {
    c.error(path, "expected an object");
    return {};
  }
  const json* k = member(c, j, path, "kind", true);
  if (!k) return {};
  return as_string(c, *k, at(path, "kind")).value_or("");
}

void check_keys(Ctx& c, const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  if (!obj.is_object()) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) c.error(at(path, it.key()), "unknown field");
  }
}

// ---------------------------------------------------------------- systems

std::optional<IntervalMap> build_map(Ctx& c, const json& j, const std::string& p) {
  if (!j.is_object()) {
    c.error(p, "expected an object");
    return std::nullopt;
  }
  const json* t = member(c, j, p, "type", true);
  if (!t) return std::nullopt;
  auto type = as_string(c, *t, at(p, "type"));
  if (!type) return std::nullopt;
  const auto m = c.mark();
  try {
    if (*type == "times") {
      const json* k = member(c, j, p, "k", true);
      auto kv = k ? as_int(c, *k, at(p, "k")) : std::nullopt;
      if (!kv) return std::nullopt;
      if (*kv == 0) {
        c.error(at(p, "k"), "the multiplier must be nonzero");
        return std::nullopt;
      }
      return IntervalMap::times(*kv);
    }
    if (*type == "tent") return IntervalMap::tent();
    if (*type == "identity") return IntervalMap::identity();
    if (*type == "constant" || *type == "rotation") {
      const char* key = *type == "constant" ? "value" : "angle";
      const json* v = member(c, j, p, key, true);
      auto r = v ? as_rational(c, *v, at(p, key)) : std::nullopt;
      if (!r) return std::nullopt;
      return *type == "constant" ? IntervalMap::constant(*r) : IntervalMap::rotation(*r);
    }
    if (*type == "piecewise_linear") {
      const json* b = member(c, j, p, "breaks", true);
      const json* v = member(c, j, p, "values", true);
      auto bd = b ? reals(c, *b, at(p, "breaks")) : std::nullopt;
      auto vd = v ? reals(c, *v, at(p, "values")) : std::nullopt;
      if (!bd || !vd) return std::nullopt;
      if (bd->size() != vd->size() || bd->size() < 2) {
        c.error(at(p, "values"), "needs one value per break and at least two breaks");
        return std::nullopt;
      }
      auto be = exact_list(*b), ve = exact_list(*v);
      if (be && ve) return IntervalMap::piecewise_linear(*be, *ve);
      return IntervalMap::piecewise_linear(*bd, *vd);
    }
    if (*type == "sine") {
      const double a = number_or(c, j, p, "a", 0.0);
      const double bb = number_or(c, j, p, "b", 0.0);
      if (!c.clean_since(m)) return std::nullopt;
      return IntervalMap::sine_circle(a, bb);
    }
    c.error(at(p, "type"), "unknown map type '" + *type + "'");
  } catch (const Error& e) {
    c.error(p, e.what());
  }
  return std::nullopt;
}

SystemPtr build_system(Ctx& c, const json& j, const std::string& p) {
  const std::string kind = kind_of(c, j, p);
  if (kind.empty()) return nullptr;
  const auto m = c.mark();
  try {
    if (kind == "finite") {
      check_keys(c, j, p, {"kind", "points", "tables", "distance"});
      const json* pts = member(c, j, p, "points", true);
      const auto m0 = c.mark();
      const std::size_t n = pts ? as_count(c, *pts, at(p, "points")).value_or(0) : 0;
      if (pts && c.clean_since(m0) && n == 0) c.error(at(p, "points"), "needs at least one point");
      const json* tb = member(c, j, p, "tables", true);
      std::vector<std::vector<std::size_t>> tables;
      if (tb && n > 0) {
        auto rows = as_list<std::vector<std::size_t>>(c, *tb, at(p, "tables"), counts);
        if (rows) {
          if (rows->empty()) c.error(at(p, "tables"), "needs at least one generator");
          for (std::size_t i = 0; i < rows->size(); ++i) {
            const auto& r = (*rows)[i];
            if (r.size() != n) c.error(at(at(p, "tables"), i), "needs one image per point");
            for (std::size_t x = 0; x < r.size(); ++x)
              if (r[x] >= n) c.error(at(at(at(p, "tables"), i), x), "image out of range");
          }
          tables = *rows;
        }
      }
      std::vector<double> dist;
      if (const json* d = member(c, j, p, "distance", false); d && n > 0) {
        auto rows = as_list<std::vector<double>>(c, *d, at(p, "distance"), numbers);
        if (rows) {
          if (rows->size() != n) c.error(at(p, "distance"), "needs an N x N matrix");
          for (std::size_t i = 0; i < rows->size(); ++i) {
            if ((*rows)[i].size() != n) c.error(at(at(p, "distance"), i), "needs N entries");
            for (double x : (*rows)[i]) dist.push_back(x);
          }
        }
      }
      if (!c.clean_since(m)) return nullptr;
      if (dist.empty()) return std::make_shared<FiniteSystem>(FiniteSystem::discrete(n, tables));
      return std::make_shared<FiniteSystem>(n, dist, tables);
    }
    if (kind == "circle" || kind == "interval") {
      check_keys(c, j, p, {"kind", "maps"});
      const json* ms = member(c, j, p, "maps", true);
      if (!ms) return nullptr;
      auto maps = as_list<IntervalMap>(c, *ms, at(p, "maps"), build_map);
      if (!maps) return nullptr;
      if (maps->empty()) {
        c.error(at(p, "maps"), "needs at least one map");
        return nullptr;
      }
      return std::make_shared<IntervalSystem>(kind == "circle" ? LineKind::circle : LineKind::interval, *maps);
    }
    if (kind == "torus") {
      check_keys(c, j, p, {"kind", "dimension", "matrices", "translations"});
      const json* dj = member(c, j, p, "dimension", true);
      const auto m0 = c.mark();
      const std::size_t d = dj ? as_count(c, *dj, at(p, "dimension")).value_or(0) : 0;
      if (dj && c.clean_since(m0) && d == 0) c.error(at(p, "dimension"), "must be positive");
      const json* mj = member(c, j, p, "matrices", true);
      std::vector<std::vector<std::int64_t>> mats;
      if (mj && d > 0) {
        if (!mj->is_array() || mj->empty()) {
          c.error(at(p, "matrices"), "expected a nonempty array of matrices");
        } else {
          for (std::size_t i = 0; i < mj->size(); ++i) {
            const std::string mp = at(at(p, "matrices"), i);
            auto rows = as_list<std::vector<std::int64_t>>(
                c, (*mj)[i], mp, [](Ctx& c2, const json& r, const std::string& rp) {
                  return as_list<std::int64_t>(c2, r, rp, as_int);
                });
            if (!rows) continue;
            std::vector<std::int64_t> flat;
            bool shape = rows->size() == d;
            for (const auto& r : *rows) {
              shape = shape && r.size() == d;
              flat.insert(flat.end(), r.begin(), r.end());
            }
            if (!shape) {
              c.error(mp, "expected " + std::to_string(d) + " integer rows of length " + std::to_string(d));
              continue;
            }
            if (integer_determinant(flat, d) == 0)
              c.error(mp, "determinant is 0: torus generators must be surjective endomorphisms");
            mats.push_back(std::move(flat));
          }
        }
      }
      std::vector<std::vector<double>> shifts;
      if (const json* tj = member(c, j, p, "translations", false); tj && d > 0) {
        auto t = as_list<std::vector<double>>(c, *tj, at(p, "translations"), reals);
        if (t) {
          if (t->size() != mats.size()) c.error(at(p, "translations"), "needs one translation per matrix");
          for (std::size_t i = 0; i < t->size(); ++i)
            if ((*t)[i].size() != d) c.error(at(at(p, "translations"), i), "needs one entry per dimension");
          shifts = *t;
        }
      }
      if (!c.clean_since(m)) return nullptr;
      return std::make_shared<TorusSystem>(d, mats, shifts);
    }
    if (kind == "full_shift") {
      check_keys(c, j, p, {"kind", "symbols", "radius", "generators"});
      const std::size_t k = count_or(c, j, p, "symbols", 2);
      if (k < 2) c.error(at(p, "symbols"), "needs at least two symbols");
      const json* rj = member(c, j, p, "radius", true);
      auto radius = rj ? as_count(c, *rj, at(p, "radius")) : std::nullopt;
      std::vector<ShiftGenerator> gens;
      const json* gj = member(c, j, p, "generators", false);
      if (!gj) {
        gens.push_back({});
      } else if (!gj->is_array() || gj->empty()) {
        c.error(at(p, "generators"), "expected a nonempty array");
      } else {
        for (std::size_t i = 0; i < gj->size(); ++i) {
          const std::string gp = at(at(p, "generators"), i);
          const json& g = (*gj)[i];
          if (!g.is_object()) {
            c.error(gp, "expected an object");
            continue;
          }
          check_keys(c, g, gp, {"shift", "permutation"});
          ShiftGenerator sg;
          if (const json* s = member(c, g, gp, "shift", false)) sg.shift = as_int(c, *s, at(gp, "shift")).value_or(1);
          if (const json* perm = member(c, g, gp, "permutation", false)) {
            auto v = counts(c, *perm, at(gp, "permutation"));
            if (v) {
              std::vector<std::size_t> sorted = *v;
              std::sort(sorted.begin(), sorted.end());
              bool ok = sorted.size() == k;
              for (std::size_t a = 0; ok && a < k; ++a) ok = sorted[a] == a;
              if (!ok) c.error(at(gp, "permutation"), "not a permutation of the symbols");
              sg.permutation = *v;
            }
          }
          gens.push_back(sg);
        }
      }
      if (!c.clean_since(m)) return nullptr;
      return std::make_shared<FullShiftSystem>(k, *radius, gens);
    }
    if (kind == "product") {
      check_keys(c, j, p, {"kind", "first", "second"});
      const json* a = member(c, j, p, "first", true);
      const json* b = member(c, j, p, "second", true);
      SystemPtr g1 = a ? build_system(c, *a, at(p, "first")) : nullptr;
      SystemPtr g2 = b ? build_system(c, *b, at(p, "second")) : nullptr;
      if (!g1 || !g2) return nullptr;
      return build_product(g1, g2);
    }
    c.error(at(p, "kind"), "unknown system kind '" + kind + "'");
  } catch (const Error& e) {
    c.error(p, e.what());
  }
  return nullptr;
}

bool needs_grid(const GeneratorSystem& s) {
  if (auto* pr = dynamic_cast<const ProductSystem*>(&s)) return needs_grid(*pr->first()) || needs_grid(*pr->second());
  return s.kind() == "circle" || s.kind() == "interval" || s.kind() == "torus";
}

bool on_torus(const GeneratorSystem& s) {
  if (auto* pr = dynamic_cast<const ProductSystem*>(&s)) return on_torus(*pr->first()) || on_torus(*pr->second());
  return s.kind() == "torus";
}

// ---------------------------------------------------------------- potentials

std::optional<Potential> build_potential(Ctx& c, const json& j, const std::string& p, const GeneratorSystem* s) {
  const std::string kind = kind_of(c, j, p);
  if (kind.empty()) return std::nullopt;
  const auto m = c.mark();
  auto values = [&](const char* key) {
    const json* v = member(c, j, p, key, true);
    return v ? reals(c, *v, at(p, key)) : std::nullopt;
  };
  auto sub = [&](const char* key, const GeneratorSystem* ss) -> std::optional<Potential> {
    const json* v = member(c, j, p, key, true);
    return v ? build_potential(c, *v, at(p, key), ss) : std::nullopt;
  };
  auto shift_only = [&] {
    if (s && !dynamic_cast<const FullShiftSystem*>(s)) c.error(at(p, "kind"), "'" + kind + "' needs a full shift");
  };
  const auto* shift = dynamic_cast<const FullShiftSystem*>(s);
  try {
    if (kind == "zero") return Potential();
    if (kind == "constant") {
      const json* v = member(c, j, p, "value", true);
      auto x = v ? as_number(c, *v, at(p, "value")) : std::nullopt;
      if (!x) return std::nullopt;
      return Potential::constant(*x);
    }
    if (kind == "coordinate" || kind == "trig") {
      const std::size_t idx = count_or(c, j, p, "index", 0);
      if (s && idx >= s->dimension()) c.error(at(p, "index"), "coordinate index out of range");
      if (kind == "coordinate") {
        const double scale = number_or(c, j, p, "scale", 1.0);
        if (!c.clean_since(m)) return std::nullopt;
        return Potential::coordinate(idx, scale);
      }
      std::vector<double> a, b;
      if (const json* v = member(c, j, p, "cos", false)) a = reals(c, *v, at(p, "cos")).value_or(a);
      if (const json* v = member(c, j, p, "sin", false)) b = reals(c, *v, at(p, "sin")).value_or(b);
      if (!c.clean_since(m)) return std::nullopt;
      return Potential::trig(idx, a, b);
    }
    if (kind == "table") {
      auto v = values("values");
      if (!v) return std::nullopt;
      if (s) {
        auto* f = dynamic_cast<const FiniteSystem*>(s);
        if (!f) c.error(at(p, "kind"), "'table' needs a finite system");
        else if (v->size() != f->point_count()) c.error(at(p, "values"), "needs one value per point");
      }
      if (!c.clean_since(m)) return std::nullopt;
      return Potential::table(*v);
    }
    if (kind == "symbol") {
      shift_only();
      const json* pos = member(c, j, p, "position", false);
      const std::int64_t position = pos ? as_int(c, *pos, at(p, "position")).value_or(0) : 0;
      auto v = values("values");
      if (v && shift && v->size() != shift->symbols()) c.error(at(p, "values"), "needs one value per symbol");
      if (!c.clean_since(m)) return std::nullopt;
      return Potential::symbol(position, *v);
    }
    if (kind == "block") {
      shift_only();
      const json* st = member(c, j, p, "start", false);
      const std::int64_t start = st ? as_int(c, *st, at(p, "start")).value_or(0) : 0;
      const std::size_t length = count_or(c, j, p, "length", 1);
      const std::size_t k = count_or(c, j, p, "symbols", shift ? shift->symbols() : 2);
      auto v = values("values");
      if (v && length < 16 && v->size() != static_cast<std::size_t>(std::pow(k, length)))
        c.error(at(p, "values"), "needs symbols^length values");
      if (!c.clean_since(m)) return std::nullopt;
      return Potential::block(start, length, k, *v);
    }
    if (kind == "window_sum") {
      shift_only();
      const double decay = number_or(c, j, p, "decay", 0.5);
      if (!c.clean_since(m)) return std::nullopt;
      return Potential::window_sum(decay);
    }
    if (kind == "sum") {
      const json* t = member(c, j, p, "terms", true);
      if (!t) return std::nullopt;
      auto terms = as_list<Potential>(c, *t, at(p, "terms"), [s](Ctx& c2, const json& x, const std::string& xp) {
        return build_potential(c2, x, xp, s);
      });
      if (!terms) return std::nullopt;
      Potential out;
      for (const auto& q : *terms) out = out + q;
      return out;
    }
    if (kind == "scale") {
      const json* f = member(c, j, p, "factor", true);
      auto factor = f ? as_number(c, *f, at(p, "factor")) : std::nullopt;
      auto inner = sub("potential", s);
      if (!factor || !inner) return std::nullopt;
      return *factor * *inner;
    }
    if (kind == "abs") {
      auto inner = sub("potential", s);
      if (!inner) return std::nullopt;
      return inner->abs();
    }
    if (kind == "product") {
      auto* pr = dynamic_cast<const ProductSystem*>(s);
      if (s && !pr) {
        c.error(at(p, "kind"), "'product' needs a product system");
        return std::nullopt;
      }
      auto a = sub("first", pr ? pr->first().get() : nullptr);
      auto b = sub("second", pr ? pr->second().get() : nullptr);
      if (!a || !b || !pr) return std::nullopt;
      return product_potential(*pr, *a, *b);
    }
    c.error(at(p, "kind"), "unknown potential kind '" + kind + "'");
  } catch (const Error& e) {
    c.error(p, e.what());
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- measures

std::optional<PointSet> build_points(Ctx& c, const json& j, const std::string& p, std::size_t dim) {
  if (!j.is_array() || j.empty()) {
    c.error(p, "expected a nonempty array of points");
    return std::nullopt;
  }
  PointSet out(dim);
  const auto m = c.mark();
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::vector<double> x;
    if (j[i].is_array()) x = reals(c, j[i], at(p, i)).value_or(x);
    else if (auto v = as_number(c, j[i], at(p, i))) x = {*v};
    if (x.size() != dim) {
      if (c.clean_since(m)) c.error(at(p, i), "expected " + std::to_string(dim) + " coordinates");
      continue;
    }
    out.push_back(x);
  }
  if (!c.clean_since(m)) return std::nullopt;
  return out;
}

std::optional<Measure> build_measure(Ctx& c, const json& j, const std::string& p, const GeneratorSystem* s) {
  const std::string kind = kind_of(c, j, p);
  if (kind.empty()) return std::nullopt;
  const auto m = c.mark();
  try {
    std::optional<Measure> mu;
    if (kind == "lebesgue" || kind == "haar") {
      mu = Measure{LebesgueHaar{}};
    } else if (kind == "bernoulli") {
      const json* v = member(c, j, p, "probabilities", true);
      auto pr = v ? reals(c, *v, at(p, "probabilities")) : std::nullopt;
      if (pr) mu = Measure{Bernoulli{*pr}};
    } else if (kind == "atomic" || kind == "empirical") {
      const json* v = member(c, j, p, "points", true);
      std::optional<PointSet> pts;
      if (v && s) pts = build_points(c, *v, at(p, "points"), s->dimension());
      if (kind == "empirical") {
        if (pts) mu = Measure{Empirical{*pts}};
      } else {
        const json* w = member(c, j, p, "weights", true);
        auto ws = w ? reals(c, *w, at(p, "weights")) : std::nullopt;
        if (pts && ws) {
          if (ws->size() != pts->size()) c.error(at(p, "weights"), "needs one weight per point");
          else mu = Measure{Atomic{*pts, *ws}};
        }
      }
    } else if (kind == "product") {
      auto* pr = dynamic_cast<const ProductSystem*>(s);
      if (s && !pr) {
        c.error(at(p, "kind"), "'product' needs a product system");
        return std::nullopt;
      }
      const json* a = member(c, j, p, "first", true);
      const json* b = member(c, j, p, "second", true);
      auto ma = a ? build_measure(c, *a, at(p, "first"), pr ? pr->first().get() : nullptr) : std::nullopt;
      auto mb = b ? build_measure(c, *b, at(p, "second"), pr ? pr->second().get() : nullptr) : std::nullopt;
      if (ma && mb) mu = Measure{ProductMeasure{std::make_shared<Measure>(*ma), std::make_shared<Measure>(*mb)}};
    } else {
      c.error(at(p, "kind"), "unknown measure kind '" + kind + "'");
    }
    if (!mu || !c.clean_since(m)) return std::nullopt;
    if (s) validate_measure(*s, *mu);
    return mu;
  } catch (const Error& e) {
    c.error(p, e.what());
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- partitions

std::optional<Partition> build_partition(Ctx& c, const json& j, const std::string& p, const GeneratorSystem* s) {
  const std::string kind = kind_of(c, j, p);
  if (kind.empty()) return std::nullopt;
  const auto m = c.mark();
  std::vector<std::size_t> labels;
  if (const json* l = member(c, j, p, "labels", false)) labels = counts(c, *l, at(p, "labels")).value_or(labels);
  try {
    std::optional<Partition> xi;
    if (kind == "labels") {
      if (!member(c, j, p, "labels", true)) return std::nullopt;
      xi = label_partition(labels);
    } else if (kind == "intervals") {
      const json* b = member(c, j, p, "breaks", true);
      auto bd = b ? reals(c, *b, at(p, "breaks")) : std::nullopt;
      if (bd && c.clean_since(m)) {
        auto be = exact_list(*b);
        xi = be ? interval_partition(*be, labels) : interval_partition(*bd, labels);
      }
    } else if (kind == "dyadic") {
      const std::size_t level = count_or(c, j, p, "level", 1);
      if (level > 40) c.error(at(p, "level"), "level too large");
      else xi = dyadic_partition(level);
    } else if (kind == "cylinder") {
      const json* ps = member(c, j, p, "positions", true);
      auto pos = ps ? as_list<std::int64_t>(c, *ps, at(p, "positions"), as_int) : std::nullopt;
      const auto* sh = dynamic_cast<const FullShiftSystem*>(s);
      const std::size_t k = count_or(c, j, p, "symbols", sh ? sh->symbols() : 2);
      if (pos && c.clean_since(m)) {
        xi = cylinder_partition(*pos, k);
        if (!labels.empty()) std::get<CylinderPartition>(xi->v).labels = labels;
      }
    } else if (kind == "singleton") {
      const auto* f = dynamic_cast<const FiniteSystem*>(s);
      if (s && !f) c.error(at(p, "kind"), "'singleton' needs a finite system");
      else if (f) xi = singleton_partition(f->point_count());
    } else if (kind == "trivial") {
      if (s) xi = trivial_partition(*s);
    } else if (kind == "product") {
      auto* pr = dynamic_cast<const ProductSystem*>(s);
      if (s && !pr) {
        c.error(at(p, "kind"), "'product' needs a product system");
        return std::nullopt;
      }
      const json* a = member(c, j, p, "first", true);
      const json* b = member(c, j, p, "second", true);
      auto xa = a ? build_partition(c, *a, at(p, "first"), pr ? pr->first().get() : nullptr) : std::nullopt;
      auto xb = b ? build_partition(c, *b, at(p, "second"), pr ? pr->second().get() : nullptr) : std::nullopt;
      if (xa && xb) xi = product_partition(*xa, *xb);
    } else {
      c.error(at(p, "kind"), "unknown partition kind '" + kind + "'");
    }
    if (!xi || !c.clean_since(m)) return std::nullopt;
    if (const json* id = member(c, j, p, "id", false)) {
      if (auto v = as_string(c, *id, at(p, "id"))) xi->id = *v;
    }
    if (s) validate_partition(*s, *xi);
    return xi;
  } catch (const Error& e) {
    c.error(p, e.what());
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- document

const json& defaults_doc() {
  static const json d = json::parse(R"({
    "output": "fsdyn-out",
    "potential": {"kind": "zero"},
    "partitions": [],
    "estimator": {
      "words": {"mode": "exhaustive", "samples": 1000, "budget": 1000000},
      "search": "greedy",
      "exact_limit": 20,
      "resolution": 0,
      "quantities": ["spanning", "separated"],
      "ball_samples": 1000000,
      "ball_max_samples": 10000000,
      "invariance_tolerance": 1e-6,
      "defect_samples": 1000000
    },
    "skew": {"c": 0.0, "tolerance": 0.1, "checks": ["lower", "upper", "relation"]},
    "verify": {
      "psi": {"kind": "zero"},
      "c": 0.5,
      "tolerance": 1e-9,
      "measure_expectation": "invariant",
      "defect_tolerance": 1e-3,
      "variational_tolerance": 0.05,
      "affine_tolerance": 0.15,
      "integral_samples": 1000000
    }
  })");
  return d;
}

const json& unwrap(const json& config) {
  if (config.is_object() && config.contains("fsdyn_manifest") && config.contains("config")) return config["config"];
  return config;
}

const std::set<std::string> kCommands{"pressure", "entropy", "skew", "affine", "verify-suite"};

// Builds everything it can, recording every problem on the way.
Experiment assemble(Ctx& c, const json& config, std::size_t threads) {
  Experiment x;
  const json& doc = unwrap(config);
  if (!doc.is_object()) {
    c.error("", "the config must be a JSON object");
    return x;
  }
  json r = resolve(config);
  check_keys(c, doc, "", {"command", "seed", "output", "system", "potential", "measure", "partitions", "estimator",
                          "skew", "verify", "description"});

  if (const json* cmd = member(c, r, "", "command", true)) {
    if (auto v = as_string(c, *cmd, "/command")) {
      if (!kCommands.count(*v)) c.error("/command", "unknown command '" + *v + "'");
      else x.command = *v;
    }
  }
  if (auto v = as_string(c, r["output"], "/output")) x.output = *v;

  if (const json* sj = member(c, r, "", "system", true)) x.system = build_system(c, *sj, "/system");
  const GeneratorSystem* s = x.system.get();
  x.potential = build_potential(c, r["potential"], "/potential", s).value_or(Potential());
  if (const json* mj = member(c, r, "", "measure", false)) x.measure = build_measure(c, *mj, "/measure", s);
  if (!r["partitions"].is_array()) {
    c.error("/partitions", "expected an array");
  } else {
    for (std::size_t i = 0; i < r["partitions"].size(); ++i)
      if (auto xi = build_partition(c, r["partitions"][i], at("/partitions", i), s)) x.partitions.push_back(*xi);
  }

  // estimator
  const json& e = r["estimator"];
  const std::string ep = "/estimator";
  check_keys(c, e, ep, {"epsilons", "horizons", "words", "search", "exact_limit", "resolution", "quantities",
                        "ball_samples", "ball_max_samples", "invariance_tolerance", "defect_samples"});
  std::vector<double> eps;
  std::vector<std::size_t> horizons;
  const bool needs_eps = x.command != "entropy";
  if (const json* v = member(c, e, ep, "epsilons", needs_eps && !x.command.empty())) {
    if (auto l = numbers(c, *v, at(ep, "epsilons"))) {
      eps = *l;
      if (eps.empty() && needs_eps) c.error(at(ep, "epsilons"), "needs at least one epsilon");
      for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0)) c.error(at(at(ep, "epsilons"), i), "epsilon must be positive");
        else if (i && !(eps[i] < eps[i - 1]))
          c.error(at(at(ep, "epsilons"), i), "the epsilon schedule must be strictly decreasing");
      }
    }
  }
  if (const json* v = member(c, e, ep, "horizons", true)) {
    if (auto l = counts(c, *v, at(ep, "horizons"))) {
      horizons = *l;
      if (horizons.empty()) c.error(at(ep, "horizons"), "needs at least one horizon");
      for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] == 0) c.error(at(at(ep, "horizons"), i), "horizons must be positive");
        else if (i && horizons[i] <= horizons[i - 1])
          c.error(at(at(ep, "horizons"), i), "horizons must be strictly increasing");
      }
    }
  }
  WordStrategy ws;
  const json& wj = e["words"];
  const std::string wp = at(ep, "words");
  if (!wj.is_object()) {
    c.error(wp, "expected an object");
  } else {
    check_keys(c, wj, wp, {"mode", "samples", "budget"});
    if (auto mode = as_string(c, wj["mode"], at(wp, "mode"))) {
      if (*mode == "montecarlo") ws.mode = WordStrategy::Mode::montecarlo;
      else if (*mode != "exhaustive") c.error(at(wp, "mode"), "expected 'exhaustive' or 'montecarlo'");
    }
    ws.sample_count = count_or(c, wj, wp, "samples", 1000);
    ws.budget = count_or(c, wj, wp, "budget", 1'000'000);
    if (ws.mode == WordStrategy::Mode::montecarlo && ws.sample_count == 0)
      c.error(at(wp, "samples"), "montecarlo needs a positive sample count");
  }
  SearchMode mode = SearchMode::greedy;
  if (auto v = as_string(c, e["search"], at(ep, "search"))) {
    if (*v == "exact") mode = SearchMode::exact;
    else if (*v != "greedy") c.error(at(ep, "search"), "expected 'exact' or 'greedy'");
  }
  SearchOptions so;
  so.exact_limit = count_or(c, e, ep, "exact_limit", 20);
  const std::size_t resolution = count_or(c, e, ep, "resolution", 0);
  bool spanning = false, separated = false;
  if (auto q = as_list<std::string>(c, e["quantities"], at(ep, "quantities"), as_string)) {
    for (std::size_t i = 0; i < q->size(); ++i) {
      if ((*q)[i] == "spanning") spanning = true;
      else if ((*q)[i] == "separated") separated = true;
      else c.error(at(at(ep, "quantities"), i), "expected 'spanning' or 'separated'");
    }
    if (q->empty()) c.error(at(ep, "quantities"), "needs at least one quantity");
  }

  // seeds
  const bool montecarlo = ws.mode == WordStrategy::Mode::montecarlo;
  const bool torus = s && on_torus(*s);
  const bool mc_measure = torus && x.measure && (x.command == "entropy" || x.command == "verify-suite");
  const bool needs_seed = montecarlo || x.command == "affine" || (x.command == "verify-suite" && torus) || mc_measure;
  std::uint64_t seed = 0;
  if (doc.contains("seed") && !doc["seed"].is_null()) {
    if (auto v = as_count(c, doc["seed"], "/seed")) seed = *v;
  } else if (needs_seed) {
    std::string why = montecarlo ? "montecarlo word sampling" : "Monte Carlo evaluation on the torus";
    c.error("/seed", "a seed is required for " + why);
  }
  r["seed"] = seed;
  x.seeds = derive_seeds(seed);
  ws.seed = x.seeds.words;

  // command requirements
  if (s && !x.command.empty()) {
    const std::size_t m = s->generator_count();
    if (x.command != "entropy" && needs_grid(*s) && resolution == 0 && x.command != "affine" &&
        !(x.command == "verify-suite" && torus))
      c.error(at(ep, "resolution"), "continuous spaces need a grid resolution");
    if (x.command == "entropy") {
      if (!x.measure && !doc.contains("measure")) c.error("/measure", "entropy runs need a measure");
      if (r["partitions"].is_array() && r["partitions"].empty())
        c.error("/partitions", "entropy runs need at least one partition");
    }
    if (x.command == "affine" && s->kind() != "torus") c.error("/system/kind", "affine runs need a torus system");
    if (x.command == "skew" && horizons.size() < 2) c.error(at(ep, "horizons"), "skew runs need two horizons");
    if (x.command == "skew" || (x.command == "verify-suite" && s->kind() == "finite"))
      for (std::size_t i = 0; i < eps.size(); ++i)
        if (eps[i] >= 0.5) c.error(at(at(ep, "epsilons"), i), "skew checks need epsilon below 1/2");
    if (!montecarlo && !horizons.empty()) {
      // the first letter never matters for entropy
      const std::size_t n = horizons.back() - (x.command == "entropy" ? 1 : 0);
      const std::uint64_t words = word_count(m, n);
      if (words > ws.budget)
        c.error(at(ep, "horizons"), std::to_string(m) + "^" + std::to_string(n) + " words exceed the budget of " +
                                        std::to_string(ws.budget) + "; use montecarlo words or raise the budget");
    }
  }

  // skew section
  const json& sk = r["skew"];
  check_keys(c, sk, "/skew", {"c", "tolerance", "checks"});
  x.skew_c = number_or(c, sk, "/skew", "c", 0.0);
  x.skew_tolerance = number_or(c, sk, "/skew", "tolerance", 0.1);
  if (auto l = as_list<std::string>(c, sk["checks"], "/skew/checks", as_string)) {
    for (std::size_t i = 0; i < l->size(); ++i) {
      const auto& k = (*l)[i];
      if (k != "lower" && k != "upper" && k != "relation")
        c.error(at("/skew/checks", i), "expected 'lower', 'upper' or 'relation'");
    }
    x.skew_checks = *l;
  }

  // verify section
  const json& vj = r["verify"];
  const std::string vp = "/verify";
  check_keys(c, vj, vp, {"psi", "c", "tolerance", "measure_expectation", "defect_tolerance",
                         "variational_tolerance", "affine_tolerance", "integral_samples"});
  x.psi = build_potential(c, vj["psi"], at(vp, "psi"), s).value_or(Potential());
  x.verify_c = number_or(c, vj, vp, "c", 0.5);
  x.verify_tolerance = number_or(c, vj, vp, "tolerance", 1e-9);
  if (auto v = as_string(c, vj["measure_expectation"], at(vp, "measure_expectation"))) {
    if (*v == "noninvariant") x.expect_invariant = false;
    else if (*v != "invariant") c.error(at(vp, "measure_expectation"), "expected 'invariant' or 'noninvariant'");
    if (!x.expect_invariant && x.command == "verify-suite" && (!x.measure || x.partitions.empty()))
      c.error(at(vp, "measure_expectation"), "a noninvariant check needs a measure and a partition");
  }
  x.defect_tolerance = number_or(c, vj, vp, "defect_tolerance", 1e-3);
  x.variational_tolerance = number_or(c, vj, vp, "variational_tolerance", 0.05);
  x.affine_tolerance = number_or(c, vj, vp, "affine_tolerance", 0.15);
  x.integral_samples = count_or(c, vj, vp, "integral_samples", 1'000'000);

  x.pressure.epsilons = eps;
  x.pressure.horizons = horizons;
  x.pressure.strategy = ws;
  x.pressure.resolution = resolution;
  x.pressure.mode = mode;
  x.pressure.spanning = spanning;
  x.pressure.separated = separated;
  x.pressure.threads = threads;
  x.pressure.search = so;

  x.entropy.horizons = horizons;
  x.entropy.strategy = ws;
  x.entropy.threads = threads;
  x.entropy.invariance_tolerance = number_or(c, e, ep, "invariance_tolerance", 1e-6);
  x.entropy.defect_samples = count_or(c, e, ep, "defect_samples", 1'000'000);
  x.entropy.defect_seed = x.seeds.defect;

  x.affine.eps = eps;
  x.affine.horizons = horizons;
  x.affine.strategy = ws;
  x.affine.sample_count = count_or(c, e, ep, "ball_samples", 1'000'000);
  x.affine.max_samples = count_or(c, e, ep, "ball_max_samples", 10'000'000);
  x.affine.seed = x.seeds.balls;
  x.affine.threads = threads;
  if (x.affine.max_samples == 0) c.error(at(ep, "ball_max_samples"), "must be positive");

  x.resolved = std::move(r);
  return x;
}

}  // namespace

std::string format(const Diagnostic& d) { return (d.path.empty() ? "/" : d.path) + ": " + d.message; }

ConfigError::ConfigError(std::vector<Diagnostic> d)
    : Error(d.empty() ? "invalid config" : format(d.front())), diagnostics(std::move(d)) {}

Seeds derive_seeds(std::uint64_t run) {
  Seeds s;
  s.run = run;
  s.words = derive_seed(run, 1);
  s.balls = derive_seed(run, 2);
  s.defect = derive_seed(run, 3);
  s.integral = derive_seed(run, 4);
  return s;
}

json resolve(const json& config) {
  const json& doc = unwrap(config);
  json r = defaults_doc();
  if (!doc.is_object()) return r;
  // objects merge one level deep so that partial sections keep their defaults
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.value().is_object() && r.contains(it.key()) && r[it.key()].is_object() &&
        (it.key() == "estimator" || it.key() == "skew" || it.key() == "verify")) {
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        if (jt.key() == "words" && jt.value().is_object())
          for (auto kt = jt.value().begin(); kt != jt.value().end(); ++kt) r[it.key()]["words"][kt.key()] = kt.value();
        else
          r[it.key()][jt.key()] = jt.value();
      }
    } else {
      r[it.key()] = it.value();
    }
  }
  return r;
}

std::vector<Diagnostic> validate(const json& config) {
  Ctx c;
  assemble(c, config, 1);
  return c.diags;
}

Experiment build(const json& config, std::size_t threads) {
  Ctx c;
  Experiment x = assemble(c, config, std::max<std::size_t>(1, threads));
  if (!c.diags.empty()) throw ConfigError(c.diags);
  return x;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"", "cannot open " + path}});
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError({{"", path + ": " + e.what()}});
  }
}

}  // namespace fsdyn::cli
