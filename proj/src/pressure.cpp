#include "fsdyn/pressure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "fsdyn/bowen_index.hpp"
#include "fsdyn/error.hpp"
#include "fsdyn/parallel.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

namespace {

void check_problem(const GeneratorSystem& s, const Word& w, double eps, const PointSet& c) {
  if (w.empty()) throw DataError("dynamics words must be nonempty");
  for (Letter a : w.letters())
    if (a >= s.generator_count()) throw DataError("letter outside the generator range");
  if (!(eps > 0)) throw DataError("epsilon must be positive");
  if (c.empty()) throw DataError("candidate set is empty");
  if (c.dimension() != s.dimension()) throw DataError("candidate dimension does not match the system");
  if (c.size() >= 0xffffffffu) throw BudgetError("too many candidates");
}

// Orbits, Birkhoff sums and cell keys of every candidate for one word.
struct Workspace {
  const GeneratorSystem& s;
  double eps;
  std::size_t n, d, m, kw;
  std::vector<double> orbit;
  std::vector<double> sums;
  std::vector<std::int64_t> keys;
  BowenIndex index;

  Workspace(const GeneratorSystem& sys, const Potential& phi, const Word& w, double e,
            const PointSet& c)
      : s(sys), eps(e), n(w.size()), d(sys.dimension()), m(c.size()), kw(0), index(sys, e, w.size()) {
    kw = index.key_width();
    orbit.resize(m * n * d);
    sums.resize(m);
    keys.resize(m * n * kw);
    for (std::size_t i = 0; i < m; ++i) {
      double* o = &orbit[i * n * d];
      evaluation_orbit_into(s, w, c[i], o);
      double total = 0;
      for (std::size_t k = 0; k < n; ++k) total += phi({o + k * d, d});
      sums[i] = total;
      if (kw) index.compute_keys(o, &keys[i * n * kw]);
    }
  }

  const std::int64_t* key(std::size_t i) const { return kw ? &keys[i * n * kw] : nullptr; }

  // d_w(i, j) < eps; late orbit points separate first under expansion.
  bool close(std::size_t i, std::size_t j) const {
    const double* a = &orbit[i * n * d];
    const double* b = &orbit[j * n * d];
    for (std::size_t k = n; k-- > 0;)
      if (s.distance({a + k * d, d}, {b + k * d, d}) >= eps) return false;
    return true;
  }

  // Symmetric adjacency of the conflict graph {d_w < eps} (no self loops).
  std::vector<std::vector<std::uint32_t>> conflict_graph() {
    for (std::size_t i = 0; i < m; ++i) index.insert(static_cast<std::uint32_t>(i), key(i));
    std::vector<std::vector<std::uint32_t>> adj(m);
    for (std::size_t i = 0; i < m; ++i) {
      index.find(key(i), [&](std::uint32_t j) {
        if (j != i && close(i, j)) adj[i].push_back(j);
        return false;
      });
      std::sort(adj[i].begin(), adj[i].end());
    }
    return adj;
  }
};

double ascending_weight(const std::vector<double>& sums, std::vector<std::size_t>& witness) {
  std::sort(witness.begin(), witness.end());
  double total = 0;
  for (std::size_t i : witness) total += std::exp(sums[i]);
  return total;
}

std::vector<std::vector<std::uint32_t>> components(const std::vector<std::vector<std::uint32_t>>& adj) {
  const std::size_t m = adj.size();
  std::vector<char> seen(m, 0);
  std::vector<std::vector<std::uint32_t>> comps;
  for (std::size_t s = 0; s < m; ++s) {
    if (seen[s]) continue;
    std::vector<std::uint32_t> comp{static_cast<std::uint32_t>(s)};
    seen[s] = 1;
    for (std::size_t h = 0; h < comp.size(); ++h)
      for (std::uint32_t v : adj[comp[h]])
        if (!seen[v]) {
          seen[v] = 1;
          comp.push_back(v);
        }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

// Local closed-neighbourhood masks of a component.
std::vector<std::uint32_t> local_masks(const std::vector<std::uint32_t>& comp,
                                       const std::vector<std::vector<std::uint32_t>>& adj, bool closed) {
  std::map<std::uint32_t, std::size_t> pos;
  for (std::size_t a = 0; a < comp.size(); ++a) pos[comp[a]] = a;
  std::vector<std::uint32_t> nb(comp.size(), 0);
  for (std::size_t a = 0; a < comp.size(); ++a) {
    if (closed) nb[a] |= 1u << a;
    for (std::uint32_t v : adj[comp[a]]) nb[a] |= 1u << pos.at(v);
  }
  return nb;
}

// Exact mode searches all candidates at once when there are few enough,
// otherwise each conflict component separately.
std::vector<std::vector<std::uint32_t>> exact_groups(const std::vector<std::vector<std::uint32_t>>& adj,
                                                     const SearchOptions& opt) {
  if (adj.size() <= opt.exact_limit && adj.size() <= 24) {
    std::vector<std::uint32_t> all(adj.size());
    std::iota(all.begin(), all.end(), 0u);
    return {all};
  }
  return components(adj);
}

void check_component(std::size_t size, const SearchOptions& opt) {
  if (size > opt.exact_limit || size > 24)
    throw BudgetError("exact search: a conflict component has " + std::to_string(size) +
                      " candidates (limit " + std::to_string(opt.exact_limit) + "); use greedy mode");
}

}  // namespace

SetResult max_separated(const GeneratorSystem& s, const Potential& phi, const Word& w, double eps,
                        const PointSet& candidates, SearchMode mode, const SearchOptions& opt) {
  check_problem(s, w, eps, candidates);
  Workspace ws(s, phi, w, eps, candidates);
  SetResult res;

  if (mode == SearchMode::greedy) {
    std::vector<std::size_t> order(ws.m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ws.sums[a] > ws.sums[b]; });
    std::size_t last = ws.m;  // most recent blocker
    for (std::size_t i : order) {
      if (last < ws.m && ws.close(i, last)) continue;
      bool blocked = ws.index.find(ws.key(i), [&](std::uint32_t j) {
        if (ws.close(i, j)) {
          last = j;
          return true;
        }
        return false;
      });
      if (blocked) continue;
      ws.index.insert(static_cast<std::uint32_t>(i), ws.key(i));
      res.witness.push_back(i);
    }
    res.weight = ascending_weight(ws.sums, res.witness);
    return res;
  }

  auto adj = ws.conflict_graph();
  std::vector<char> indep;
  std::vector<double> wsum;
  for (const auto& comp : exact_groups(adj, opt)) {
    check_component(comp.size(), opt);
    if (comp.size() == 1) {
      res.witness.push_back(comp[0]);
      continue;
    }
    auto nb = local_masks(comp, adj, false);
    const std::size_t k = comp.size(), full = std::size_t{1} << k;
    indep.assign(full, 0);
    wsum.assign(full, 0.0);
    indep[0] = 1;
    std::size_t best = 0;
    for (std::size_t mask = 1; mask < full; ++mask) {
      const auto top = static_cast<std::size_t>(std::bit_width(mask) - 1);
      const std::size_t rest = mask ^ (std::size_t{1} << top);
      indep[mask] = indep[rest] && !(nb[top] & rest);
      wsum[mask] = wsum[rest] + std::exp(ws.sums[comp[top]]);
      if (indep[mask] && wsum[mask] > wsum[best]) best = mask;
    }
    for (std::size_t a = 0; a < k; ++a)
      if (best >> a & 1) res.witness.push_back(comp[a]);
  }
  res.weight = ascending_weight(ws.sums, res.witness);
  return res;
}

SetResult min_spanning(const GeneratorSystem& s, const Potential& phi, const Word& w, double eps,
                       const PointSet& candidates, SearchMode mode, const SearchOptions& opt,
                       const PointSet* universe) {
  check_problem(s, w, eps, candidates);
  Workspace ws(s, phi, w, eps, candidates);
  SetResult res;

  // covers[c] = universe elements within d_w < eps of candidate c.
  std::vector<std::vector<std::uint32_t>> covers;
  std::size_t usize;
  if (!universe) {
    auto adj = ws.conflict_graph();
    if (mode == SearchMode::exact) {
      for (const auto& comp : exact_groups(adj, opt)) {
        check_component(comp.size(), opt);
        auto nb = local_masks(comp, adj, true);
        const std::size_t k = comp.size(), full = std::size_t{1} << k;
        const std::uint32_t all = static_cast<std::uint32_t>(full - 1);
        std::vector<std::uint32_t> cover(full, 0);
        std::vector<double> wsum(full, 0.0);
        std::size_t best = full - 1;
        double best_w = std::numeric_limits<double>::infinity();
        for (std::size_t mask = 1; mask < full; ++mask) {
          const auto top = static_cast<std::size_t>(std::bit_width(mask) - 1);
          const std::size_t rest = mask ^ (std::size_t{1} << top);
          cover[mask] = cover[rest] | nb[top];
          wsum[mask] = wsum[rest] + std::exp(ws.sums[comp[top]]);
          if (cover[mask] == all && wsum[mask] < best_w) {
            best_w = wsum[mask];
            best = mask;
          }
        }
        for (std::size_t a = 0; a < k; ++a)
          if (best >> a & 1) res.witness.push_back(comp[a]);
      }
      res.weight = ascending_weight(ws.sums, res.witness);
      return res;
    }
    covers.resize(ws.m);
    for (std::size_t i = 0; i < ws.m; ++i) {
      covers[i] = adj[i];
      covers[i].insert(std::lower_bound(covers[i].begin(), covers[i].end(), static_cast<std::uint32_t>(i)),
                       static_cast<std::uint32_t>(i));
    }
    usize = ws.m;
  } else {
    if (universe->empty() || universe->dimension() != s.dimension())
      throw DataError("universe must be a nonempty point set of the system's dimension");
    Workspace wu(s, phi, w, eps, *universe);
    for (std::size_t c = 0; c < ws.m; ++c) ws.index.insert(static_cast<std::uint32_t>(c), ws.key(c));
    covers.resize(ws.m);
    usize = wu.m;
    for (std::size_t u = 0; u < wu.m; ++u) {
      bool any = false;
      ws.index.find(wu.key(u), [&](std::uint32_t c) {
        const double* a = &wu.orbit[u * wu.n * wu.d];
        const double* b = &ws.orbit[c * ws.n * ws.d];
        for (std::size_t k = 0; k < ws.n; ++k)
          if (s.distance({a + k * ws.d, ws.d}, {b + k * ws.d, ws.d}) >= eps) return false;
        covers[c].push_back(static_cast<std::uint32_t>(u));
        any = true;
        return false;
      });
      if (!any)
        throw InfeasibleError("candidates do not span the universe: universe point " + std::to_string(u) +
                              " is not within d_w < eps of any candidate");
    }
    if (mode == SearchMode::exact) {
      if (ws.m > opt.exact_limit || usize > 64)
        throw BudgetError("exact spanning over an explicit universe needs <= " +
                          std::to_string(opt.exact_limit) + " candidates and <= 64 universe points");
      std::vector<std::uint64_t> cm(ws.m, 0);
      for (std::size_t c = 0; c < ws.m; ++c)
        for (std::uint32_t u : covers[c]) cm[c] |= std::uint64_t{1} << u;
      const std::uint64_t all = usize == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << usize) - 1;
      const std::size_t full = std::size_t{1} << ws.m;
      std::vector<std::uint64_t> cover(full, 0);
      std::vector<double> wsum(full, 0.0);
      std::size_t best = 0;
      double best_w = std::numeric_limits<double>::infinity();
      for (std::size_t mask = 1; mask < full; ++mask) {
        const auto top = static_cast<std::size_t>(std::bit_width(mask) - 1);
        const std::size_t rest = mask ^ (std::size_t{1} << top);
        cover[mask] = cover[rest] | cm[top];
        wsum[mask] = wsum[rest] + std::exp(ws.sums[top]);
        if (cover[mask] == all && wsum[mask] < best_w) {
          best_w = wsum[mask];
          best = mask;
        }
      }
      for (std::size_t a = 0; a < ws.m; ++a)
        if (best >> a & 1) res.witness.push_back(a);
      res.weight = ascending_weight(ws.sums, res.witness);
      return res;
    }
  }

  // Weighted greedy set cover with lazy gains: repeatedly take the candidate
  // with the least weight per newly covered element.
  std::vector<char> covered(usize, 0);
  std::vector<std::size_t> gain(ws.m);
  for (std::size_t c = 0; c < ws.m; ++c) gain[c] = covers[c].size();
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (std::size_t c = 0; c < ws.m; ++c)
    if (gain[c]) heap.push({std::exp(ws.sums[c]) / static_cast<double>(gain[c]), c});
  std::size_t left = usize;
  while (left > 0 && !heap.empty()) {
    auto [ratio, c] = heap.top();
    heap.pop();
    std::size_t g = 0;
    for (std::uint32_t u : covers[c]) g += !covered[u];
    if (g == 0) continue;
    double r = std::exp(ws.sums[c]) / static_cast<double>(g);
    if (g != gain[c]) {
      gain[c] = g;
      if (!heap.empty() && Item{r, c} > heap.top()) {
        heap.push({r, c});
        continue;
      }
    }
    res.witness.push_back(c);
    for (std::uint32_t u : covers[c])
      if (!covered[u]) {
        covered[u] = 1;
        --left;
      }
  }
  if (left > 0) throw InfeasibleError("candidates do not span the universe");
  res.weight = ascending_weight(ws.sums, res.witness);
  return res;
}

bool spans(const GeneratorSystem& s, const Word& w, double eps, const PointSet& candidates,
           const std::vector<std::size_t>& witness) {
  Workspace ws(s, Potential(), w, eps, candidates);
  for (std::size_t i : witness) ws.index.insert(static_cast<std::uint32_t>(i), ws.key(i));
  for (std::size_t i = 0; i < ws.m; ++i) {
    bool hit = ws.index.find(ws.key(i), [&](std::uint32_t j) { return ws.close(i, j); });
    if (!hit) return false;
  }
  return true;
}

WordAverage average_over_words(const GeneratorSystem& s, const Potential& phi, std::size_t n,
                               double eps, const WordStrategy& strategy, Quantity q,
                               const PointSet& candidates, SearchMode mode, std::size_t threads,
                               const SearchOptions& opt) {
  const std::size_t m = s.generator_count();
  const std::uint64_t count = strategy_word_count(strategy, m, n);
  WordAverage avg;
  avg.words = count;
  avg.per_word.assign(count, 0.0);
  parallel_for(count, threads, [&](std::size_t i) {
    Word w = strategy_word(strategy, m, n, i);
    avg.per_word[i] = q == Quantity::separated ? max_separated(s, phi, w, eps, candidates, mode, opt).weight
                                               : min_spanning(s, phi, w, eps, candidates, mode, opt).weight;
  });
  double sum = 0;
  for (double v : avg.per_word) sum += v;
  avg.value = sum / static_cast<double>(count);
  if (strategy.mode == WordStrategy::Mode::montecarlo && count > 1) {
    double ss = 0;
    for (double v : avg.per_word) ss += (v - avg.value) * (v - avg.value);
    avg.stderr_ = std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count));
  }
  return avg;
}

// ---------------------------------------------------------------- skew products

BlockTotal skew_block_total(const SkewProductSystem& F, const Potential& g, std::size_t n, double eps,
                            const WordStrategy& strategy, Quantity q, const PointSet& fiber_candidates,
                            SearchMode mode, std::size_t threads, const SearchOptions& opt) {
  if (n == 0) throw DataError("horizon must be positive");
  if (!(eps > 0 && eps <= 1)) throw DataError("skew block decomposition needs 0 < eps <= 1");
  const std::int64_t J = shift_resolution(eps);
  const auto L = static_cast<std::int64_t>(F.radius());
  const auto hi = static_cast<std::int64_t>(n) - 1 + J;
  if (hi > L || J > L)
    throw DataError("skew window radius " + std::to_string(L) + " is too small for n=" + std::to_string(n));
  if (fiber_candidates.dimension() != F.fiber()->dimension())
    throw DataError("fiber candidates do not match the fiber dimension");
  const std::size_t m = F.base_symbols();
  const auto len = static_cast<std::size_t>(hi + J + 1);
  const std::uint64_t all = word_count(m, len);
  BlockTotal out;
  out.sampled = !(strategy.mode == WordStrategy::Mode::exhaustive && all <= strategy.budget);
  out.blocks = out.sampled ? strategy.sample_count : all;
  if (out.blocks == 0) throw DataError("block sample count must be positive");
  out.per_block.assign(out.blocks, 0.0);
  const Word word(1, std::vector<Letter>(n, 0));
  const std::size_t bd = F.base_dimension();

  parallel_for(out.blocks, threads, [&](std::size_t b) {
    Point window(bd, 0.0);
    std::uint64_t code = b;
    for (std::int64_t p = hi; p >= -J; --p) {
      std::uint64_t sym;
      if (out.sampled) {
        sym = to_range(counter_draw(strategy.seed, b, static_cast<std::uint64_t>(p + J)), m);
      } else {
        sym = code % m;
        code /= m;
      }
      window[static_cast<std::size_t>(p + L)] = static_cast<double>(sym);
    }
    PointSet cands(F.dimension());
    for (std::size_t i = 0; i < fiber_candidates.size(); ++i) cands.push_back(F.make_point(window, fiber_candidates[i]));
    out.per_block[b] = q == Quantity::separated ? max_separated(F, g, word, eps, cands, mode, opt).weight
                                                : min_spanning(F, g, word, eps, cands, mode, opt).weight;
  });

  double sum = 0;
  for (double v : out.per_block) sum += v;
  if (!out.sampled) {
    out.log_value = std::log(sum);
  } else {
    const double nb = static_cast<double>(out.blocks), mean = sum / nb;
    out.log_value = std::log(mean) + static_cast<double>(len) * std::log(static_cast<double>(m));
    if (out.blocks > 1) {
      double ss = 0;
      for (double v : out.per_block) ss += (v - mean) * (v - mean);
      out.stderr_log = std::sqrt(ss / (nb - 1) / nb) / mean;
    }
  }
  return out;
}

// ---------------------------------------------------------------- estimation

void validate_params(const GeneratorSystem& s, const EstimatorParams& p) {
  if (p.epsilons.empty()) throw DataError("epsilon schedule is empty");
  for (std::size_t i = 0; i < p.epsilons.size(); ++i) {
    if (!(p.epsilons[i] > 0)) throw DataError("epsilons must be positive");
    if (i && !(p.epsilons[i] < p.epsilons[i - 1])) throw DataError("epsilons must be strictly decreasing");
  }
  if (p.horizons.empty()) throw DataError("horizon list is empty");
  for (std::size_t i = 0; i < p.horizons.size(); ++i) {
    if (p.horizons[i] == 0) throw DataError("horizons must be positive");
    if (i && p.horizons[i] <= p.horizons[i - 1]) throw DataError("horizons must be strictly increasing");
  }
  if (!p.spanning && !p.separated) throw DataError("nothing to compute: enable spanning or separated");
  if (p.strategy.mode == WordStrategy::Mode::montecarlo && p.strategy.sample_count == 0)
    throw DataError("montecarlo needs a positive sample count");
  if (!p.candidates) {
    const double h = grid_spacing(s, std::max<std::size_t>(p.resolution, 2));
    const bool needs_grid = h > 0;
    if (needs_grid && p.resolution < 2) throw DataError("continuous spaces need a grid resolution");
    if (needs_grid && !(h < p.epsilons.back() / 4))
      throw DataError("grid spacing " + std::to_string(h) + " is not below eps/4 for the smallest eps " +
                      std::to_string(p.epsilons.back()));
  }
}

double two_horizon_slope(const std::vector<std::size_t>& n, const std::vector<double>& y) {
  const std::size_t k = n.size();
  if (k == 0) return std::numeric_limits<double>::quiet_NaN();
  if (k == 1) return y[0] / static_cast<double>(n[0]);
  return (y[k - 1] - y[k - 2]) / static_cast<double>(n[k - 1] - n[k - 2]);
}

PressureReport pressure_estimate(const GeneratorSystem& s, const Potential& phi,
                                 const EstimatorParams& params) {
  validate_params(s, params);
  PressureReport rep;
  const auto* skew = dynamic_cast<const SkewProductSystem*>(&s);
  rep.grid_spacing = params.candidates ? 0.0 : grid_spacing(s, std::max<std::size_t>(params.resolution, 2));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (double eps : params.epsilons)
    for (std::size_t n : params.horizons) {
      PressureRow row;
      row.n = n;
      row.eps = eps;
      row.log_q = row.log_p = nan;
      if (skew) {
        PointSet fc = params.candidates ? *params.candidates
                                        : default_candidates(*skew->fiber(), params.resolution, n, eps);
        for (Quantity q : {Quantity::spanning, Quantity::separated}) {
          if (q == Quantity::spanning ? !params.spanning : !params.separated) continue;
          auto t = skew_block_total(*skew, phi, n, eps, params.strategy, q, fc, params.mode, params.threads,
                                    params.search);
          (q == Quantity::spanning ? row.log_q : row.log_p) = t.log_value;
          (q == Quantity::spanning ? row.stderr_q : row.stderr_p) = t.stderr_log;
          row.words = t.blocks;
        }
      } else {
        PointSet c = params.candidates ? *params.candidates : default_candidates(s, params.resolution, n, eps);
        for (Quantity q : {Quantity::spanning, Quantity::separated}) {
          if (q == Quantity::spanning ? !params.spanning : !params.separated) continue;
          auto a = average_over_words(s, phi, n, eps, params.strategy, q, c, params.mode, params.threads,
                                      params.search);
          (q == Quantity::spanning ? row.log_q : row.log_p) = std::log(a.value);
          (q == Quantity::spanning ? row.stderr_q : row.stderr_p) = a.stderr_;
          row.words = a.words;
        }
      }
      rep.rows.push_back(row);
    }

  // Summaries at the smallest epsilon.
  const std::size_t nh = params.horizons.size();
  const std::size_t base = (params.epsilons.size() - 1) * nh;
  std::vector<double> lp(nh), lq(nh);
  for (std::size_t j = 0; j < nh; ++j) {
    lp[j] = rep.rows[base + j].log_p;
    lq[j] = rep.rows[base + j].log_q;
  }
  const bool use_p = params.separated;
  const std::vector<double>& head = use_p ? lp : lq;
  rep.method = nh >= 2 ? "two-horizon slope of log " + std::string(use_p ? "P_n" : "Q_n") + " at the smallest eps"
                       : "(1/n) log " + std::string(use_p ? "P_n" : "Q_n") + " (single horizon)";
  rep.estimate = two_horizon_slope(params.horizons, head);
  rep.estimate_spanning = params.spanning ? two_horizon_slope(params.horizons, lq) : nan;
  rep.rate_at_nmax = head.back() / static_cast<double>(params.horizons.back());
  rep.limsup_proxy = -std::numeric_limits<double>::infinity();
  rep.liminf_proxy = std::numeric_limits<double>::infinity();
  for (std::size_t j = nh / 2; j < nh; ++j) {
    double r = head[j] / static_cast<double>(params.horizons[j]);
    rep.limsup_proxy = std::max(rep.limsup_proxy, r);
    rep.liminf_proxy = std::min(rep.liminf_proxy, r);
  }

  // Diagnostics.
  const double tol = 1e-12;
  for (std::size_t j = 0; j < nh; ++j)
    for (std::size_t e = 1; e < params.epsilons.size(); ++e) {
      const auto& big = rep.rows[(e - 1) * nh + j];
      const auto& small = rep.rows[e * nh + j];
      bool bad = (params.separated && small.log_p < big.log_p - tol) ||
                 (params.spanning && small.log_q < big.log_q - tol);
      if (bad) {
        rep.eps_monotone = false;
        rep.diagnostics.push_back("non-monotone in eps at n=" + std::to_string(big.n) + " between eps=" +
                                  std::to_string(big.eps) + " and " + std::to_string(small.eps) +
                                  " (grid discretization)");
      }
    }
  if (params.spanning && params.separated)
    for (const auto& r : rep.rows)
      if (r.log_q > r.log_p + tol) {
        rep.sandwich = false;
        rep.diagnostics.push_back("Q_n > P_n at n=" + std::to_string(r.n) + " eps=" + std::to_string(r.eps));
      }
  if (nh >= 2 && rep.limsup_proxy - rep.liminf_proxy > 0.1)
    rep.diagnostics.push_back("limsup/liminf proxies differ by " +
                              std::to_string(rep.limsup_proxy - rep.liminf_proxy));
  return rep;
}

// ---------------------------------------------------------------- cylinder covers

double cylinder_pressure(const FullShiftSystem& s, const Potential& phi, const Word& w, CoverBound b) {
  if (w.empty()) throw DataError("dynamics words must be nonempty");
  auto deps = phi.shift_dependencies();
  if (!deps) throw UnsupportedError("cylinder pressure needs a potential depending on finitely many coordinates");
  const std::size_t k = s.symbols();
  const auto& gens = s.generators();

  // Composite shift and symbol map of every evaluation suffix.
  struct Composite {
    std::int64_t shift;
    std::vector<std::size_t> perm;
  };
  std::vector<Composite> comps;
  for (const auto& v : evaluation_suffixes(w)) {
    Composite c{0, std::vector<std::size_t>(k)};
    std::iota(c.perm.begin(), c.perm.end(), 0);
    // (f_v omega)_i = pi_{v_1}(...pi_{v_j}(omega_{i + sum of shifts}))
    for (std::size_t j = v.size(); j-- > 0;) {
      const auto& g = gens.at(v[j]);
      c.shift += g.shift;
      if (!g.permutation.empty())
        for (auto& p : c.perm) p = g.permutation[p];
    }
    comps.push_back(std::move(c));
  }

  std::set<std::int64_t> join_pos, used;
  for (const auto& c : comps) {
    join_pos.insert(c.shift);
    used.insert(c.shift);
    for (std::int64_t d : *deps) used.insert(d + c.shift);
  }
  std::vector<std::int64_t> upos(used.begin(), used.end());
  std::vector<std::size_t> join_idx;
  for (std::int64_t p : join_pos)
    join_idx.push_back(static_cast<std::size_t>(std::lower_bound(upos.begin(), upos.end(), p) - upos.begin()));
  const std::uint64_t total = word_count(k, upos.size());
  if (total > (std::uint64_t{1} << 24)) throw BudgetError("cylinder pressure: too many coordinate assignments");

  std::int64_t rad = 0;
  for (std::int64_t d : *deps) rad = std::max<std::int64_t>(rad, d < 0 ? -d : d);
  Point window(static_cast<std::size_t>(2 * rad + 1), 0.0);

  const std::uint64_t cells = word_count(k, join_idx.size());
  std::vector<double> lo(cells, std::numeric_limits<double>::infinity());
  std::vector<double> hi(cells, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> sym(upos.size());
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    for (std::size_t q = upos.size(); q-- > 0;) {
      sym[q] = static_cast<std::size_t>(c % k);
      c /= k;
    }
    double S = 0;
    for (const auto& comp : comps) {
      for (std::int64_t d : *deps) {
        auto q = static_cast<std::size_t>(std::lower_bound(upos.begin(), upos.end(), d + comp.shift) - upos.begin());
        window[static_cast<std::size_t>(d + rad)] = static_cast<double>(comp.perm[sym[q]]);
      }
      S += phi(window);
    }
    std::uint64_t cell = 0;
    for (std::size_t q : join_idx) cell = cell * k + sym[q];
    lo[cell] = std::min(lo[cell], S);
    hi[cell] = std::max(hi[cell], S);
  }
  double out = 0;
  for (std::uint64_t c = 0; c < cells; ++c) out += std::exp(b == CoverBound::q ? lo[c] : hi[c]);
  return out;
}

WordAverage cylinder_pressure_average(const FullShiftSystem& s, const Potential& phi, std::size_t n,
                                      const WordStrategy& strategy, CoverBound b, std::size_t threads) {
  const std::size_t m = s.generator_count();
  const std::uint64_t count = strategy_word_count(strategy, m, n);
  WordAverage avg;
  avg.words = count;
  avg.per_word.assign(count, 0.0);
  parallel_for(count, threads, [&](std::size_t i) {
    avg.per_word[i] = cylinder_pressure(s, phi, strategy_word(strategy, m, n, i), b);
  });
  double sum = 0;
  for (double v : avg.per_word) sum += v;
  avg.value = sum / static_cast<double>(count);
  if (strategy.mode == WordStrategy::Mode::montecarlo && count > 1) {
    double ss = 0;
    for (double v : avg.per_word) ss += (v - avg.value) * (v - avg.value);
    avg.stderr_ = std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count));
  }
  return avg;
}

}  // namespace fsdyn
