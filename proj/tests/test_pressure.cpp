#include <doctest.h>

#include <cmath>

#include "fsdyn/error.hpp"
#include "fsdyn/pressure.hpp"
#include "oracles/finite_bruteforce.hpp"
#include "oracles/linear_circle.hpp"
#include "oracles/random_finite.hpp"

using namespace fsdyn;

namespace {

Word W(std::size_t m, std::vector<Letter> l) { return Word(m, std::move(l)); }

WordStrategy exhaustive() { return WordStrategy{}; }

bool pairwise_separated(const GeneratorSystem& s, const Word& w, double eps, const PointSet& c,
                        const std::vector<std::size_t>& wit) {
  for (std::size_t a = 0; a < wit.size(); ++a)
    for (std::size_t b = a + 1; b < wit.size(); ++b)
      if (bowen_distance(s, w, c[wit[a]], c[wit[b]]) < eps) return false;
  return true;
}

}  // namespace

TEST_CASE("birkhoff sum examples") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  double x = 0.1;
  CHECK(birkhoff_sum(dbl, Potential::coordinate(0), W(1, {0, 0, 0}), {&x, 1}) ==
        doctest::Approx(0.7).epsilon(1e-14));
  CHECK(birkhoff_sum(dbl, Potential::constant(1.5), W(1, {0, 0, 0, 0}), {&x, 1}) == 6.0);

  auto fin = FiniteSystem::discrete(3, {{1, 2, 0}, {0, 0, 0}});
  auto phi = Potential::table({1, 10, 100});
  double z = 0;
  // w = (0, 1): orbit z, f_1 z
  CHECK(birkhoff_sum(fin, phi, W(2, {0, 1}), {&z, 1}) == 1 + 1);
  CHECK(birkhoff_sum(fin, phi, W(2, {1, 0}), {&z, 1}) == 1 + 10);
}

TEST_CASE("max_separated examples") {
  auto fin = FiniteSystem::discrete(5, {{1, 2, 3, 4, 0}});
  auto c = finite_candidates(5);
  for (auto mode : {SearchMode::exact, SearchMode::greedy}) {
    auto r = max_separated(fin, Potential(), W(1, {0, 0, 0}), 0.5, c, mode);
    CHECK(r.weight == 5);
    CHECK(r.witness.size() == 5);
  }

  auto id3 = FiniteSystem::discrete(3, {{0, 1, 2}});
  auto phi = Potential::table({0, std::log(2.0), std::log(3.0)});
  CHECK(max_separated(id3, phi, W(1, {0}), 0.5, finite_candidates(3), SearchMode::exact).weight ==
        doctest::Approx(6.0).epsilon(1e-15));

  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  PointSet one(1, {0.3});
  auto r = max_separated(dbl, Potential::coordinate(0), W(1, {0, 0}), 0.1, one, SearchMode::exact);
  CHECK(r.witness == std::vector<std::size_t>{0});
  CHECK(r.weight == doctest::Approx(std::exp(0.3 + 0.6)).epsilon(1e-14));

  CHECK_THROWS_AS(max_separated(dbl, Potential(), W(1, {0}), 0.1, PointSet(1), SearchMode::exact), DataError);
  CHECK_THROWS_AS(max_separated(dbl, Potential(), W(1, {0}), 0.0, one, SearchMode::exact), DataError);
}

TEST_CASE("min_spanning examples") {
  // eps above the diameter: one ball covers, take the lightest point.
  std::vector<double> d{0, 1, 2, 3, 1, 0, 1, 2, 2, 1, 0, 1, 3, 2, 1, 0};
  FiniteSystem path(4, d, {{0, 1, 2, 3}});
  auto phi = Potential::table({0.5, 0.2, 0.9, 0.3});
  auto r = min_spanning(path, phi, W(1, {0, 0}), 3.5, finite_candidates(4), SearchMode::exact);
  CHECK(r.witness == std::vector<std::size_t>{1});
  CHECK(r.weight == doctest::Approx(std::exp(0.4)).epsilon(1e-15));

  auto fin = FiniteSystem::discrete(4, {{1, 2, 3, 0}});
  auto tab = Potential::table({0, 1, 2, 3});
  auto all = min_spanning(fin, tab, W(1, {0}), 0.5, finite_candidates(4), SearchMode::exact);
  CHECK(all.witness.size() == 4);
  CHECK(all.weight == doctest::Approx(1 + std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));

  // 4-point path with a heavy middle point against the subset oracle.
  oracle::Finite raw{4, d, {{0, 1, 2, 3}}, {0.1, 2.0, 0.0, 0.4}};
  auto crafted = Potential::table(raw.phi);
  for (double eps : {1.5, 2.5}) {
    auto got = min_spanning(path, crafted, W(1, {0}), eps, finite_candidates(4), SearchMode::exact);
    CHECK(got.weight == oracle::min_spanning(raw, {0}, eps));
  }
}

TEST_CASE("spanning over an explicit universe") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  PointSet cands(1, {0.0, 0.5});
  PointSet universe = line_grid(LineKind::circle, 8);
  auto r = min_spanning(dbl, Potential(), W(1, {0}), 0.3, cands, SearchMode::greedy, {}, &universe);
  CHECK(r.witness.size() == 2);
  PointSet lone(1, {0.0});
  CHECK_THROWS_AS(min_spanning(dbl, Potential(), W(1, {0}), 0.3, lone, SearchMode::greedy, {}, &universe),
                  InfeasibleError);
  CHECK_THROWS_AS(min_spanning(dbl, Potential(), W(1, {0}), 0.3, lone, SearchMode::exact, {}, &universe),
                  InfeasibleError);
}

TEST_CASE("exact mode rejects large conflict components") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  auto grid = line_grid(LineKind::circle, 64);
  CHECK_THROWS_AS(max_separated(dbl, Potential(), W(1, {0}), 0.45, grid, SearchMode::exact), BudgetError);
  CHECK_THROWS_AS(min_spanning(dbl, Potential(), W(1, {0}), 0.45, grid, SearchMode::exact), BudgetError);
  // Small eps splits the grid into singletons, which is fine.
  CHECK(max_separated(dbl, Potential(), W(1, {0}), 0.01, grid, SearchMode::exact).weight == 64);
}

TEST_CASE("exact search equals subset enumeration") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const std::size_t N = 6 + seed % 5, m = 1 + seed % 3;
    auto fc = oracle::random_finite(seed, N, m);
    auto cand = finite_candidates(N);
    for (std::size_t n = 1; n <= 3; ++n)
      for (const auto& w : enumerate_words(m, n))
        for (double eps : {0.2, 0.45}) {
          auto lw = oracle::letters(w);
          CHECK(max_separated(fc.sys, fc.phi, w, eps, cand, SearchMode::exact).weight ==
                oracle::max_separated(fc.raw, lw, eps));
          CHECK(min_spanning(fc.sys, fc.phi, w, eps, cand, SearchMode::exact).weight ==
                oracle::min_spanning(fc.raw, lw, eps));
        }
  }
}

TEST_CASE("greedy witnesses are valid and bracket the exact optimum") {
  for (std::uint64_t seed = 11; seed <= 16; ++seed) {
    auto fc = oracle::random_finite(seed, 12, 2);
    auto cand = finite_candidates(12);
    for (const auto& w : enumerate_words(2, 3))
      for (double eps : {0.15, 0.3}) {
        auto gs = max_separated(fc.sys, fc.phi, w, eps, cand, SearchMode::greedy);
        auto es = max_separated(fc.sys, fc.phi, w, eps, cand, SearchMode::exact);
        CHECK(pairwise_separated(fc.sys, w, eps, cand, gs.witness));
        CHECK(pairwise_separated(fc.sys, w, eps, cand, es.witness));
        CHECK(gs.weight <= es.weight * (1 + 1e-12));
        // maximal separated sets span
        CHECK(spans(fc.sys, w, eps, cand, gs.witness));
        for (std::size_t x = 0; x < cand.size(); ++x) {
          if (std::find(gs.witness.begin(), gs.witness.end(), x) != gs.witness.end()) continue;
          auto ext = gs.witness;
          ext.push_back(x);
          CHECK_FALSE(pairwise_separated(fc.sys, w, eps, cand, ext));
        }
        auto gq = min_spanning(fc.sys, fc.phi, w, eps, cand, SearchMode::greedy);
        auto eq = min_spanning(fc.sys, fc.phi, w, eps, cand, SearchMode::exact);
        CHECK(spans(fc.sys, w, eps, cand, gq.witness));
        CHECK(spans(fc.sys, w, eps, cand, eq.witness));
        CHECK(eq.weight <= gq.weight * (1 + 1e-12));
        CHECK(eq.weight <= es.weight * (1 + 1e-12));
      }
  }
}

TEST_CASE("finite-n identities on exact finite systems") {
  auto fc = oracle::random_finite(21, 9, 2);
  auto cand = finite_candidates(9);
  const double c = 0.7;
  const auto psi = Potential::table({0.3, -0.2, 0.1, 0.9, -0.5, 0.0, 0.4, 0.2, -0.8});
  for (std::size_t n = 1; n <= 4; ++n) {
    auto avg = [&](const Potential& p, double eps, Quantity q) {
      return average_over_words(fc.sys, p, n, eps, exhaustive(), q, cand, SearchMode::exact).value;
    };
    for (double eps : {0.1, 0.25, 0.5}) {
      const double p0 = avg(fc.phi, eps, Quantity::separated);
      const double q0 = avg(fc.phi, eps, Quantity::spanning);
      CHECK(q0 <= p0 * (1 + 1e-12));
      CHECK(avg(fc.phi + Potential::constant(c), eps, Quantity::separated) ==
            doctest::Approx(std::exp(n * c) * p0).epsilon(1e-12));
      CHECK(avg(fc.phi + psi, eps, Quantity::separated) <=
            std::pow(2.0, n) * p0 * avg(psi, eps, Quantity::separated) * (1 + 1e-12));
      // phi <= phi + |psi|
      CHECK(p0 <= avg(fc.phi + psi.abs(), eps, Quantity::separated) * (1 + 1e-12));
      CHECK(q0 <= avg(fc.phi + psi.abs(), eps, Quantity::spanning) * (1 + 1e-12));
      // smaller eps, larger counts
      CHECK(avg(fc.phi, eps / 2, Quantity::separated) >= p0 * (1 - 1e-12));
      CHECK(avg(fc.phi, eps / 2, Quantity::spanning) >= q0 * (1 - 1e-12));
      // sup-norm bound against the unweighted spanning count
      const double norm = sup_norm(fc.phi, cand);
      CHECK(q0 <= std::exp(n * norm) * avg(Potential(), eps, Quantity::spanning) * (1 + 1e-12));
    }
  }
}

TEST_CASE("word averages") {
  auto fin = FiniteSystem::discrete(6, {{1, 2, 3, 4, 5, 0}, {0, 0, 1, 1, 2, 2}});
  auto cand = finite_candidates(6);
  for (std::size_t n = 1; n <= 4; ++n) {
    auto a = average_over_words(fin, Potential(), n, 0.5, exhaustive(), Quantity::separated, cand, SearchMode::greedy);
    CHECK(a.value == 6);
    CHECK(a.words == std::size_t(std::pow(2, n)));
  }
  auto one = FiniteSystem::discrete(4, {{1, 0, 3, 2}});
  auto phi = Potential::table({0.1, 0.2, 0.3, 0.4});
  auto single = max_separated(one, phi, W(1, {0, 0, 0}), 0.5, finite_candidates(4), SearchMode::exact).weight;
  CHECK(average_over_words(one, phi, 3, 0.5, exhaustive(), Quantity::separated, finite_candidates(4),
                           SearchMode::exact)
            .value == single);

  WordStrategy mc;
  mc.mode = WordStrategy::Mode::montecarlo;
  mc.sample_count = 50;
  mc.seed = 3;
  auto fc = oracle::random_finite(5, 10, 3);
  auto t1 = average_over_words(fc.sys, fc.phi, 6, 0.2, mc, Quantity::separated, finite_candidates(10), SearchMode::greedy, 1);
  auto t4 = average_over_words(fc.sys, fc.phi, 6, 0.2, mc, Quantity::separated, finite_candidates(10), SearchMode::greedy, 4);
  CHECK(t1.value == t4.value);
  CHECK(t1.stderr_ == t4.stderr_);
  CHECK(t1.stderr_ > 0);
  CHECK(t1.per_word == t4.per_word);
}

TEST_CASE("doubling map grid counts match the expansion oracle") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  const std::size_t M = 1 << 14;
  auto grid = line_grid(LineKind::circle, M);
  for (std::size_t n = 1; n <= 7; ++n)
    for (double eps : {0.2, 0.1, 0.03}) {
      Word w(1, std::vector<Letter>(n, 0));
      auto r = max_separated(dbl, Potential(), w, eps, grid, SearchMode::greedy);
      auto lw = oracle::letters(w);
      CHECK(static_cast<double>(r.witness.size()) == oracle::grid_separated({2}, lw, eps, M));
      CHECK(static_cast<double>(r.witness.size()) <= oracle::circle_separated({2}, lw, eps));
    }
}

TEST_CASE("two-generator circle counts match the degree-product oracle") {
  IntervalSystem s(LineKind::circle, {IntervalMap::times(2), IntervalMap::times(3)});
  const std::size_t M = 1 << 15;
  auto grid = line_grid(LineKind::circle, M);
  for (const auto& w : enumerate_words(2, 4)) {
    auto r = max_separated(s, Potential(), w, 0.099, grid, SearchMode::greedy);
    auto lw = oracle::letters(w);
    CHECK(static_cast<double>(r.witness.size()) == oracle::grid_separated({2, 3}, lw, 0.099, M));
    CHECK(static_cast<double>(r.witness.size()) <= oracle::circle_separated({2, 3}, lw, 0.099));
  }
}

TEST_CASE("pressure estimate for the doubling map") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  EstimatorParams p;
  p.epsilons = {0.2, 0.1};
  p.horizons = {5, 6, 7};
  p.resolution = 1 << 13;
  auto rep = pressure_estimate(dbl, Potential(), p);
  CHECK(rep.rows.size() == 6);
  CHECK(std::fabs(rep.estimate - std::log(2.0)) < 0.05);
  CHECK(rep.eps_monotone);
  CHECK(rep.sandwich);

  auto shifted = pressure_estimate(dbl, Potential::constant(0.3), p);
  CHECK(std::fabs(shifted.estimate - rep.estimate - 0.3) < 1e-9);
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    CHECK(shifted.rows[i].log_p - rep.rows[i].log_p ==
          doctest::Approx(0.3 * static_cast<double>(rep.rows[i].n)).epsilon(1e-12));
}

TEST_CASE("estimator parameter validation") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  EstimatorParams p;
  p.epsilons = {0.1, 0.2};
  p.horizons = {2, 3};
  p.resolution = 1024;
  CHECK_THROWS_AS(validate_params(dbl, p), DataError);
  p.epsilons = {0.2, 0.1};
  p.horizons = {3, 3};
  CHECK_THROWS_AS(validate_params(dbl, p), DataError);
  p.horizons = {2, 3};
  p.resolution = 16;
  CHECK_THROWS_AS(validate_params(dbl, p), DataError);
  p.resolution = 1024;
  CHECK_NOTHROW(validate_params(dbl, p));
  p.strategy.mode = WordStrategy::Mode::montecarlo;
  p.strategy.sample_count = 0;
  CHECK_THROWS_AS(validate_params(dbl, p), DataError);
  CHECK(two_horizon_slope({2, 5}, {1.0, 4.0}) == 1.0);
}

TEST_CASE("cylinder cover pressure on full shifts") {
  FullShiftSystem sh2(2, 8, {ShiftGenerator{}});
  for (std::size_t n = 1; n <= 6; ++n) {
    Word w(1, std::vector<Letter>(n, 0));
    CHECK(cylinder_pressure(sh2, Potential(), w, CoverBound::p) == std::pow(2.0, n));
    CHECK(cylinder_pressure(sh2, Potential(), w, CoverBound::q) == std::pow(2.0, n));
  }

  // Identity and shift generators: the join of a word has 2^{#distinct shifts} cells.
  FullShiftSystem mixed(2, 8, {ShiftGenerator{{}, 0}, ShiftGenerator{{1, 0}, 1}});
  CHECK(cylinder_pressure(mixed, Potential(), W(2, {0, 0, 0}), CoverBound::p) == 2);
  CHECK(cylinder_pressure(mixed, Potential(), W(2, {1, 0, 1}), CoverBound::p) == 4);

  auto phi = Potential::block(0, 2, 2, {0.0, 0.5, -0.3, 1.0});
  FullShiftSystem two(2, 8, {ShiftGenerator{}, ShiftGenerator{{1, 0}, 1}});
  WordStrategy all;
  for (std::size_t n = 1; n <= 5; ++n) {
    auto q = cylinder_pressure_average(two, phi, n, all, CoverBound::q);
    auto p = cylinder_pressure_average(two, phi, n, all, CoverBound::p);
    CHECK(q.value <= p.value);
  }
  for (std::size_t n1 = 1; n1 <= 3; ++n1)
    for (std::size_t n2 = 1; n2 <= 3; ++n2) {
      const double a = cylinder_pressure_average(two, phi, n1 + n2, all, CoverBound::p).value;
      const double b = cylinder_pressure_average(two, phi, n1, all, CoverBound::p).value;
      const double c = cylinder_pressure_average(two, phi, n2, all, CoverBound::p).value;
      CHECK(a <= b * c * (1 + 1e-12));
    }

  // Constant potential scales every cell.
  CHECK(cylinder_pressure(sh2, Potential::constant(0.5), W(1, {0, 0, 0}), CoverBound::q) ==
        doctest::Approx(8 * std::exp(1.5)));
  CHECK_THROWS_AS(cylinder_pressure(sh2, Potential::window_sum(0.5), W(1, {0}), CoverBound::p), UnsupportedError);
}

TEST_CASE("skew product block totals") {
  auto fc = oracle::random_finite(31, 5, 2);
  auto fiber = std::make_shared<FiniteSystem>(fc.sys);
  const double c = 0.25;
  for (double eps : {0.25, 0.1}) {
    const std::int64_t J = shift_resolution(eps);
    for (std::size_t n = 1; n <= 3; ++n) {
      auto F = build_skew_product(fiber, n, eps);
      auto g = skew_potential(*F, fc.phi, c);
      for (Quantity q : {Quantity::separated, Quantity::spanning}) {
        auto t = skew_block_total(*F, g, n, eps, exhaustive(), q, finite_candidates(5), SearchMode::exact);
        CHECK_FALSE(t.sampled);
        auto fib = average_over_words(*fiber, fc.phi, n, eps, exhaustive(), q, finite_candidates(5), SearchMode::exact);
        const double predicted = static_cast<double>(2 * J + n) * std::log(2.0) + n * c + std::log(fib.value);
        CHECK(t.log_value == doctest::Approx(predicted).epsilon(1e-12));
      }
      if (n + 2 * J > 6) continue;
      // All blocks at once on the skew product itself.
      PointSet all(F->dimension());
      const std::size_t len = n + 2 * static_cast<std::size_t>(J);
      for (std::size_t b = 0; b < (std::size_t{1} << len); ++b) {
        Point window(F->base_dimension(), 0.0);
        for (std::size_t p = 0; p < len; ++p) window[F->radius() - J + p] = static_cast<double>(b >> p & 1);
        for (std::size_t x = 0; x < 5; ++x) {
          double xv = static_cast<double>(x);
          all.push_back(F->make_point(window, {&xv, 1}));
        }
      }
      Word w(1, std::vector<Letter>(n, 0));
      auto direct = max_separated(*F, g, w, eps, all, SearchMode::exact);
      auto t = skew_block_total(*F, g, n, eps, exhaustive(), Quantity::separated, finite_candidates(5), SearchMode::exact);
      CHECK(std::log(direct.weight) == doctest::Approx(t.log_value).epsilon(1e-12));
    }
  }

  // Sampled blocks are nested across horizons and unbiased for the total.
  WordStrategy mc;
  mc.mode = WordStrategy::Mode::montecarlo;
  mc.sample_count = 400;
  mc.seed = 9;
  auto F = build_skew_product(fiber, 4, 0.25);
  auto g = skew_potential(*F, fc.phi, 0.0);
  auto t = skew_block_total(*F, g, 4, 0.25, mc, Quantity::separated, finite_candidates(5), SearchMode::exact);
  auto exact = skew_block_total(*F, g, 4, 0.25, exhaustive(), Quantity::separated, finite_candidates(5), SearchMode::exact);
  CHECK(t.sampled);
  CHECK(std::fabs(t.log_value - exact.log_value) <= 4 * t.stderr_log + 1e-12);
  CHECK_THROWS_AS(skew_block_total(*F, g, 20, 0.25, exhaustive(), Quantity::separated, finite_candidates(5),
                                   SearchMode::exact),
                  DataError);
}
