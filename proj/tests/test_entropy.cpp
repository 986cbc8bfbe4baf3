#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "fsdyn/entropy.hpp"
#include "fsdyn/error.hpp"
#include "oracles/grid_refinement.hpp"

using namespace fsdyn;

namespace {

const Measure kLebesgue{LebesgueHaar{}};

Measure uniform_points(std::size_t n) {
  std::vector<double> c(n);
  std::iota(c.begin(), c.end(), 0.0);
  return Measure{Atomic{PointSet(1, c), std::vector<double>(n, 1.0 / static_cast<double>(n))}};
}

std::vector<std::vector<std::size_t>> random_permutations(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::vector<std::size_t>> t(m, std::vector<std::size_t>(n));
  for (auto& p : t) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng);
  }
  return t;
}

Partition random_labels(std::mt19937_64& rng, std::size_t n, std::size_t k, std::string id) {
  std::vector<std::size_t> l(n);
  for (auto& v : l) v = rng() % k;
  return label_partition(canonical_labels(l), std::move(id));
}

EntropyParams horizons(std::size_t nmax) {
  EntropyParams p;
  for (std::size_t n = 1; n <= nmax; ++n) p.horizons.push_back(n);
  return p;
}

std::vector<double> a_values(const EntropyReport& r) {
  std::vector<double> a{0.0};
  for (const auto& row : r.rows) a.push_back(row.a_n);
  return a;
}

IntervalSystem times23() {
  return IntervalSystem(LineKind::circle, {IntervalMap::times(2), IntervalMap::times(3)});
}

}  // namespace

TEST_CASE("partition entropy examples") {
  IntervalSystem s(LineKind::interval, {IntervalMap::identity()});
  CHECK(partition_entropy(s, kLebesgue, trivial_partition(s)) == 0);
  CHECK(partition_entropy(s, kLebesgue, dyadic_partition(1)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  auto q = interval_partition(std::vector<Rational>{Rational(0), Rational(1, 4), Rational(1)});
  CHECK(partition_entropy(s, kLebesgue, q) ==
        doctest::Approx(0.25 * std::log(4.0) + 0.75 * std::log(4.0 / 3.0)).epsilon(1e-14));

  CHECK(entropy_of_masses({0.5, 0.0, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(entropy_of_masses({1.2, -0.2}), DataError);

  // several pieces sharing a label form one cell
  auto split = interval_partition(std::vector<Rational>{Rational(0), Rational(1, 4), Rational(3, 4), Rational(1)},
                                  {0, 1, 0});
  CHECK(partition_entropy(s, kLebesgue, split) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("conditional entropy and rho") {
  IntervalSystem s(LineKind::interval, {IntervalMap::identity()});
  auto d2 = dyadic_partition(2);
  auto d3 = dyadic_partition(3);
  CHECK(conditional_entropy(s, kLebesgue, d2, d2) == 0);
  CHECK(conditional_entropy(s, kLebesgue, d2, trivial_partition(s)) == doctest::Approx(std::log(4.0)));
  // d2 is coarser than d3
  CHECK(conditional_entropy(s, kLebesgue, d2, d3) == 0);
  CHECK(conditional_entropy(s, kLebesgue, d3, d2) == doctest::Approx(std::log(2.0)));

  // first binary digit and second binary digit are independent
  auto first = dyadic_partition(1);
  auto second = interval_partition(
      std::vector<Rational>{Rational(0), Rational(1, 4), Rational(1, 2), Rational(3, 4), Rational(1)}, {0, 1, 0, 1});
  CHECK(conditional_entropy(s, kLebesgue, first, second) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  CHECK(rho_distance(s, kLebesgue, d3, d3) == 0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> den(2, 9);
  auto random_partition = [&](std::size_t pieces) {
    std::vector<Rational> b{Rational(0), Rational(1)};
    while (b.size() < pieces + 1) {
      int d = den(rng);
      Rational r(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(d - 1)) + 1, d);
      if (std::find(b.begin(), b.end(), r) == b.end()) b.push_back(r);
    }
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> l(pieces);
    for (auto& v : l) v = rng() % 3;
    return interval_partition(b, canonical_labels(l));
  };
  for (int t = 0; t < 20; ++t) {
    auto a = random_partition(4), b = random_partition(5), c = random_partition(3);
    const double ab = rho_distance(s, kLebesgue, a, b), ba = rho_distance(s, kLebesgue, b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-13));
    CHECK(ab <= rho_distance(s, kLebesgue, a, c) + rho_distance(s, kLebesgue, c, b) + 1e-12);
  }
  for (std::size_t i = 1; i <= 3; ++i)
    for (std::size_t j = 1; j <= 3; ++j)
      for (std::size_t k = 1; k <= 3; ++k) {
        auto a = dyadic_partition(i), b = dyadic_partition(j), c = dyadic_partition(k);
        CHECK(rho_distance(s, kLebesgue, a, b) <=
              rho_distance(s, kLebesgue, a, c) + rho_distance(s, kLebesgue, c, b) + 1e-12);
      }
}

TEST_CASE("word refinements") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  auto halves = dyadic_partition(1);
  auto same = refine_under_word(dbl, halves, Word(1, {0}));
  CHECK(same.cell_count() == 2);
  CHECK(rho_distance(dbl, kLebesgue, same, halves) == 0);

  auto quarters = refine_under_word(dbl, halves, Word(1, {0, 0}));
  CHECK(quarters.cell_count() == 4);
  CHECK(rho_distance(dbl, kLebesgue, quarters, dyadic_partition(2)) == 0);

  auto fs = FiniteSystem::discrete(5, {{1, 2, 3, 4, 0}, {0, 0, 1, 1, 2}});
  auto single = singleton_partition(5);
  auto r = refine_under_word(fs, single, Word(2, {1, 0, 1, 1}));
  CHECK(std::get<LabelPartition>(r.v).labels == std::vector<std::size_t>{0, 1, 2, 3, 4});

  // a tent map has two preimage branches
  IntervalSystem tent(LineKind::interval, {IntervalMap::tent()});
  auto t2 = refine_under_word(tent, halves, Word(1, {0, 0}));
  CHECK(t2.cell_count() == 4);
  CHECK(std::get<IntervalPartition>(t2.v).labels.size() == 4);

  IntervalSystem sine(LineKind::circle, {IntervalMap::sine_circle(0.1, 0.05)});
  CHECK_THROWS_AS(refine_under_word(sine, halves, Word(1, {0, 0})), UnsupportedError);
}

TEST_CASE("entropy rate anchors") {
  SUBCASE("identity maps give H(xi) at every n") {
    IntervalSystem id(LineKind::circle, {IntervalMap::identity(), IntervalMap::identity()});
    auto r = entropy_rate(id, kLebesgue, dyadic_partition(2), horizons(5));
    for (const auto& row : r.rows) CHECK(row.a_n == doctest::Approx(std::log(4.0)));
    CHECK(r.estimate == doctest::Approx(0).scale(1));
  }
  SUBCASE("doubling map with halves") {
    IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
    auto r = entropy_rate(dbl, kLebesgue, dyadic_partition(1), horizons(8));
    for (const auto& row : r.rows) CHECK(row.a_n == doctest::Approx(row.n * std::log(2.0)).epsilon(1e-13));
    CHECK(r.estimate == doctest::Approx(std::log(2.0)));
    CHECK(r.exact_arithmetic);
  }
  SUBCASE("{x2, x3} with dyadic partitions") {
    auto s = times23();
    // halves do not generate for x3, so each step adds at most log 2
    auto r1 = entropy_rate(s, kLebesgue, dyadic_partition(1), horizons(7));
    CHECK(r1.estimate <= std::log(2.0));
    auto r = entropy_rate(s, kLebesgue, dyadic_partition(2), horizons(7));
    CHECK(std::fabs(r.estimate - 0.5 * std::log(6.0)) < 0.05);
    for (std::size_t k = 1; k < r.rows.size(); ++k) CHECK(r.rows[k].increment <= r.rows[k - 1].increment + 1e-12);
  }
  SUBCASE("grid labelling agrees with the interval refinement") {
    auto s = times23();
    auto r = entropy_rate(s, kLebesgue, dyadic_partition(2), horizons(3));
    const std::vector<double> breaks{0, 0.25, 0.5, 0.75, 1};
    for (std::size_t n = 1; n <= 3; ++n)
      CHECK(std::fabs(r.rows[n - 1].a_n - oracle::grid_average(s, breaks, n, 1 << 18)) < 2e-3);
  }
}

TEST_CASE("measure entropy over dyadic levels") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  std::vector<Partition> levels;
  for (std::size_t k = 1; k <= 6; ++k) levels.push_back(dyadic_partition(k));
  auto r = measure_entropy(dbl, kLebesgue, levels, horizons(6));
  REQUIRE(r.rows.size() == 6);
  for (std::size_t k = 1; k < r.rows.size(); ++k) CHECK(r.rows[k].running_max >= r.rows[k - 1].running_max);
  CHECK(std::fabs(r.value - std::log(2.0)) < 0.02);

  auto s = times23();
  auto r23 = measure_entropy(s, kLebesgue, {dyadic_partition(1), dyadic_partition(2), dyadic_partition(3)},
                             horizons(6));
  CHECK(std::fabs(r23.value - 0.5 * std::log(6.0)) < 0.05);

  IntervalSystem id(LineKind::circle, {IntervalMap::times(2)});
  auto trivial = measure_entropy(id, kLebesgue, {trivial_partition(id), trivial_partition(id)}, horizons(4));
  CHECK(trivial.value == 0);
}

TEST_CASE("partition properties on permutation systems") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 12; ++t) {
    const std::size_t N = 6 + rng() % 7, m = 1 + rng() % 3, nmax = 5;
    auto fs = FiniteSystem::discrete(N, random_permutations(rng, N, m));
    auto mu = uniform_points(N);
    auto xi = random_labels(rng, N, 2 + rng() % 2, "xi");
    auto eta = random_labels(rng, N, 2 + rng() % 3, "eta");
    auto both = join(xi, eta);
    auto p = horizons(nmax);
    auto rx = entropy_rate(fs, mu, xi, p), re = entropy_rate(fs, mu, eta, p), rj = entropy_rate(fs, mu, both, p);
    auto ax = a_values(rx), ae = a_values(re), aj = a_values(rj);
    const double Hx = partition_entropy(fs, mu, xi);
    const double cond = conditional_entropy(fs, mu, xi, eta);
    const double rho = rho_distance(fs, mu, xi, eta);
    for (std::size_t n = 1; n <= nmax; ++n) {
      CHECK(ax[n] >= 0);
      CHECK(ax[n] / n <= Hx + 1e-12);                       // (i)
      CHECK(aj[n] <= ax[n] + ae[n] + 1e-12);                // (ii)
      CHECK(ax[n] <= aj[n] + 1e-12);                        // (iii), xi <= xi v eta
      CHECK(ax[n] <= ae[n] + n * cond + 1e-12);             // (iv)
      CHECK(std::fabs(ax[n] - ae[n]) / n <= rho + 1e-12);   // (v) at finite n
      for (std::size_t n1 = 1; n1 < n; ++n1) CHECK(ax[n] <= ax[n1] + ax[n - n1] + 1e-12);
    }
    CHECK(std::fabs(rx.estimate - re.estimate) <= rho + 1e-12);
  }
}

TEST_CASE("subadditivity on line maps") {
  auto s = times23();
  IntervalSystem tent(LineKind::interval, {IntervalMap::tent(), IntervalMap::identity()});
  for (const GeneratorSystem* g : std::initializer_list<const GeneratorSystem*>{&s, &tent})
    for (std::size_t level = 1; level <= 2; ++level) {
      auto a = a_values(entropy_rate(*g, kLebesgue, dyadic_partition(level), horizons(6)));
      for (std::size_t n = 2; n <= 6; ++n)
        for (std::size_t n1 = 1; n1 < n; ++n1) CHECK(a[n] <= a[n1] + a[n - n1] + 1e-12);
    }
}

TEST_CASE("cylinder partitions under Bernoulli measures") {
  const std::vector<double> p{0.3, 0.7};
  const double H = -(0.3 * std::log(0.3) + 0.7 * std::log(0.7));
  Measure mu{Bernoulli{p}};
  auto xi = cylinder_partition({0}, 2);

  FullShiftSystem shift(2, 6, {ShiftGenerator{{}, 1}});
  auto r = entropy_rate(shift, mu, xi, horizons(6));
  for (const auto& row : r.rows) CHECK(row.a_n == doctest::Approx(row.n * H).epsilon(1e-13));

  // with the identity as second generator only shifted letters add a position
  FullShiftSystem lazy(2, 6, {ShiftGenerator{{}, 0}, ShiftGenerator{{}, 1}});
  auto rl = entropy_rate(lazy, mu, xi, horizons(6));
  for (const auto& row : rl.rows)
    CHECK(row.a_n == doctest::Approx((1 + (row.n - 1) / 2.0) * H).epsilon(1e-13));

  FullShiftSystem swapped(2, 6, {ShiftGenerator{{}, 1}, ShiftGenerator{{1, 0}, 1}});
  auto ru = entropy_rate(swapped, Measure{Bernoulli{{0.5, 0.5}}}, xi, horizons(5));
  for (const auto& row : ru.rows) CHECK(row.a_n == doctest::Approx(row.n * std::log(2.0)).epsilon(1e-13));
  // the swap does not preserve a biased measure
  CHECK_THROWS_AS(entropy_rate(swapped, mu, xi, horizons(3)), NonInvariantError);
}

TEST_CASE("product identities") {
  auto circle = std::make_shared<IntervalSystem>(times23());
  std::mt19937_64 rng(9);
  auto fin = std::make_shared<FiniteSystem>(FiniteSystem::discrete(5, random_permutations(rng, 5, 2)));
  auto mu_f = std::make_shared<Measure>(uniform_points(5));
  auto leb = std::make_shared<Measure>(kLebesgue);
  auto xf = random_labels(rng, 5, 3, "labels");
  auto xc = dyadic_partition(1);

  ProductSystem mixed(circle, fin);
  Measure mu{ProductMeasure{leb, mu_f}};
  auto rp = entropy_rate(mixed, mu, product_partition(xc, xf), horizons(4));
  auto a1 = a_values(entropy_rate(*circle, kLebesgue, xc, horizons(4)));
  auto a2 = a_values(entropy_rate(*fin, *mu_f, xf, horizons(4)));
  for (std::size_t n = 1; n <= 4; ++n) CHECK(rp.rows[n - 1].a_n == doctest::Approx(a1[n] + a2[n]).epsilon(1e-13));

  ProductSystem square(circle, circle);
  auto rs = entropy_rate(square, Measure{ProductMeasure{leb, leb}}, product_partition(xc, xc), horizons(4));
  auto rc = entropy_rate(*circle, kLebesgue, xc, horizons(4));
  for (std::size_t n = 1; n <= 4; ++n) CHECK(rs.rows[n - 1].rate == doctest::Approx(2 * rc.rows[n - 1].rate));
  CHECK(rs.estimate == doctest::Approx(2 * rc.estimate));

  // the same product as one finite system with product weights
  auto fin2 = std::make_shared<FiniteSystem>(FiniteSystem::discrete(3, random_permutations(rng, 3, 2)));
  auto x2 = random_labels(rng, 3, 2, "small");
  ProductSystem pair(fin, fin2);
  auto rpair = entropy_rate(pair, Measure{ProductMeasure{mu_f, std::make_shared<Measure>(uniform_points(3))}},
                            product_partition(xf, x2), horizons(4));
  auto flat = flatten_finite_product(*fin, *fin2);
  std::vector<std::size_t> labels(15);
  const auto& l1 = std::get<LabelPartition>(xf.v).labels;
  const auto& l2 = std::get<LabelPartition>(x2.v).labels;
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 3; ++b) labels[a * 3 + b] = l1[a] * x2.cell_count() + l2[b];
  auto rflat = entropy_rate(flat, uniform_points(15), label_partition(labels), horizons(4));
  for (std::size_t n = 1; n <= 4; ++n) CHECK(rpair.rows[n - 1].a_n == doctest::Approx(rflat.rows[n - 1].a_n));
}

TEST_CASE("non-invariant measures are rejected") {
  IntervalSystem s(LineKind::interval, {IntervalMap::constant(Rational(1)), IntervalMap::tent()});
  Measure delta{Atomic{PointSet(1, {1.0}), {1.0}}};
  try {
    entropy_rate(s, delta, dyadic_partition(1), horizons(3));
    FAIL("expected rejection");
  } catch (const NonInvariantError& e) {
    CHECK(e.defect == 1);
  }

  IntervalSystem only_constant(LineKind::interval, {IntervalMap::constant(Rational(1))});
  auto r = entropy_rate(only_constant, delta, dyadic_partition(1), horizons(3));
  CHECK(r.estimate == 0);

  IntervalSystem half(LineKind::interval,
                      {IntervalMap::piecewise_linear(std::vector<Rational>{Rational(0), Rational(1)},
                                                     std::vector<Rational>{Rational(0), Rational(1, 2)})});
  CHECK_THROWS_AS(entropy_rate(half, kLebesgue, dyadic_partition(1), horizons(2)), NonInvariantError);

  TorusSystem t(2, {{1, 2, -1, 4}});
  CHECK_THROWS_AS(entropy_rate(t, kLebesgue, trivial_partition(t), horizons(2)), UnsupportedError);
}

TEST_CASE("strategies, threads and pruning") {
  auto s = times23();
  auto xi = dyadic_partition(2);
  auto p1 = horizons(6);
  auto p4 = p1;
  p4.threads = 4;
  auto e1 = entropy_rate(s, kLebesgue, xi, p1), e4 = entropy_rate(s, kLebesgue, xi, p4);
  for (std::size_t k = 0; k < e1.rows.size(); ++k) CHECK(e1.rows[k].a_n == e4.rows[k].a_n);

  auto mc = p1;
  mc.strategy.mode = WordStrategy::Mode::montecarlo;
  mc.strategy.sample_count = 400;
  mc.strategy.seed = 3;
  auto m1 = entropy_rate(s, kLebesgue, xi, mc);
  mc.threads = 3;
  auto m3 = entropy_rate(s, kLebesgue, xi, mc);
  for (std::size_t k = 0; k < m1.rows.size(); ++k) {
    CHECK(m1.rows[k].a_n == m3.rows[k].a_n);
    CHECK(std::fabs(m1.rows[k].a_n - e1.rows[k].a_n) <= 4 * m1.rows[k].stderr_ + 1e-12);
  }

  auto budget = p1;
  budget.strategy.budget = 10;
  CHECK_THROWS_AS(entropy_rate(s, kLebesgue, xi, budget), BudgetError);

  auto coarse = horizons(3);
  coarse.prune_threshold = 0.05;
  CHECK_THROWS_AS(entropy_rate(s, kLebesgue, dyadic_partition(3), coarse), BudgetError);

  auto bad = p1;
  bad.horizons = {3, 2};
  CHECK_THROWS_AS(entropy_rate(s, kLebesgue, xi, bad), DataError);
}
