#include <doctest.h>

#include <cmath>

#include "fsdyn/error.hpp"
#include "fsdyn/measure.hpp"

using namespace fsdyn;

namespace {

Measure atomic(std::size_t dim, std::vector<double> coords, std::vector<double> w) {
  return Measure{Atomic{PointSet(dim, std::move(coords)), std::move(w)}};
}

std::vector<TestSet> dyadic_intervals(std::size_t level) {
  std::vector<TestSet> out;
  const double h = std::ldexp(1.0, -static_cast<int>(level));
  for (std::size_t j = 0; j < (std::size_t{1} << level); ++j)
    out.push_back(IntervalSet{{Interval{j * h, (j + 1) * h, true, false}}});
  return out;
}

}  // namespace

TEST_CASE("delta at 1 with the constant map and the tent map") {
  IntervalSystem s(LineKind::interval, {IntervalMap::constant(Rational(1)), IntervalMap::tent()});
  auto mu = atomic(1, {1.0}, {1.0});
  std::vector<TestSet> point{IntervalSet{{Interval{1, 1, true, true}}}};

  IntervalSystem only_constant(LineKind::interval, {IntervalMap::constant(Rational(1))});
  auto r0 = invariance_defect(only_constant, mu, point);
  CHECK(r0.value == 0);
  CHECK_FALSE(r0.approximate);

  auto r = invariance_defect(s, mu, point);
  CHECK(r.value == 1);
  CHECK(r.generator == 1);
}

TEST_CASE("Haar on the torus is invariant under both endomorphisms") {
  TorusSystem t(2, {{1, 2, -1, 4}, {1, -1, -1, -3}});
  auto sets = dyadic_boxes(2, 2);
  CHECK(sets.size() == 16);
  DefectOptions opt;
  opt.samples = 1'000'000;
  opt.seed = 11;
  auto r = invariance_defect(t, Measure{LebesgueHaar{}}, sets, opt);
  CHECK(r.approximate);
  CHECK(r.value <= 1e-3);
}

TEST_CASE("Lebesgue defect on lines is exact") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2), IntervalMap::times(3)});
  auto r = invariance_defect(dbl, Measure{LebesgueHaar{}}, dyadic_intervals(4));
  CHECK(r.value < 1e-15);
  CHECK_FALSE(r.approximate);

  // x -> x/2 on the interval pushes mass to the left half.
  auto half = IntervalMap::piecewise_linear(std::vector<Rational>{Rational(0), Rational(1)},
                                            std::vector<Rational>{Rational(0), Rational(1, 2)});
  IntervalSystem contr(LineKind::interval, {half});
  std::vector<TestSet> left{IntervalSet{{Interval{0, 0.5, true, false}}}};
  auto r2 = invariance_defect(contr, Measure{LebesgueHaar{}}, left);
  CHECK(r2.value == doctest::Approx(0.5).epsilon(1e-15));

  auto tent = IntervalSystem(LineKind::interval, {IntervalMap::tent()});
  CHECK(invariance_defect(tent, Measure{LebesgueHaar{}}, dyadic_intervals(5)).value < 1e-15);
}

TEST_CASE("Bernoulli measures are shift invariant") {
  FullShiftSystem sh(3, 4, {ShiftGenerator{}, ShiftGenerator{{1, 2, 0}, 1}});
  Measure uniform{Bernoulli{{1.0 / 3, 1.0 / 3, 1.0 / 3}}};
  std::vector<TestSet> cyl{CylinderSet{{{0, 1}}}, CylinderSet{{{-1, 2}, {1, 0}}}};
  CHECK(invariance_defect(sh, uniform, cyl).value < 1e-15);

  // A biased measure is invariant under the shift but not under the symbol rotation.
  Measure biased{Bernoulli{{0.5, 0.3, 0.2}}};
  auto r = invariance_defect(sh, biased, cyl);
  CHECK(r.generator == 1);
  CHECK(r.value == doctest::Approx(0.2));
}

TEST_CASE("unsupported combinations are explicit") {
  TorusSystem t(2, {{2, 0, 0, 2}});
  std::vector<TestSet> iv{IntervalSet{{Interval{0, 0.5}}}};
  CHECK_THROWS_AS(invariance_defect(t, Measure{LebesgueHaar{}}, iv), UnsupportedError);
  auto fin = FiniteSystem::discrete(3, {{1, 2, 0}});
  CHECK_THROWS_AS(invariance_defect(fin, Measure{LebesgueHaar{}}, {}), DataError);
}

TEST_CASE("measure validation") {
  auto fin = FiniteSystem::discrete(3, {{1, 2, 0}});
  CHECK_NOTHROW(validate_measure(fin, atomic(1, {0, 1, 2}, {0.2, 0.3, 0.5})));
  CHECK_THROWS_AS(validate_measure(fin, atomic(1, {0, 1}, {0.2, 0.3})), DataError);
  CHECK_THROWS_AS(validate_measure(fin, atomic(1, {0, 5}, {0.5, 0.5})), DataError);
  CHECK_THROWS_AS(validate_measure(fin, atomic(1, {0, 1}, {1.5, -0.5})), DataError);
  auto cyc = invariance_defect(fin, atomic(1, {0, 1, 2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}),
                               {FiniteSet{{0}}, FiniteSet{{1, 2}}});
  CHECK(cyc.value < 1e-15);
}

TEST_CASE("integration") {
  IntervalSystem dbl(LineKind::circle, {IntervalMap::times(2)});
  auto x = Potential::coordinate(0);
  CHECK(integrate(dbl, Measure{LebesgueHaar{}}, x).value == doctest::Approx(0.5).epsilon(1e-9));
  auto c = integrate(dbl, Measure{LebesgueHaar{}}, Potential::constant(2.5));
  CHECK(c.value == 2.5);
  CHECK(c.exact);

  auto fin = FiniteSystem::discrete(3, {{1, 2, 0}});
  auto t = integrate(fin, atomic(1, {0, 2}, {0.25, 0.75}), Potential::table({1, 10, 100}));
  CHECK(t.value == doctest::Approx(75.25));

  FullShiftSystem sh(2, 3, {ShiftGenerator{}});
  auto v = integrate(sh, Measure{Bernoulli{{0.25, 0.75}}}, Potential::symbol(0, {0.0, 4.0}));
  CHECK(v.value == doctest::Approx(3.0));
  CHECK(v.exact);

  TorusSystem t2(2, {{1, 2, -1, 4}});
  auto tr = integrate(t2, Measure{LebesgueHaar{}}, Potential::trig(1, {0.0, 1.0}, {}));
  CHECK(std::fabs(tr.value) < 1e-6);
}
