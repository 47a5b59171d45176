#include <doctest.h>

#include <cmath>
#include <random>

#include "meu/errors.hpp"
#include "meu/factor.hpp"

using namespace meu;

namespace {

DiscreteFactor lin(Scope scope, std::vector<int> cards, std::vector<double> v) {
  return DiscreteFactor::from_values(std::move(scope), std::move(cards), v);
}

DiscreteFactor random_factor(std::mt19937_64& rng, Scope scope, std::vector<int> cards) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(detail::table_size(cards));
  for (auto& x : v) x = u(rng);
  return DiscreteFactor(std::move(scope), std::move(cards), std::move(v));
}

double max_abs_diff(const DiscreteFactor& a, const DiscreteFactor& b) {
  DiscreteFactor bb = factor_align(b, a.scope(), a.cards());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.log_value(i) - bb.log_value(i)));
  return m;
}

}  // namespace

TEST_CASE("factor_combine examples") {
  auto f = lin({0}, {2}, {0.5, 0.5});
  SUBCASE("single operand is identity") {
    DiscreteFactor fs[] = {f};
    auto r = factor_combine(fs);
    CHECK(r.scope() == f.scope());
    CHECK(r.log_values() == f.log_values());
  }
  SUBCASE("zero log factor is multiplicative identity") {
    auto r = factor_product(f, DiscreteFactor::constant({0}, {2}, 0.0));
    CHECK(r.log_values() == f.log_values());
  }
  SUBCASE("direct arithmetic") {
    auto r = factor_product(f, lin({0}, {2}, {0.2, 0.8}));
    CHECK(r.value(0) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(r.value(1) == doctest::Approx(0.4).epsilon(1e-14));
  }
  SUBCASE("log zero absorbs") {
    auto r = factor_product(lin({0}, {2}, {0.0, 1.0}), lin({0, 1}, {2, 2}, {1, 2, 3, 4}));
    CHECK(r.log_value(0) == kLogZero);
    CHECK(r.log_value(1) == kLogZero);
    CHECK(r.value(3) == doctest::Approx(4.0));
  }
  SUBCASE("scope is ordered union, last variable fastest") {
    auto a = lin({1}, {2}, {1, 2});
    auto b = lin({0}, {3}, {1, 10, 100});
    auto r = factor_product(a, b);
    CHECK(r.scope() == Scope{1, 0});
    CHECK(r.value(1) == doctest::Approx(10.0));  // (x1=0, x0=1)
    CHECK(r.value(3) == doctest::Approx(2.0));   // (x1=1, x0=0)
  }
  SUBCASE("inconsistent cardinality") {
    CHECK_THROWS_AS(factor_product(f, DiscreteFactor::constant({0}, {3})), ScopeError);
  }
}

TEST_CASE("factor_combine is commutative and associative") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_factor(rng, {0, 2}, {2, 3});
    auto b = random_factor(rng, {2, 1}, {3, 2});
    auto c = random_factor(rng, {1, 3}, {2, 2});
    CHECK(max_abs_diff(factor_product(a, b), factor_product(b, a)) <= 1e-12);
    auto left = factor_product(factor_product(a, b), c);
    auto right = factor_product(a, factor_product(b, c));
    CHECK(max_abs_diff(left, right) <= 1e-12);
  }
}

TEST_CASE("factor_reduce examples") {
  auto f = lin({0}, {2}, {0.3, 0.7});
  CHECK(factor_reduce(f, {}, ReduceMode::sum).log_values() == f.log_values());
  const VarId a = 0;
  auto s = factor_reduce(f, std::span<const VarId>(&a, 1), ReduceMode::sum);
  CHECK(s.scope().empty());
  CHECK(s.value(0) == doctest::Approx(1.0).epsilon(1e-15));
  auto m = factor_reduce(f, std::span<const VarId>(&a, 1), ReduceMode::max);
  CHECK(m.value(0) == doctest::Approx(0.7).epsilon(1e-15));
  const VarId unknown = 5;
  CHECK_THROWS_AS(factor_reduce(f, std::span<const VarId>(&unknown, 1), ReduceMode::sum),
                  ScopeError);
}

TEST_CASE("factor_reduce is stable for large magnitudes") {
  DiscreteFactor f({0}, {3}, {-1000.0, -1000.0, kLogZero});
  const VarId a = 0;
  auto s = factor_reduce(f, std::span<const VarId>(&a, 1), ReduceMode::sum);
  CHECK(s.log_value(0) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-14));
  DiscreteFactor z({0}, {2}, {kLogZero, kLogZero});
  CHECK(factor_reduce(z, std::span<const VarId>(&a, 1), ReduceMode::sum).log_value(0) ==
        kLogZero);
}

TEST_CASE("factor_reduce matches brute-force summation") {
  std::mt19937_64 rng(3);
  auto f = random_factor(rng, {4, 1, 7}, {2, 3, 2});
  const VarId drop = 1;
  auto r = factor_reduce(f, std::span<const VarId>(&drop, 1), ReduceMode::sum);
  for (int x4 = 0; x4 < 2; ++x4)
    for (int x7 = 0; x7 < 2; ++x7) {
      double s = 0.0;
      for (int x1 = 0; x1 < 3; ++x1) {
        int a[] = {x4, x1, x7};
        s += f.value(f.index_of(a));
      }
      int b[] = {x4, x7};
      CHECK(r.value(r.index_of(b)) == doctest::Approx(s).epsilon(1e-13));
    }
}

TEST_CASE("factor_power_normalize examples") {
  auto f = lin({0}, {2}, {0.25, 0.75});
  const VarId a = 0;
  auto one = factor_power_normalize(f, std::span<const VarId>(&a, 1), 1.0);
  CHECK(one.value(0) == doctest::Approx(0.25).epsilon(1e-14));
  auto two = factor_power_normalize(f, std::span<const VarId>(&a, 1), 2.0);
  CHECK(two.value(0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(two.value(1) == doctest::Approx(0.9).epsilon(1e-14));
  auto flat = factor_power_normalize(lin({0}, {2}, {0.5, 0.5}), std::span<const VarId>(&a, 1), 4.0);
  CHECK(flat.value(0) == doctest::Approx(0.5).epsilon(1e-14));
  SUBCASE("normalizes per conditioning slice") {
    auto g = lin({1, 0}, {2, 2}, {1, 3, 2, 2});
    auto p = factor_power_normalize(g, std::span<const VarId>(&a, 1), 1.0);
    CHECK(p.value(0) == doctest::Approx(0.25));
    CHECK(p.value(2) == doctest::Approx(0.5));
  }
  SUBCASE("degenerate slice") {
    auto g = lin({1, 0}, {2, 2}, {0, 0, 2, 2});
    CHECK_THROWS_AS(factor_power_normalize(g, std::span<const VarId>(&a, 1), 2.0),
                    DegenerateSliceError);
  }
}

TEST_CASE("factor construction rejects bad tables") {
  CHECK_THROWS_AS(DiscreteFactor({0}, {2}, {0.0}), ScopeError);
  CHECK_THROWS_AS(DiscreteFactor({0}, {2}, {0.0, std::nan("")}), InvalidModelError);
  CHECK_THROWS_AS(DiscreteFactor({0, 0}, {2, 2}, std::vector<double>(4, 0.0)), ScopeError);
  CHECK_THROWS_AS(DiscreteFactor::from_values({0}, {2}, std::vector<double>{-1.0, 1.0}),
                  InvalidModelError);
}

TEST_CASE("factor_marginal reorders to the requested scope") {
  auto f = lin({0, 1}, {2, 3}, {1, 2, 3, 4, 5, 6});
  auto m = factor_marginal(f, {1});
  CHECK(m.value(0) == doctest::Approx(5.0));
  CHECK(m.value(2) == doctest::Approx(9.0));
  auto t = factor_marginal(f, {1, 0});
  CHECK(t.value(1) == doctest::Approx(4.0));  // x1=0, x0=1
}
