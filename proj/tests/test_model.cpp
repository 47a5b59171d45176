#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "meu/errors.hpp"
#include "meu/model.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace meu;
using namespace meu::testing;

TEST_CASE("influence diagram validation") {
  SUBCASE("decision carrying a CPT") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
    std::vector<Table> cpts = {Table{{0}, {0.5, 0.5}}};
    CHECK_THROWS_AS(InfluenceDiagram(vars, cpts, {Table{{0}, {1, 2}}}, UtilityMode::additive),
                    InvalidModelError);
  }
  SUBCASE("unnormalized CPT") {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}}};
    std::vector<Table> cpts = {Table{{0}, {0.5, 0.6}}};
    CHECK_THROWS_AS(InfluenceDiagram(vars, cpts, {Table{{0}, {1, 2}}}, UtilityMode::additive),
                    InvalidModelError);
  }
  SUBCASE("cycle") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {1}},
                                  {1, 2, VarKind::decision, {0}}};
    CHECK_THROWS_AS(InfluenceDiagram(vars, std::vector<Table>(2), {Table{{0}, {1, 2}}},
                                     UtilityMode::additive),
                    InvalidModelError);
  }
  SUBCASE("utility zeros are clamped") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
    InfluenceDiagram id(vars, std::vector<Table>(1), {Table{{0}, {0.0, 4.0}}},
                        UtilityMode::additive);
    CHECK(id.utilities()[0].values[0] == doctest::Approx(4e-12));
    CHECK(id.utilities()[0].values[1] == 4.0);
  }
}

TEST_CASE("build_augmented_model") {
  SUBCASE("multiplicative keeps CPTs and utilities") {
    auto id = match_problem(true);
    auto m = build_augmented_model(id);
    CHECK(m.factors.size() == 2);
    CHECK_FALSE(m.selector.has_value());
  }
  SUBCASE("additive with three utilities sums out to the total utility") {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}}, {1, 3, VarKind::decision, {}}};
    std::vector<Table> cpts(2);
    cpts[0] = Table{{0}, {0.4, 0.6}};
    std::vector<Table> us = {Table{{0}, {1.0, 2.0}}, Table{{1}, {0.5, 0.25, 3.0}},
                             Table{{0, 1}, {1, 2, 3, 4, 5, 6}}};
    InfluenceDiagram id(vars, cpts, us, UtilityMode::additive);
    auto m = build_augmented_model(id);
    REQUIRE(m.selector.has_value());
    CHECK(m.cards[static_cast<std::size_t>(*m.selector)] == 3);
    std::vector<DiscreteFactor> utils(m.factors.begin() + 1, m.factors.end());
    auto prod = factor_combine(utils);
    const VarId s = *m.selector;
    auto summed = factor_marginal(factor_reduce(prod, std::span<const VarId>(&s, 1), ReduceMode::sum),
                                  {0, 1});
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 3; ++x1) {
        double direct = us[0].values[static_cast<std::size_t>(x0)] +
                        us[1].values[static_cast<std::size_t>(x1)] +
                        us[2].values[static_cast<std::size_t>(x0 * 3 + x1)];
        int a[] = {x0, x1};
        CHECK(summed.value(summed.index_of(a)) == doctest::Approx(direct).epsilon(1e-13));
      }
  }
  SUBCASE("additive with a single utility") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
    InfluenceDiagram id(vars, std::vector<Table>(1), {Table{{0}, {1, 2}}}, UtilityMode::additive);
    auto m = build_augmented_model(id);
    CHECK(m.cards.back() == 1);
    CHECK(m.factors[0].value(1) == doctest::Approx(2.0));
  }
  SUBCASE("empty utility list") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
    InfluenceDiagram id(vars, std::vector<Table>(1), {}, UtilityMode::additive);
    CHECK_THROWS_AS(build_augmented_model(id), InvalidModelError);
  }
}

TEST_CASE("expected_utility examples") {
  {
    auto id = single_decision();
    Strategy s;
    s.set_policy(0, policy_from_choice(id, 0, {1}));
    CHECK(expected_utility(id, s) == doctest::Approx(2.0).epsilon(1e-14));
  }
  {
    auto id = match_problem(true);
    Strategy s;
    s.set_policy(1, policy_from_choice(id, 1, {0, 1}));
    CHECK(expected_utility(id, s) == doctest::Approx(1.0).epsilon(1e-14));
  }
  {
    auto id = coordination_toy();
    auto s = Strategy::constant_state(id, 0);
    CHECK(expected_utility(id, s) == doctest::Approx(1.0).epsilon(1e-14));
  }
  {
    auto id = coordination_toy();
    CHECK_THROWS_AS(expected_utility(id, Strategy{}), InvalidModelError);
  }
}

TEST_CASE("expected_utility agrees with direct enumeration") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    auto id = random_limid(rng, 5, 3, 2, 2, t % 2 == 0);
    auto s = random_strategy(id, rng);
    CHECK(expected_utility(id, s) == doctest::Approx(enumerate_eu(id, s)).epsilon(1e-10));
  }
}

TEST_CASE("additive selector correctness on binary models") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    std::vector<Variable> vars;
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 4; ++i) {
      Variable v{i, 2, coin(rng) ? VarKind::decision : VarKind::chance, {}};
      for (int j = 0; j < i; ++j)
        if (coin(rng)) v.parents.push_back(j);
      vars.push_back(v);
    }
    std::vector<Table> cpts(4);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (auto& v : vars) {
      if (v.kind == VarKind::decision) continue;
      Scope fam = v.parents;
      fam.push_back(v.id);
      Table tb{fam, {}};
      for (std::size_t r = 0; r < (std::size_t{1} << v.parents.size()); ++r) {
        double a = u(rng);
        tb.values.push_back(a / (a + 0.5));
        tb.values.push_back(0.5 / (a + 0.5));
      }
      cpts[static_cast<std::size_t>(v.id)] = tb;
    }
    std::vector<Table> us;
    for (int j = 0; j < 3; ++j) {
      int a = j, b = (j + 1) % 4;
      us.push_back(Table{{a, b}, {u(rng), u(rng), u(rng), u(rng)}});
    }
    InfluenceDiagram id(vars, cpts, us, UtilityMode::additive);
    auto s = random_strategy(id, rng);
    CHECK(std::abs(expected_utility(id, s) - enumerate_eu(id, s)) <= 1e-10);
  }
}

TEST_CASE("brute_force_meu examples") {
  {
    auto r = brute_force_meu(coordination_toy());
    CHECK(r.meu == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.strategy.policy(0).log_value(1) == 0.0);
    CHECK(r.strategy.policy(1).log_value(1) == 0.0);
  }
  {
    auto r = brute_force_meu(match_problem(false));
    CHECK(r.meu == doctest::Approx(0.7 + 0.3 * 0.01).epsilon(1e-14));
    CHECK(r.strategy.policy(1).log_value(1) == 0.0);
  }
  {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}}};
    InfluenceDiagram id(vars, {Table{{0}, {0.25, 0.75}}}, {Table{{0}, {2.0, 4.0}}},
                        UtilityMode::multiplicative);
    auto r = brute_force_meu(id);
    CHECK(r.meu == doctest::Approx(3.5).epsilon(1e-14));
    CHECK(r.strategy.policies().empty());
  }
  {
    // tie: both strategies worth 1 -> lexicographically smallest (state 0)
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
    InfluenceDiagram id(vars, std::vector<Table>(1), {Table{{0}, {1.0, 1.0}}},
                        UtilityMode::multiplicative);
    CHECK(brute_force_meu(id).strategy.policy(0).log_value(0) == 0.0);
  }
  CHECK_THROWS_AS(brute_force_meu(coordination_toy(), 3), ResourceCapError);
}

TEST_CASE("brute_force_meu agrees with the enumeration oracle") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 15; ++t) {
    auto id = random_limid(rng, 5, 2, 2, 2, t % 2 == 1);
    CHECK(brute_force_meu(id).meu == doctest::Approx(enumerate_meu(id)).epsilon(1e-10));
  }
}

TEST_CASE("round_strategy") {
  auto id = match_problem(true);
  Strategy s;
  s.set_policy(1, DiscreteFactor::from_values({0, 1}, {2, 2},
                                              std::vector<double>{0.2, 0.8, 0.5, 0.5}));
  auto r = round_strategy(s);
  CHECK(r.table(1) == std::vector<double>{0, 1, 1, 0});
  CHECK(r.is_deterministic());
  auto rr = round_strategy(r);
  CHECK(rr.table(1) == r.table(1));
  CHECK_FALSE(s.is_deterministic());
}

TEST_CASE("strategy_induced_joint examples") {
  auto id = coordination_toy();
  {
    Strategy s;
    s.set_policy(0, policy_from_choice(id, 0, {1}));
    s.set_policy(1, policy_from_choice(id, 1, {1}));
    auto j = strategy_induced_joint(id, s);
    CHECK(j.values == std::vector<double>{0, 0, 0, 1});
  }
  {
    auto j = strategy_induced_joint(id, Strategy::uniform(id));
    CHECK(j.values[0] == doctest::Approx(1.0 / 3.2));
    CHECK(j.values[1] == doctest::Approx(0.1 / 3.2));
    CHECK(j.values[3] == doctest::Approx(2.0 / 3.2));
  }
  {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}}};
    InfluenceDiagram m(vars, {Table{{0}, {0.25, 0.75}}}, {Table{{0}, {2.0, 4.0}}},
                       UtilityMode::multiplicative);
    auto j = strategy_induced_joint(m, Strategy{});
    CHECK(j.values[0] == doctest::Approx(0.5 / 3.5));
  }
}

TEST_CASE("dual objective examples") {
  SUBCASE("no decisions: maximum over a simplex grid approaches log Z") {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}}, {1, 2, VarKind::chance, {0}}};
    std::vector<Table> cpts = {Table{{0}, {0.3, 0.7}}, Table{{0, 1}, {0.9, 0.1, 0.2, 0.8}}};
    InfluenceDiagram id(vars, cpts, {Table{{0, 1}, {1.0, 3.0, 2.0, 0.5}}},
                        UtilityMode::multiplicative);
    const double log_z = std::log(0.3 * 0.9 * 1.0 + 0.3 * 0.1 * 3.0 + 0.7 * 0.2 * 2.0 +
                                  0.7 * 0.8 * 0.5);
    double best = -1e300;
    const int steps = 60;
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; a + b <= steps; ++b)
        for (int c = 0; a + b + c <= steps; ++c) {
          JointTable t{{2, 2},
                       {a / double(steps), b / double(steps), c / double(steps),
                        (steps - a - b - c) / double(steps)}};
          best = std::max(best, dual_objective(t, id, 0.3));
        }
    CHECK(best <= log_z + 1e-12);
    CHECK(best >= log_z - 2e-3);
    auto q = strategy_induced_joint(id, Strategy{});
    CHECK(dual_objective(q, id, 0.3) == doctest::Approx(log_z).epsilon(1e-12));
  }
  SUBCASE("deterministic strategy on the coordination toy gives log EU") {
    auto id = coordination_toy();
    Strategy s;
    s.set_policy(0, policy_from_choice(id, 0, {1}));
    s.set_policy(1, policy_from_choice(id, 1, {1}));
    CHECK(dual_objective(strategy_induced_joint(id, s), id, 0.0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("uniform joint with zero parameters") {
    std::vector<Variable> vars = {{0, 2, VarKind::chance, {}},
                                  {1, 2, VarKind::chance, {}},
                                  {2, 2, VarKind::decision, {}}};
    std::vector<Table> cpts = {Table{{0}, {0.5, 0.5}}, Table{{1}, {0.5, 0.5}}, Table{}};
    InfluenceDiagram id(vars, cpts, {Table{{2}, {1.0, 1.0}}}, UtilityMode::multiplicative);
    JointTable t{{2, 2, 2}, std::vector<double>(8, 0.125)};
    // theta = log 0.5 on each chance CPT, so subtract its contribution
    double theta = 2 * std::log(0.5);
    CHECK(dual_objective(t, id, 1.0) == doctest::Approx(theta + 3 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("errors") {
    auto id = coordination_toy();
    CHECK_THROWS_AS(dual_objective(JointTable{{2, 2}, {0.5, 0.5, 0.5, 0.5}}, id, 0.0),
                    InvalidModelError);
    CHECK_THROWS_AS(dual_objective(JointTable{{2}, {0.5, 0.5}}, id, 0.0), ScopeError);
  }
}

TEST_CASE("dual identity holds for deterministic strategies") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    auto id = random_limid(rng, 5, 3, 2, 2, t % 2 == 0);
    auto s = round_strategy(random_strategy(id, rng));
    double lhs = dual_objective(strategy_induced_joint(id, s), id, 0.0);
    CHECK(std::abs(lhs - log_expected_utility(id, s)) <= 1e-9);
  }
}

TEST_CASE("randomized strategies never beat the deterministic optimum") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    auto id = random_limid(rng, 5, 2, 2, 2, t % 2 == 0);
    double best = brute_force_meu(id).meu;
    for (int k = 0; k < 20; ++k)
      CHECK(expected_utility(id, random_strategy(id, rng)) <= best * (1 + 1e-9));
  }
}
