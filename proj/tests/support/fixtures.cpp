#include "support/fixtures.hpp"

#include <algorithm>
#include <set>

namespace meu::testing {

namespace {

Table utility_table(Scope scope, std::vector<double> values) {
  return Table{std::move(scope), std::move(values)};
}

std::vector<double> random_row(std::mt19937_64& rng, int k) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> row(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& x : row) {
    x = g(rng) + 1e-3;
    sum += x;
  }
  for (auto& x : row) x /= sum;
  return row;
}

InfluenceDiagram assemble(std::mt19937_64& rng, std::vector<Variable> vars,
                          bool additive) {
  std::vector<Table> cpts(vars.size());
  auto card = [&](int v) { return vars[static_cast<std::size_t>(v)].cardinality; };
  for (const auto& v : vars) {
    if (v.kind == VarKind::decision) continue;
    Scope fam = v.parents;
    fam.push_back(v.id);
    std::size_t rows = 1;
    for (int p : v.parents) rows *= static_cast<std::size_t>(card(p));
    Table t{fam, {}};
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = random_row(rng, v.cardinality);
      t.values.insert(t.values.end(), row.begin(), row.end());
    }
    cpts[static_cast<std::size_t>(v.id)] = std::move(t);
  }
  std::uniform_int_distribution<int> nu(1, 3);
  std::uniform_real_distribution<double> uval(0.05, 2.0);
  const int n = static_cast<int>(vars.size());
  std::vector<Table> utils;
  const int count = nu(rng);
  for (int j = 0; j < count; ++j) {
    std::uniform_int_distribution<int> ns(1, std::min(3, n));
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    // keep every decision relevant: the first utility always touches the last decision
    Scope scope(pool.begin(), pool.begin() + ns(rng));
    if (j == 0) {
      for (int i = n - 1; i >= 0; --i)
        if (vars[static_cast<std::size_t>(i)].kind == VarKind::decision) {
          if (std::find(scope.begin(), scope.end(), i) == scope.end()) scope.push_back(i);
          break;
        }
    }
    std::size_t size = 1;
    for (int v : scope) size *= static_cast<std::size_t>(card(v));
    std::vector<double> vals(size);
    for (auto& x : vals) x = uval(rng);
    utils.push_back(utility_table(scope, vals));
  }
  return InfluenceDiagram(std::move(vars), std::move(cpts), std::move(utils),
                          additive ? UtilityMode::additive : UtilityMode::multiplicative);
}

}  // namespace

InfluenceDiagram observed_toy() {
  std::vector<Variable> vars = {{0, 2, VarKind::decision, {}},
                                {1, 2, VarKind::decision, {0}}};
  return InfluenceDiagram(vars, std::vector<Table>(2),
                          {utility_table({0, 1}, {1.0, 0.1, 0.1, 2.0})},
                          UtilityMode::multiplicative);
}

InfluenceDiagram coordination_toy() {
  std::vector<Variable> vars = {{0, 2, VarKind::decision, {}},
                                {1, 2, VarKind::decision, {}}};
  return InfluenceDiagram(vars, std::vector<Table>(2),
                          {utility_table({0, 1}, {1.0, 0.1, 0.1, 2.0})},
                          UtilityMode::multiplicative);
}

InfluenceDiagram match_problem(bool observed) {
  std::vector<Variable> vars = {{0, 2, VarKind::chance, {}},
                                {1, 2, VarKind::decision, {}}};
  if (observed) vars[1].parents = {0};
  std::vector<Table> cpts(2);
  cpts[0] = Table{{0}, {0.3, 0.7}};
  return InfluenceDiagram(vars, cpts, {utility_table({0, 1}, {1.0, 0.01, 0.01, 1.0})},
                          UtilityMode::multiplicative);
}

InfluenceDiagram single_decision() {
  std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}};
  return InfluenceDiagram(vars, std::vector<Table>(1), {utility_table({0}, {1.0, 2.0})},
                          UtilityMode::multiplicative);
}

DiscreteFactor policy_from_choice(const InfluenceDiagram& id, int d,
                                  std::vector<int> choice) {
  Scope fam = id.family(d);
  auto cards = id.cards_of(fam);
  auto f = DiscreteFactor::constant(fam, cards, kLogZero);
  const std::size_t k = static_cast<std::size_t>(id.card(d));
  for (std::size_t r = 0; r < choice.size(); ++r)
    f.mutable_log_values()[r * k + static_cast<std::size_t>(choice[r])] = 0.0;
  return f;
}

InfluenceDiagram random_pra_id(std::mt19937_64& rng, int n_vars, int max_card,
                               int n_decisions, bool additive) {
  for (;;) {
    std::uniform_int_distribution<int> cd(2, max_card);
    std::bernoulli_distribution coin(0.4);
    std::vector<int> positions(static_cast<std::size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) positions[static_cast<std::size_t>(i)] = i;
    std::shuffle(positions.begin(), positions.end(), rng);
    std::set<int> dec(positions.begin(), positions.begin() + n_decisions);
    std::vector<Variable> vars;
    std::set<int> observed;  // earlier decisions and their parents
    for (int i = 0; i < n_vars; ++i) {
      Variable v{i, cd(rng), dec.count(i) ? VarKind::decision : VarKind::chance, {}};
      if (v.kind == VarKind::decision) {
        std::set<int> pa = observed;
        for (int j = 0; j < i; ++j)
          if (!dec.count(j) && coin(rng) && pa.size() < 4) pa.insert(j);
        v.parents.assign(pa.begin(), pa.end());
        observed.insert(pa.begin(), pa.end());
        observed.insert(i);
      } else {
        for (int j = 0; j < i; ++j)
          if (coin(rng) && v.parents.size() < 2) v.parents.push_back(j);
      }
      vars.push_back(v);
    }
    InfluenceDiagram id = assemble(rng, std::move(vars), additive);
    if (count_deterministic_strategies(id) <= 4096) return id;
  }
}

InfluenceDiagram random_limid(std::mt19937_64& rng, int n_vars, int max_card,
                              int n_decisions, int max_parents, bool additive) {
  for (;;) {
    std::uniform_int_distribution<int> cd(2, max_card);
    std::bernoulli_distribution coin(0.4);
    std::vector<int> positions(static_cast<std::size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) positions[static_cast<std::size_t>(i)] = i;
    std::shuffle(positions.begin(), positions.end(), rng);
    std::set<int> dec(positions.begin(), positions.begin() + n_decisions);
    std::vector<Variable> vars;
    for (int i = 0; i < n_vars; ++i) {
      Variable v{i, cd(rng), dec.count(i) ? VarKind::decision : VarKind::chance, {}};
      for (int j = 0; j < i; ++j)
        if (coin(rng) && static_cast<int>(v.parents.size()) < max_parents)
          v.parents.push_back(j);
      vars.push_back(v);
    }
    InfluenceDiagram id = assemble(rng, std::move(vars), additive);
    if (count_deterministic_strategies(id) <= 4096) return id;
  }
}

Strategy random_strategy(const InfluenceDiagram& id, std::mt19937_64& rng) {
  return Strategy::random(id, rng);
}

}  // namespace meu::testing
