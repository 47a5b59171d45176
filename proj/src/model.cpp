#include "meu/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "meu/errors.hpp"

namespace meu {

namespace {

std::string var_name(int id) { return "variable " + std::to_string(id); }

void check_dag(const std::vector<Variable>& vars) {
  std::vector<int> indegree(vars.size(), 0);
  std::vector<std::vector<int>> children(vars.size());
  for (const auto& v : vars)
    for (int p : v.parents) {
      children[static_cast<std::size_t>(p)].push_back(v.id);
      ++indegree[static_cast<std::size_t>(v.id)];
    }
  std::vector<int> ready;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
  std::size_t seen = 0;
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    ++seen;
    for (int c : children[static_cast<std::size_t>(v)])
      if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
  }
  if (seen != vars.size()) throw InvalidModelError("parent lists contain a cycle");
}

// Indicator policy over family(d) with state choice per row.
DiscreteFactor indicator_policy(const Scope& family, const std::vector<int>& cards,
                                std::span<const int> choice) {
  auto f = DiscreteFactor::constant(family, cards, kLogZero);
  int k = cards.back();
  for (std::size_t r = 0; r < choice.size(); ++r)
    f.mutable_log_values()[r * static_cast<std::size_t>(k) +
                           static_cast<std::size_t>(choice[r])] = 0.0;
  return f;
}

// Bucket elimination along a fixed order; every variable in the factors
// must appear in the order.
double eliminate_all(std::span<const DiscreteFactor> factors,
                     const std::vector<int>& order, std::size_t cap) {
  int maxv = -1;
  for (int v : order) maxv = std::max(maxv, v);
  for (const auto& f : factors)
    for (VarId v : f.scope()) maxv = std::max(maxv, v);
  std::vector<int> pos(static_cast<std::size_t>(maxv + 1), -1);
  for (std::size_t i = 0; i < order.size(); ++i)
    pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  std::vector<std::vector<DiscreteFactor>> buckets(order.size());
  double scalar = 0.0;
  auto place = [&](DiscreteFactor f) {
    int first = -1;
    for (VarId v : f.scope()) {
      int p = pos[static_cast<std::size_t>(v)];
      if (p < 0) throw ScopeError(var_name(v) + " missing from elimination order");
      if (first < 0 || p < first) first = p;
    }
    if (first < 0)
      scalar += f.log_value(0);
    else
      buckets[static_cast<std::size_t>(first)].push_back(std::move(f));
  };
  for (const auto& f : factors) place(f);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& bucket = buckets[i];
    if (bucket.empty()) continue;
    Scope scope;
    std::size_t size = 1;
    for (const auto& f : bucket)
      for (std::size_t j = 0; j < f.scope().size(); ++j)
        if (std::find(scope.begin(), scope.end(), f.scope()[j]) == scope.end()) {
          scope.push_back(f.scope()[j]);
          size *= static_cast<std::size_t>(f.cards()[j]);
        }
    if (size > cap)
      throw ResourceCapError("elimination table of " + std::to_string(size) +
                             " entries exceeds cap");
    DiscreteFactor combined = factor_combine(bucket);
    bucket.clear();
    const VarId v = order[i];
    place(factor_reduce(combined, std::span<const VarId>(&v, 1), ReduceMode::sum));
  }
  return scalar;
}

std::size_t symbolic_max_table(const std::vector<Scope>& scopes,
                               const std::vector<int>& cards,
                               const std::vector<int>& order) {
  std::vector<std::set<int>> adj(cards.size());
  for (const auto& s : scopes)
    for (int a : s)
      for (int b : s)
        if (a != b) adj[static_cast<std::size_t>(a)].insert(b);
  std::vector<bool> gone(cards.size(), false);
  std::size_t worst = 1;
  for (int v : order) {
    std::size_t size = static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]);
    std::vector<int> nb;
    for (int u : adj[static_cast<std::size_t>(v)])
      if (!gone[static_cast<std::size_t>(u)]) {
        nb.push_back(u);
        size = size > std::numeric_limits<std::size_t>::max() / 64
                   ? std::numeric_limits<std::size_t>::max()
                   : size * static_cast<std::size_t>(cards[static_cast<std::size_t>(u)]);
      }
    worst = std::max(worst, size);
    for (int a : nb)
      for (int b : nb)
        if (a != b) adj[static_cast<std::size_t>(a)].insert(b);
    gone[static_cast<std::size_t>(v)] = true;
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// InfluenceDiagram

InfluenceDiagram::InfluenceDiagram(std::vector<Variable> variables,
                                   std::vector<Table> cpts,
                                   std::vector<Table> utilities, UtilityMode mode)
    : variables_(std::move(variables)),
      cpts_(std::move(cpts)),
      utilities_(std::move(utilities)),
      mode_(mode) {
  const std::size_t n = variables_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = variables_[i];
    if (v.id != static_cast<int>(i))
      throw InvalidModelError("variable ids must be dense 0..n-1");
    if (v.cardinality < 1) throw InvalidModelError(var_name(v.id) + " has cardinality < 1");
    std::set<int> seen;
    for (int p : v.parents) {
      if (p < 0 || static_cast<std::size_t>(p) >= n || p == v.id)
        throw InvalidModelError(var_name(v.id) + " has an invalid parent " +
                                std::to_string(p));
      if (!seen.insert(p).second)
        throw InvalidModelError(var_name(v.id) + " lists a parent twice");
    }
  }
  check_dag(variables_);

  if (cpts_.size() != n)
    throw InvalidModelError("expected one CPT slot per variable");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = variables_[i];
    const auto& t = cpts_[i];
    if (v.kind == VarKind::decision) {
      if (!t.scope.empty() || !t.values.empty())
        throw InvalidModelError("decision " + var_name(v.id) + " carries a CPT");
      continue;
    }
    if (t.scope != family(v.id))
      throw InvalidModelError("CPT of " + var_name(v.id) +
                              " must have scope parents followed by the variable");
    auto cards = cards_of(t.scope);
    if (t.values.size() != detail::table_size(cards))
      throw InvalidModelError("CPT of " + var_name(v.id) + " has wrong length");
    const std::size_t k = static_cast<std::size_t>(v.cardinality);
    for (std::size_t r = 0; r < t.values.size() / k; ++r) {
      double sum = 0.0;
      for (std::size_t s = 0; s < k; ++s) {
        double x = t.values[r * k + s];
        if (!(x >= 0.0) || !std::isfinite(x))
          throw InvalidModelError("CPT of " + var_name(v.id) + " has a negative entry");
        sum += x;
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw InvalidModelError("CPT of " + var_name(v.id) + " row " +
                                std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }

  double umax = 0.0;
  for (const auto& u : utilities_) {
    for (int v : u.scope)
      if (v < 0 || static_cast<std::size_t>(v) >= n)
        throw InvalidModelError("utility references unknown " + var_name(v));
    if (std::set<int>(u.scope.begin(), u.scope.end()).size() != u.scope.size())
      throw InvalidModelError("utility scope repeats a variable");
    if (u.values.size() != detail::table_size(cards_of(u.scope)))
      throw InvalidModelError("utility table has wrong length");
    for (double x : u.values) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw InvalidModelError("utility entries must be finite and nonnegative");
      umax = std::max(umax, x);
    }
  }
  if (!utilities_.empty() && umax <= 0.0)
    throw InvalidModelError("utility is identically zero");
  const double floor = kUtilityFloor * umax;
  for (auto& u : utilities_)
    for (double& x : u.values) x = std::max(x, floor);
}

std::vector<int> InfluenceDiagram::cards() const {
  std::vector<int> out;
  for (const auto& v : variables_) out.push_back(v.cardinality);
  return out;
}

Scope InfluenceDiagram::family(int id) const {
  Scope f = parents(id);
  f.push_back(id);
  return f;
}

std::vector<int> InfluenceDiagram::decisions() const {
  std::vector<int> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::decision) out.push_back(v.id);
  return out;
}

std::vector<int> InfluenceDiagram::chance_nodes() const {
  std::vector<int> out;
  for (const auto& v : variables_)
    if (v.kind == VarKind::chance) out.push_back(v.id);
  return out;
}

std::vector<int> InfluenceDiagram::cards_of(const Scope& scope) const {
  std::vector<int> out;
  for (int v : scope) out.push_back(card(v));
  return out;
}

DiscreteFactor InfluenceDiagram::cpt_factor(int id) const {
  const auto& t = cpt(id);
  return DiscreteFactor::from_values(t.scope, cards_of(t.scope), t.values);
}

DiscreteFactor InfluenceDiagram::utility_factor(std::size_t j) const {
  const auto& t = utilities_.at(j);
  return DiscreteFactor::from_values(t.scope, cards_of(t.scope), t.values);
}

// ---------------------------------------------------------------------------
// Strategy

Strategy Strategy::uniform(const InfluenceDiagram& id) {
  Strategy s;
  for (int d : id.decisions()) {
    Scope fam = id.family(d);
    s.policies_.emplace(d, DiscreteFactor::constant(fam, id.cards_of(fam),
                                                    -std::log(static_cast<double>(id.card(d)))));
  }
  return s;
}

Strategy Strategy::random(const InfluenceDiagram& id, std::mt19937_64& rng) {
  Strategy s;
  std::exponential_distribution<double> gamma1(1.0);
  for (int d : id.decisions()) {
    Scope fam = id.family(d);
    auto cards = id.cards_of(fam);
    const std::size_t k = static_cast<std::size_t>(id.card(d));
    std::vector<double> vals(detail::table_size(cards));
    for (std::size_t r = 0; r < vals.size() / k; ++r) {
      double sum = 0.0;
      for (std::size_t x = 0; x < k; ++x) {
        vals[r * k + x] = gamma1(rng) + 1e-300;
        sum += vals[r * k + x];
      }
      for (std::size_t x = 0; x < k; ++x) vals[r * k + x] /= sum;
    }
    s.policies_.emplace(d, DiscreteFactor::from_values(fam, cards, vals));
  }
  return s;
}

Strategy Strategy::constant_state(const InfluenceDiagram& id, int state) {
  Strategy s;
  for (int d : id.decisions()) {
    Scope fam = id.family(d);
    auto cards = id.cards_of(fam);
    std::vector<int> choice(detail::table_size(cards) / static_cast<std::size_t>(id.card(d)),
                            state);
    s.policies_.emplace(d, indicator_policy(fam, cards, choice));
  }
  return s;
}

const DiscreteFactor& Strategy::policy(int d) const {
  auto it = policies_.find(d);
  if (it == policies_.end())
    throw InvalidModelError("missing policy for decision " + std::to_string(d));
  return it->second;
}

void Strategy::set_policy(int d, DiscreteFactor policy) {
  policies_.insert_or_assign(d, std::move(policy));
}

std::vector<DiscreteFactor> Strategy::factors() const {
  std::vector<DiscreteFactor> out;
  for (const auto& [d, f] : policies_) out.push_back(f);
  return out;
}

bool Strategy::is_deterministic() const {
  for (const auto& [d, f] : policies_) {
    const std::size_t k = static_cast<std::size_t>(f.cards().back());
    for (std::size_t r = 0; r < f.size() / k; ++r) {
      int ones = 0;
      for (std::size_t x = 0; x < k; ++x) {
        double v = f.log_value(r * k + x);
        if (v == 0.0)
          ++ones;
        else if (v != kLogZero)
          return false;
      }
      if (ones != 1) return false;
    }
  }
  return true;
}

void Strategy::validate(const InfluenceDiagram& id) const {
  for (int d : id.decisions()) {
    const auto& f = policy(d);
    if (f.scope() != id.family(d))
      throw InvalidModelError("policy of decision " + std::to_string(d) +
                              " has the wrong scope");
    const std::size_t k = static_cast<std::size_t>(id.card(d));
    for (std::size_t r = 0; r < f.size() / k; ++r) {
      double sum = 0.0;
      for (std::size_t x = 0; x < k; ++x) sum += f.value(r * k + x);
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw InvalidModelError("policy row of decision " + std::to_string(d) +
                                " does not sum to one");
    }
  }
}

Strategy round_strategy(const Strategy& s) {
  Strategy out;
  for (const auto& [d, f] : s.policies()) {
    const std::size_t k = static_cast<std::size_t>(f.cards().back());
    std::vector<int> choice(f.size() / k);
    for (std::size_t r = 0; r < choice.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t x = 1; x < k; ++x)
        if (f.log_value(r * k + x) > f.log_value(r * k + best)) best = x;
      choice[r] = static_cast<int>(best);
    }
    out.set_policy(d, indicator_policy(f.scope(), f.cards(), choice));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmented model and evaluation

AugmentedModel build_augmented_model(const InfluenceDiagram& id) {
  if (id.utilities().empty()) throw InvalidModelError("influence diagram has no utility");
  AugmentedModel m;
  m.cards = id.cards();
  for (int c : id.chance_nodes()) m.factors.push_back(id.cpt_factor(c));
  if (id.mode() == UtilityMode::multiplicative) {
    for (std::size_t j = 0; j < id.utilities().size(); ++j)
      m.factors.push_back(id.utility_factor(j));
    return m;
  }
  const int s = static_cast<int>(id.num_vars());
  const int ns = static_cast<int>(id.utilities().size());
  m.selector = s;
  m.cards.push_back(ns);
  for (int j = 0; j < ns; ++j) {
    DiscreteFactor u = id.utility_factor(static_cast<std::size_t>(j));
    Scope scope = u.scope();
    scope.push_back(s);
    std::vector<int> cards = u.cards();
    cards.push_back(ns);
    auto f = DiscreteFactor::constant(scope, cards, 0.0);
    auto& vals = f.mutable_log_values();
    for (std::size_t r = 0; r < u.size(); ++r)
      vals[r * static_cast<std::size_t>(ns) + static_cast<std::size_t>(j)] = u.log_value(r);
    m.factors.push_back(std::move(f));
  }
  return m;
}

std::vector<int> min_fill_order(const std::vector<Scope>& scopes,
                                const std::vector<int>& vars) {
  return min_fill_order_blocks(scopes, {vars});
}

std::vector<int> min_fill_order_blocks(const std::vector<Scope>& scopes,
                                       const std::vector<std::vector<int>>& blocks) {
  std::set<int> all;
  for (const auto& b : blocks) all.insert(b.begin(), b.end());
  int maxv = all.empty() ? 0 : *all.rbegin();
  for (const auto& s : scopes)
    for (int v : s) maxv = std::max(maxv, v);
  std::vector<std::set<int>> adj(static_cast<std::size_t>(maxv) + 1);
  for (const auto& s : scopes)
    for (int a : s)
      for (int b : s)
        if (a != b && all.count(a) && all.count(b)) adj[static_cast<std::size_t>(a)].insert(b);
  std::vector<int> order;
  for (const auto& block : blocks) {
    std::set<int> live(block.begin(), block.end());
    while (!live.empty()) {
      int best = -1;
      std::size_t best_fill = 0, best_deg = 0;
      for (int v : live) {
        const auto& nb = adj[static_cast<std::size_t>(v)];
        std::size_t fill = 0;
        for (auto a = nb.begin(); a != nb.end(); ++a)
          for (auto b = std::next(a); b != nb.end(); ++b)
            if (!adj[static_cast<std::size_t>(*a)].count(*b)) ++fill;
        if (best < 0 || fill < best_fill || (fill == best_fill && nb.size() < best_deg)) {
          best = v;
          best_fill = fill;
          best_deg = nb.size();
        }
      }
      const auto nb = adj[static_cast<std::size_t>(best)];
      for (int a : nb) {
        adj[static_cast<std::size_t>(a)].erase(best);
        for (int b : nb)
          if (a != b) adj[static_cast<std::size_t>(a)].insert(b);
      }
      adj[static_cast<std::size_t>(best)].clear();
      live.erase(best);
      order.push_back(best);
    }
  }
  return order;
}

double log_partition(std::span<const DiscreteFactor> factors, std::size_t cap) {
  std::vector<Scope> scopes;
  std::set<int> vars;
  for (const auto& f : factors) {
    scopes.push_back(f.scope());
    vars.insert(f.scope().begin(), f.scope().end());
  }
  return eliminate_all(factors, min_fill_order(scopes, {vars.begin(), vars.end()}), cap);
}

EuEvaluator::EuEvaluator(const InfluenceDiagram& id, std::size_t cap)
    : id_(&id), aug_(build_augmented_model(id)), cap_(cap) {
  std::vector<Scope> scopes;
  for (const auto& f : aug_.factors) scopes.push_back(f.scope());
  for (int d : id.decisions()) scopes.push_back(id.family(d));
  std::vector<int> all(aug_.num_vars());
  std::iota(all.begin(), all.end(), 0);
  order_ = min_fill_order(scopes, all);
  max_table_ = symbolic_max_table(scopes, aug_.cards, order_);
  if (max_table_ > cap_)
    throw ResourceCapError("exact expected-utility evaluation needs a table of " +
                           std::to_string(max_table_) + " entries");
}

double EuEvaluator::log_eu(const Strategy& s) const {
  std::vector<DiscreteFactor> fs = aug_.factors;
  for (int d : id_->decisions()) {
    const auto& p = s.policy(d);
    if (p.scope() != id_->family(d))
      throw ScopeError("policy of decision " + std::to_string(d) + " has the wrong scope");
    fs.push_back(p);
  }
  return eliminate_all(fs, order_, cap_);
}

double EuEvaluator::eu(const Strategy& s) const { return std::exp(log_eu(s)); }

double log_expected_utility(const InfluenceDiagram& id, const Strategy& s) {
  return EuEvaluator(id).log_eu(s);
}

double expected_utility(const InfluenceDiagram& id, const Strategy& s) {
  return std::exp(log_expected_utility(id, s));
}

std::size_t count_deterministic_strategies(const InfluenceDiagram& id) {
  const std::size_t top = std::numeric_limits<std::size_t>::max();
  std::size_t total = 1;
  for (int d : id.decisions()) {
    std::size_t rows = 1;
    for (int p : id.parents(d)) {
      if (rows > top / static_cast<std::size_t>(id.card(p))) return top;
      rows *= static_cast<std::size_t>(id.card(p));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (total > top / static_cast<std::size_t>(id.card(d))) return top;
      total *= static_cast<std::size_t>(id.card(d));
    }
  }
  return total;
}

MeuResult brute_force_meu(const InfluenceDiagram& id, std::size_t cap) {
  const std::size_t count = count_deterministic_strategies(id);
  if (count > cap)
    throw ResourceCapError("brute force would enumerate " + std::to_string(count) +
                           " strategies");
  EuEvaluator eval(id);
  const auto decisions = id.decisions();
  std::vector<Scope> fams;
  std::vector<std::vector<int>> fam_cards;
  std::vector<std::vector<int>> choice;
  for (int d : decisions) {
    fams.push_back(id.family(d));
    fam_cards.push_back(id.cards_of(fams.back()));
    choice.emplace_back(detail::table_size(fam_cards.back()) /
                            static_cast<std::size_t>(id.card(d)),
                        0);
  }
  MeuResult best;
  bool first = true;
  for (;;) {
    Strategy s;
    for (std::size_t i = 0; i < decisions.size(); ++i)
      s.set_policy(decisions[i], indicator_policy(fams[i], fam_cards[i], choice[i]));
    double v = eval.log_eu(s);
    if (first || v > best.log_meu + 1e-12 * std::max(1.0, std::abs(best.log_meu))) {
      best.log_meu = v;
      best.strategy = std::move(s);
      first = false;
    }
    // lexicographic successor: last digit fastest
    bool advanced = false;
    for (std::size_t i = decisions.size(); i-- > 0 && !advanced;) {
      const int k = id.card(decisions[i]);
      for (std::size_t r = choice[i].size(); r-- > 0;) {
        if (++choice[i][r] < k) {
          advanced = true;
          break;
        }
        choice[i][r] = 0;
      }
    }
    if (!advanced) break;
  }
  best.meu = std::exp(best.log_meu);
  return best;
}

// ---------------------------------------------------------------------------
// Joint tables and the dual objective

Scope JointTable::scope() const {
  Scope s(cards.size());
  std::iota(s.begin(), s.end(), 0);
  return s;
}

DiscreteFactor JointTable::as_factor() const {
  return DiscreteFactor::from_values(scope(), cards, values);
}

JointTable joint_from_factors(const std::vector<int>& cards,
                              std::span<const DiscreteFactor> factors,
                              std::size_t cap) {
  const std::size_t n = detail::table_size(cards);
  if (n > cap)
    throw ResourceCapError("joint table of " + std::to_string(n) + " entries exceeds cap");
  Scope all(cards.size());
  std::iota(all.begin(), all.end(), 0);
  auto joint = DiscreteFactor::constant(all, cards, 0.0);
  auto& vals = joint.mutable_log_values();
  for (const auto& f : factors) {
    detail::Walker w(joint.cards(), detail::strides_for(f, all));
    for (std::size_t i = 0; i < n; ++i, w.next()) vals[i] += f.log_value(w.offset());
  }
  double z = factor_log_sum(joint);
  if (z == kLogZero) throw DegenerateSliceError("joint has zero normalizer");
  JointTable t{cards, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) t.values[i] = std::exp(vals[i] - z);
  return t;
}

JointTable strategy_induced_joint(const InfluenceDiagram& id, const Strategy& s,
                                  std::size_t cap) {
  AugmentedModel m = build_augmented_model(id);
  std::vector<DiscreteFactor> fs = m.factors;
  for (int d : id.decisions()) fs.push_back(s.policy(d));
  return joint_from_factors(m.cards, fs, cap);
}

double entropy(const DiscreteFactor& p) {
  double h = 0.0;
  for (double lv : p.log_values())
    if (lv != kLogZero) h -= std::exp(lv) * lv;
  return h;
}

double conditional_entropy(const DiscreteFactor& p, VarId child) {
  return entropy(p) - entropy(factor_reduce(p, std::span<const VarId>(&child, 1),
                                            ReduceMode::sum));
}

double dual_objective(const JointTable& tau, const InfluenceDiagram& id, double eps) {
  AugmentedModel m = build_augmented_model(id);
  if (tau.cards != m.cards)
    throw ScopeError("joint table does not match the augmented model's variables");
  double total = std::accumulate(tau.values.begin(), tau.values.end(), 0.0);
  if (std::abs(total - 1.0) > kRowTolerance)
    throw InvalidModelError("joint table is not normalized");
  const Scope all = tau.scope();
  const std::size_t n = tau.values.size();
  std::vector<double> theta(n, 0.0);
  for (const auto& f : m.factors) {
    detail::Walker w(tau.cards, detail::strides_for(f, all));
    for (std::size_t i = 0; i < n; ++i, w.next()) theta[i] += f.log_value(w.offset());
  }
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (tau.values[i] > 0.0) energy += tau.values[i] * theta[i];
  DiscreteFactor joint = tau.as_factor();
  double value = energy + entropy(joint);
  for (int d : id.decisions()) {
    DiscreteFactor fam = factor_marginal(joint, id.family(d));
    value -= (1.0 - eps) * conditional_entropy(fam, d);
  }
  return value;
}

}  // namespace meu
