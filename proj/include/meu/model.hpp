#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "meu/factor.hpp"

namespace meu {

enum class VarKind { chance, decision };
enum class UtilityMode { additive, multiplicative };

struct Variable {
  int id = 0;
  int cardinality = 2;
  VarKind kind = VarKind::chance;
  std::vector<int> parents;

  bool operator==(const Variable&) const = default;
};

/// A table in linear space. Kept linear inside the diagram so that text
/// round trips are exact.
struct Table {
  Scope scope;
  std::vector<double> values;

  bool operator==(const Table&) const = default;
};

inline constexpr double kUtilityFloor = 1e-12;
inline constexpr double kRowTolerance = 1e-9;

/// Discrete influence diagram: a DAG of chance and decision variables, one
/// CPT per chance variable and a decomposable utility.
///
/// A CPT's scope is the variable's parents followed by the variable itself.
/// Utility entries are clamped below at kUtilityFloor times the largest
/// utility entry when the diagram is constructed.
class InfluenceDiagram {
 public:
  InfluenceDiagram() = default;
  /// `cpts` is indexed by variable id; entries for decisions must be empty.
  InfluenceDiagram(std::vector<Variable> variables, std::vector<Table> cpts,
                   std::vector<Table> utilities, UtilityMode mode);

  std::size_t num_vars() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(int id) const { return variables_[static_cast<std::size_t>(id)]; }
  int card(int id) const { return variable(id).cardinality; }
  std::vector<int> cards() const;
  bool is_decision(int id) const { return variable(id).kind == VarKind::decision; }
  const std::vector<int>& parents(int id) const { return variable(id).parents; }
  /// Parents followed by the variable.
  Scope family(int id) const;
  std::vector<int> decisions() const;
  std::vector<int> chance_nodes() const;

  const Table& cpt(int id) const { return cpts_[static_cast<std::size_t>(id)]; }
  const std::vector<Table>& cpts() const { return cpts_; }
  const std::vector<Table>& utilities() const { return utilities_; }
  UtilityMode mode() const { return mode_; }

  DiscreteFactor cpt_factor(int id) const;
  DiscreteFactor utility_factor(std::size_t j) const;
  std::vector<int> cards_of(const Scope& scope) const;

  bool operator==(const InfluenceDiagram&) const = default;

 private:
  std::vector<Variable> variables_;
  std::vector<Table> cpts_;
  std::vector<Table> utilities_;
  UtilityMode mode_ = UtilityMode::multiplicative;
};

/// Per-decision conditional tables p(x_d | x_pa(d)), each a DiscreteFactor
/// over family(d) (parents first, decision last).
class Strategy {
 public:
  Strategy() = default;

  static Strategy uniform(const InfluenceDiagram& id);
  /// Rows drawn from a flat Dirichlet.
  static Strategy random(const InfluenceDiagram& id, std::mt19937_64& rng);
  /// Every decision always picks state 0.
  static Strategy constant_state(const InfluenceDiagram& id, int state = 0);

  bool contains(int d) const { return policies_.count(d) > 0; }
  const DiscreteFactor& policy(int d) const;
  void set_policy(int d, DiscreteFactor policy);
  const std::map<int, DiscreteFactor>& policies() const { return policies_; }
  std::vector<DiscreteFactor> factors() const;

  /// True iff every row is an indicator.
  bool is_deterministic() const;
  /// Throws InvalidModelError unless every row sums to one.
  void validate(const InfluenceDiagram& id) const;
  /// Linear-space row values of one decision (row-major, decision fastest).
  std::vector<double> table(int d) const { return policy(d).values(); }

 private:
  std::map<int, DiscreteFactor> policies_;
};

/// Factor list whose product is exp(theta(x)), possibly over an extra
/// selector variable that decomposes an additive utility.
struct AugmentedModel {
  std::vector<int> cards;  // per variable id, selector included
  std::vector<DiscreteFactor> factors;
  std::optional<int> selector;

  std::size_t num_vars() const { return cards.size(); }
};

/// Full explicit distribution over every variable id (desk scale only).
struct JointTable {
  std::vector<int> cards;
  std::vector<double> values;

  Scope scope() const;
  DiscreteFactor as_factor() const;
};

inline constexpr std::size_t kJointCap = 10'000'000;
inline constexpr std::size_t kStrategyCap = 1'000'000;
inline constexpr std::size_t kEliminationCap = 10'000'000;

struct MeuResult {
  double meu = 0.0;
  double log_meu = kLogZero;
  Strategy strategy;
};

AugmentedModel build_augmented_model(const InfluenceDiagram& id);

/// Sum-product variable elimination of all variables; returns log of the
/// total mass. Uses a greedy min-fill order.
double log_partition(std::span<const DiscreteFactor> factors,
                     std::size_t cap = kEliminationCap);

/// Greedy min-fill order over the interaction graph of `scopes`
/// restricted to `vars` (ties to lowest id).
std::vector<int> min_fill_order(const std::vector<Scope>& scopes,
                                const std::vector<int>& vars);

/// Min-fill inside each block, blocks eliminated in the given order.
std::vector<int> min_fill_order_blocks(const std::vector<Scope>& scopes,
                                       const std::vector<std::vector<int>>& blocks);

/// Evaluates expected utilities of many strategies on one diagram.
class EuEvaluator {
 public:
  explicit EuEvaluator(const InfluenceDiagram& id,
                       std::size_t cap = kEliminationCap);

  double log_eu(const Strategy& s) const;
  double eu(const Strategy& s) const;
  /// Largest intermediate table the fixed elimination order creates.
  std::size_t max_table() const { return max_table_; }
  const InfluenceDiagram& diagram() const { return *id_; }
  const AugmentedModel& augmented() const { return aug_; }

 private:
  const InfluenceDiagram* id_;
  AugmentedModel aug_;
  std::vector<int> order_;
  std::size_t max_table_ = 0;
  std::size_t cap_;
};

double log_expected_utility(const InfluenceDiagram& id, const Strategy& s);
double expected_utility(const InfluenceDiagram& id, const Strategy& s);

/// Enumerates every deterministic strategy; ties go to the lexicographically
/// smallest encoding.
MeuResult brute_force_meu(const InfluenceDiagram& id,
                          std::size_t cap = kStrategyCap);

/// Number of deterministic strategies, saturating at SIZE_MAX.
std::size_t count_deterministic_strategies(const InfluenceDiagram& id);

/// Row-wise argmax; ties to the lowest state.
Strategy round_strategy(const Strategy& s);

/// Joint of the product of factors over cards (all variables).
JointTable joint_from_factors(const std::vector<int>& cards,
                              std::span<const DiscreteFactor> factors,
                              std::size_t cap = kJointCap);

/// tau_delta(x) proportional to exp(theta(x)) * prod p_delta.
JointTable strategy_induced_joint(const InfluenceDiagram& id, const Strategy& s,
                                  std::size_t cap = kJointCap);

/// <theta, tau> + H(x) - (1 - eps) * sum_d H(x_d | x_pa(d)).
double dual_objective(const JointTable& tau, const InfluenceDiagram& id,
                      double eps);

/// Entropy of a normalized table (0 log 0 = 0).
double entropy(const DiscreteFactor& p);
/// H(child | rest) for a normalized table over a scope containing child.
double conditional_entropy(const DiscreteFactor& p, VarId child);

}  // namespace meu
