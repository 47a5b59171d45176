#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meu/juncgraph.hpp"
#include "meu/meubp.hpp"
#include "meu/model.hpp"
#include "meu/trace.hpp"

namespace meu {

enum class Algorithm { spu, bp_zero, anneal_bp, anneal_bp_perturbed, prox_bp };
enum class JunctionKind { tree, loopy };
enum class ProxWeights { constant, harmonic };

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::bp_zero;
  JunctionKind junction = JunctionKind::tree;
  ProxWeights weights = ProxWeights::constant;
  int inner_cap = 5;
  int restarts = 1;
  std::uint64_t seed = 0;  // restart r runs with seed + r
  int max_iters = 100;
  double tolerance = 1e-8;           // message residual
  double strategy_tolerance = 1e-6;  // max row total variation between outer steps
  double damping = 0.0;
  double perturb_scale = 0.1;  // eta_0 = scale * max |log psi|
  bool tie_break = false;      // BP-0: tiny seeded bias on decision clusters
  bool parallel = false;       // run restarts on separate threads
  bool start_at_zero = false;  // restart 0 starts from the all-zero policy instead of uniform

  void validate() const;
};

/// Names used in traces, configs and on the command line.
std::string algorithm_name(Algorithm a, ProxWeights w = ProxWeights::constant);
std::string junction_name(JunctionKind k);
/// Accepts the names above (case-insensitive); `weights` is set for Prox-BP.
Algorithm parse_algorithm(const std::string& name, ProxWeights* weights = nullptr);
JunctionKind parse_junction(const std::string& name);

struct SolveResult {
  Strategy strategy;  // best deterministic strategy found
  double eu = 0.0;
  double log_eu = kLogZero;
  bool eu_exact = true;  // false when EU comes from the Bethe estimate
  SolveTrace trace;
  /// EU after every policy update (SPU) or outer iteration (others), of the
  /// strategy held at that point.
  std::vector<double> eu_history;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  int restart = 0;  // index of the winning restart
  int failed_restarts = 0;
};

/// Everything the solvers share for one diagram: the augmented model, the
/// junction graph of the requested kind and an EU evaluator. When exact EU
/// needs tables above `cap`, EU falls back to the Bethe estimate on a loopy
/// graph.
class SolverContext {
 public:
  SolverContext(const InfluenceDiagram& id, JunctionKind kind, std::size_t cap = kEliminationCap);
  ~SolverContext();
  SolverContext(const SolverContext&) = delete;
  SolverContext& operator=(const SolverContext&) = delete;

  const InfluenceDiagram& diagram() const { return *id_; }
  const AugmentedModel& augmented() const { return aug_; }
  const JunctionGraph& graph() const { return jg_; }
  JunctionKind kind() const { return kind_; }
  /// Sweep root: the certificate root on trees, 0 otherwise.
  int root() const { return root_; }
  const std::vector<DiscreteFactor>& base_potentials() const { return potentials_; }

  bool exact_eu() const { return exact_ != nullptr; }
  double log_eu(const Strategy& s) const;
  double eu(const Strategy& s) const;

  /// Cluster potentials with weight * log p_d added to each decision
  /// cluster (decision `skip` left out).
  std::vector<DiscreteFactor> potentials_with(const Strategy& s, double weight = 1.0,
                                              int skip = -1) const;

 private:
  const InfluenceDiagram* id_;
  AugmentedModel aug_;
  JunctionGraph jg_;
  JunctionKind kind_;
  int root_ = 0;
  std::vector<DiscreteFactor> potentials_;
  std::unique_ptr<EuEvaluator> exact_;
  JunctionGraph bethe_graph_;  // used only without exact_
};

/// Where BP variants start: explicit messages, the sum-product messages of a
/// given strategy, or uniform messages when both are empty.
struct BpInit {
  std::optional<MessageSet> messages;
  std::optional<Strategy> strategy;
};

/// Single policy updates in decision-id order until a sweep changes nothing
/// or max_iters sweeps. Expectations come from sum-product on ctx.graph().
SolveResult run_spu(const SolverContext& ctx, const Strategy& init, const AlgorithmSpec& spec = {},
                    std::uint64_t seed = 0);

SolveResult run_bp_zero(const SolverContext& ctx, const AlgorithmSpec& spec = {},
                        const BpInit& init = {}, std::uint64_t seed = 0);

/// eps^t = 1/t. The perturbed form adds (eta_0 / t) * z to every finite
/// log-potential entry, z ~ U(-1, 1) drawn once from the seed, and finishes
/// with one unperturbed sweep.
SolveResult run_anneal_bp(const SolverContext& ctx, const AlgorithmSpec& spec, bool perturbed,
                          const BpInit& init = {}, std::uint64_t seed = 0);

/// Proximal updates: theta^t = theta + w^t sum_d log tau^t_d, solved by at
/// most spec.inner_cap warm-started sweeps at temperature w^t. `init` must
/// be strictly positive. Throws DegenerateSliceError when a row collapses.
SolveResult run_prox_bp(const SolverContext& ctx, const Strategy& init,
                        const AlgorithmSpec& spec = {}, std::uint64_t seed = 0);

/// Runs spec.algorithm once per restart (restart 0 from uniform, the rest
/// from random policies or messages) and keeps the best EU, ties to the
/// lowest restart. Traces of all restarts are concatenated.
SolveResult run_with_restarts(const SolverContext& ctx, const AlgorithmSpec& spec);
SolveResult solve(const InfluenceDiagram& id, const AlgorithmSpec& spec);

}  // namespace meu
