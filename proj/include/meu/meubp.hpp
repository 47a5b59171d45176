#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "meu/juncgraph.hpp"
#include "meu/model.hpp"
#include "meu/trace.hpp"

namespace meu {

/// Ties at zero temperature: log-values within this distance of the row max.
inline constexpr double kTieTolerance = 1e-12;

/// b_eps(x_d | x_pa) from a cluster table b: marginalize onto pa(d) and d,
/// then power-normalize each row with exponent 1/eps. At eps = 0 each row is
/// uniform over its argmax states. The result is over `family` (pa then d).
/// Throws DegenerateSliceError on an all-zero row.
DiscreteFactor anneal_policy(const DiscreteFactor& b, const Scope& family, double eps);

/// b(x_c) * b_eps(x_d | x_pa)^(1 - eps).
DiscreteFactor sigma(const DiscreteFactor& b, const Scope& family, double eps);

/// One log-space message per directed edge: 2e is a -> b, 2e+1 is b -> a.
struct MessageSet {
  std::vector<DiscreteFactor> messages;
};

/// MEU-beliefs b (cluster and separator tables) and the marginals tau,
/// all normalized. Separator marginals coincide with separator beliefs.
struct Beliefs {
  double epsilon = 0.0;
  std::vector<DiscreteFactor> cluster;
  std::vector<DiscreteFactor> separator;
  std::vector<DiscreteFactor> tau_cluster;
};

struct BpOptions {
  enum class Schedule { fixed, anneal, zero };

  Schedule schedule = Schedule::zero;
  double epsilon = 1.0;  // for Schedule::fixed
  double damping = 0.0;
  double tolerance = 1e-8;
  int max_iters = 100;
  int root = 0;
  /// Breaks zero-temperature ties with a fixed tiny bias on decision
  /// clusters drawn from this seed.
  std::optional<std::uint64_t> tie_seed;

  /// Temperature of outer iteration t (counted from 1).
  double temperature(int t) const;
  void validate() const;
};

/// Labels and the expected-utility callback used to fill trace rows.
struct TraceContext {
  std::string algorithm;
  std::string junction;
  std::uint64_t seed = 0;
  std::function<double(const Strategy&)> eu;
};

/// Message state of MEU-BP on one junction graph.
class MeuBp {
 public:
  MeuBp(const JunctionGraph& jg, std::vector<DiscreteFactor> potentials);

  /// Product of each cluster's assigned factors, over the cluster scope.
  static std::vector<DiscreteFactor> cluster_potentials(const JunctionGraph& jg,
                                                        const AugmentedModel& model);

  const JunctionGraph& graph() const { return *jg_; }
  const std::vector<DiscreteFactor>& potentials() const { return potentials_; }
  void set_potentials(std::vector<DiscreteFactor> potentials);
  const MessageSet& messages() const { return messages_; }
  void set_messages(MessageSet m);
  void reset_messages();
  /// Entries uniform on (0, 1], then normalized.
  void randomize_messages(std::mt19937_64& rng);
  void set_root(int root);

  int source(int directed) const;
  int target(int directed) const;

  /// Sum over c_k \ s_kl of psi_k times every incoming message except l's.
  DiscreteFactor sum_message(int directed) const;
  /// Sum over c_k \ s_kl of sigma[psi_k m_k; eps] divided by m_{l->k}.
  DiscreteFactor meu_message(int directed, double eps) const;
  /// Recomputes one message (MEU form from decision clusters), damps it and
  /// returns the largest absolute log change.
  double update(int directed, double eps, double damping);
  /// Forward then backward pass over the breadth-first order from the root.
  double sweep(double eps, double damping);

  /// Normalized psi_k times all incoming messages.
  DiscreteFactor cluster_belief(int k) const;
  Beliefs beliefs(double eps) const;
  /// Same as extract_strategy(beliefs(eps)) (soft_strategy when lenient),
  /// without building the non-decision beliefs.
  Strategy strategy(double eps, bool lenient) const;

 private:
  DiscreteFactor incoming_product(int k, int skip_edge) const;

  const JunctionGraph* jg_;
  std::vector<DiscreteFactor> potentials_;
  MessageSet messages_;
  std::vector<int> forward_;   // directed edges of the forward pass
  std::vector<int> backward_;  // directed edges of the backward pass
};

struct BpRun {
  Beliefs beliefs;
  MessageSet messages;
  SolveTrace trace;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  Strategy soft;                 // strategy at the last iteration
  Strategy best_rounded;         // best rounded strategy seen (needs ctx.eu)
  double best_rounded_eu = -1.0;
};

/// Iterates sweeps with the temperature schedule until the residual drops
/// below the tolerance or max_iters is reached.
BpRun run_bp(MeuBp& engine, const BpOptions& options, const TraceContext* ctx = nullptr);
BpRun run_bp(const JunctionGraph& jg, const AugmentedModel& model, const BpOptions& options,
             const TraceContext* ctx = nullptr);

/// Per decision cluster, b_eps(x_d | x_pa) of its belief. Throws
/// DegenerateSliceError on an all-zero row.
Strategy extract_strategy(const Beliefs& beliefs, const JunctionGraph& jg);
/// Same, but rows without mass become uniform.
Strategy soft_strategy(const Beliefs& beliefs, const JunctionGraph& jg);

/// Max over x of |log q(x) - log(prod b_c / prod b_s) - c| for the best c.
double check_reparameterization(const AugmentedModel& model, const Beliefs& beliefs,
                                const JunctionGraph& jg, std::size_t cap = kJointCap);

struct ConsistencyReport {
  std::vector<double> edge_residual;  // per edge, worst of both endpoints
  double max_residual = 0.0;
};

/// Sum-consistency for normal clusters and MEU-consistency (through sigma)
/// for decision clusters, as max absolute differences of normalized tables.
ConsistencyReport check_fixed_point_consistency(const Beliefs& beliefs, const JunctionGraph& jg,
                                                double eps);

/// <theta, tau> + sum H(c_k) - (1 - eps) sum_decision H(d | pa) - sum H(s_kl),
/// with theta given by the cluster potentials.
double junction_free_energy(const Beliefs& tau, const std::vector<DiscreteFactor>& potentials,
                            const JunctionGraph& jg, double eps);

}  // namespace meu
