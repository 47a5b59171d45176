#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meu/model.hpp"

namespace meu {

/// A decision variable and its family {d} ∪ pa(d), decision last.
struct DecisionFamily {
  int decision = 0;
  Scope family;
};

std::vector<DecisionFamily> decision_families(const InfluenceDiagram& id);

struct Cluster {
  int id = 0;
  Scope scope;               // sorted ascending
  std::vector<int> factors;  // indices into AugmentedModel::factors
  std::optional<int> decision;
  Scope decision_family;  // pa(d) then d, set with `decision`
};

struct Edge {
  int a = 0;
  int b = 0;
  Scope separator;  // sorted ascending
};

/// Clusters joined by separators. Edge e is traversed as directed edge 2e
/// (a -> b) and 2e+1 (b -> a).
struct JunctionGraph {
  std::vector<int> cards;  // per variable id
  std::vector<Cluster> clusters;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> incident;  // edge ids per cluster
  bool is_tree = false;

  std::size_t num_clusters() const { return clusters.size(); }
  /// Cluster holding decision d, or -1.
  int cluster_of_decision(int d) const;
  /// Largest cluster table size.
  std::size_t max_cluster_size() const;
};

struct ConsistencyCertificate {
  int root = 0;
  std::vector<int> parent;  // -1 at the root
  std::vector<int> consistent_decisions;  // ascending
};

/// Elimination-tree junction tree. Decision families are seeded as cliques;
/// every cluster whose scope is a subset of a neighbour is merged into it,
/// except the elimination clique of a decision, so decisions keep separate
/// clusters. An empty order means min-fill over all variables.
JunctionGraph build_junction_tree(const AugmentedModel& model,
                                  const std::vector<DecisionFamily>& decisions,
                                  std::vector<int> elim_order = {},
                                  std::size_t cap = kEliminationCap);

/// Factor-graph shaped join graph: one cluster per decision family, one per
/// factor and one singleton per variable; factor and decision clusters link
/// to the singletons of their scope.
JunctionGraph build_loopy_junction_graph(const AugmentedModel& model,
                                         const std::vector<DecisionFamily>& decisions);

bool verify_running_intersection(const JunctionGraph& jg);

ConsistencyCertificate find_consistency_certificate(const JunctionGraph& jg,
                                                    const std::vector<DecisionFamily>& decisions);

/// Maps every decision to the smallest cluster containing its family (ties
/// to the lowest id) with at most one decision per cluster.
JunctionGraph assign_decision_clusters(JunctionGraph jg,
                                       const std::vector<DecisionFamily>& decisions);

/// Line-oriented dump: one `cluster` line per cluster and one `edge` line per
/// edge.
std::string dump_graph(const JunctionGraph& jg);

}  // namespace meu
