#pragma once

#include <cstdint>
#include <random>

#include "meu/model.hpp"

namespace meu::testing {

/// Two binary decisions, d2 observes d1; u(0,0)=1, u(1,1)=2, else 0.1.
InfluenceDiagram observed_toy();
/// Same utility, neither decision observes the other.
InfluenceDiagram coordination_toy();
/// Chance c with p(c=1)=0.7; decision d (observing c iff `observed`);
/// u = 1 if d == c else 0.01.
InfluenceDiagram match_problem(bool observed);
/// Single decision without parents, u(d) = (1, 2).
InfluenceDiagram single_decision();

/// Deterministic policy table for decision d from one state per row.
DiscreteFactor policy_from_choice(const InfluenceDiagram& id, int d,
                                  std::vector<int> choice);

/// Random diagram with perfect recall: decisions chained so each observes
/// the earlier decisions and their parents.
InfluenceDiagram random_pra_id(std::mt19937_64& rng, int n_vars, int max_card,
                               int n_decisions, bool additive);

/// Random limited-memory diagram (no recall constraint).
InfluenceDiagram random_limid(std::mt19937_64& rng, int n_vars, int max_card,
                              int n_decisions, int max_parents, bool additive);

/// Random normalized strategy with strictly positive rows.
Strategy random_strategy(const InfluenceDiagram& id, std::mt19937_64& rng);

}  // namespace meu::testing
