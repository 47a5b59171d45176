#pragma once

#include <optional>
#include <vector>

#include "meu/model.hpp"

namespace meu {

/// Blocks r_0, d_1, r_1, ..., d_m, r_m. `chance_blocks` has m + 1 entries.
struct TemporalOrder {
  std::vector<std::vector<int>> chance_blocks;
  std::vector<int> decisions;

  bool operator==(const TemporalOrder&) const = default;
};

/// Temporal order under which every decision observes all earlier decisions
/// and their parents, or nullopt if none exists.
std::optional<TemporalOrder> check_perfect_recall(const InfluenceDiagram& id);

/// Exact MEU by constrained bucket elimination (sum over r_m, max over d_m,
/// ..., sum over r_0). Ties in the extracted policies go to the lowest state.
/// `elim_order` may fix the order inside each block; empty means min-fill.
MeuResult sum_max_sum(const InfluenceDiagram& id, const TemporalOrder& order,
                      std::size_t cap = kEliminationCap,
                      std::vector<int> elim_order = {});

/// Elimination order over the augmented model's variables: reverse temporal
/// blocks with min-fill inside each block when the diagram has perfect
/// recall (selector eliminated with r_m), plain min-fill otherwise.
std::vector<int> default_elimination_order(const InfluenceDiagram& id,
                                           const AugmentedModel& model);

}  // namespace meu
