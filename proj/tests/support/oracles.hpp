#pragma once

#include <vector>

#include "meu/juncgraph.hpp"
#include "meu/model.hpp"

namespace meu::testing {

/// EU by direct enumeration of all assignments of the diagram's variables,
/// evaluating u(x) from the utility tables (sum or product) without the
/// augmented model.
double enumerate_eu(const InfluenceDiagram& id, const Strategy& s);

/// Max EU over all deterministic strategies, by enumeration with
/// enumerate_eu.
double enumerate_meu(const InfluenceDiagram& id);

/// sum over x with x_fam(d) fixed of p(x) u(x) prod_{j != d} p_j, by
/// enumeration, row-major over family(d).
std::vector<double> enumerate_local_eu(const InfluenceDiagram& id, const Strategy& s, int d);

/// All assignments of cards in row-major order.
std::vector<std::vector<int>> all_assignments(const std::vector<int>& cards);

/// Plain sum-product BP in linear space on a cluster graph, written
/// independently of the library's message code. Sweeps toward and away from
/// `root` in breadth-first order; returns normalized cluster beliefs (row
/// major over each cluster scope).
std::vector<std::vector<double>> sum_product_oracle(const JunctionGraph& jg,
                                                    const std::vector<DiscreteFactor>& factors,
                                                    int root, int iters, double tol);

}  // namespace meu::testing
