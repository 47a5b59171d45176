#include "meu/exact.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "meu/errors.hpp"

namespace meu {

namespace {

std::set<int> descendants(const InfluenceDiagram& id, int root) {
  std::vector<std::vector<int>> children(id.num_vars());
  for (const auto& v : id.variables())
    for (int p : v.parents) children[static_cast<std::size_t>(p)].push_back(v.id);
  std::set<int> out;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int c : children[static_cast<std::size_t>(v)])
      if (out.insert(c).second) stack.push_back(c);
  }
  return out;
}

void validate_order(const InfluenceDiagram& id, const TemporalOrder& order) {
  if (order.chance_blocks.size() != order.decisions.size() + 1)
    throw InvalidModelError("temporal order needs one more chance block than decisions");
  std::vector<int> seen(id.num_vars(), 0);
  auto mark = [&](int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= id.num_vars() || seen[static_cast<std::size_t>(v)]++)
      throw InvalidModelError("temporal order repeats or misses variable " + std::to_string(v));
  };
  for (const auto& b : order.chance_blocks)
    for (int v : b) {
      mark(v);
      if (id.is_decision(v)) throw InvalidModelError("decision inside a chance block");
    }
  for (int d : order.decisions) {
    mark(d);
    if (!id.is_decision(d)) throw InvalidModelError("chance variable in a decision slot");
  }
  if (std::count(seen.begin(), seen.end(), 1) != static_cast<long>(id.num_vars()))
    throw InvalidModelError("temporal order does not cover every variable");

  std::set<int> observed;
  for (std::size_t i = 0; i < order.decisions.size(); ++i) {
    observed.insert(order.chance_blocks[i].begin(), order.chance_blocks[i].end());
    const int d = order.decisions[i];
    for (int p : id.parents(d))
      if (!observed.count(p))
        throw InvalidModelError("parent " + std::to_string(p) + " of decision " +
                                std::to_string(d) + " comes after it in the temporal order");
    auto desc = descendants(id, d);
    for (int v : observed)
      if (desc.count(v))
        throw InvalidModelError("variable " + std::to_string(v) + " precedes its ancestor " +
                                std::to_string(d));
    observed.insert(d);
  }
}

// Blocks in elimination order: r_m (+ selector), d_m, r_{m-1}, ..., d_1, r_0.
std::vector<std::vector<int>> elimination_blocks(const TemporalOrder& order,
                                                 const AugmentedModel& model) {
  std::vector<std::vector<int>> blocks;
  const std::size_t m = order.decisions.size();
  blocks.push_back(order.chance_blocks[m]);
  if (model.selector) blocks.back().push_back(*model.selector);
  for (std::size_t i = m; i-- > 0;) {
    blocks.push_back({order.decisions[i]});
    blocks.push_back(order.chance_blocks[i]);
  }
  return blocks;
}

DiscreteFactor argmax_policy(const DiscreteFactor& bucket, const InfluenceDiagram& id, int d) {
  const Scope fam = id.family(d);
  const auto cards = id.cards_of(fam);
  for (VarId v : bucket.scope())
    if (std::find(fam.begin(), fam.end(), v) == fam.end())
      throw InvalidModelError("decision " + std::to_string(d) +
                              " bucket depends on an unobserved variable");
  const DiscreteFactor f = factor_align(bucket, fam, cards);
  const std::size_t k = static_cast<std::size_t>(id.card(d));
  std::vector<double> out(f.size(), kLogZero);
  for (std::size_t r = 0; r < f.size() / k; ++r) {
    std::size_t best = 0;
    for (std::size_t x = 1; x < k; ++x)
      if (f.log_value(r * k + x) > f.log_value(r * k + best)) best = x;
    out[r * k + best] = 0.0;
  }
  return DiscreteFactor(fam, cards, std::move(out));
}

}  // namespace

std::optional<TemporalOrder> check_perfect_recall(const InfluenceDiagram& id) {
  std::vector<int> left = id.decisions();
  TemporalOrder order;
  std::set<int> used;
  auto contains_all = [](const std::vector<int>& big, const Scope& small) {
    for (int v : small)
      if (std::find(big.begin(), big.end(), v) == big.end()) return false;
    return true;
  };
  while (!left.empty()) {
    int pick = -1;
    for (int d : left) {
      bool ok = true;
      for (int e : left)
        if (e != d && !contains_all(id.parents(e), id.family(d))) ok = false;
      if (ok) {
        pick = d;
        break;
      }
    }
    if (pick < 0) return std::nullopt;
    std::vector<int> block;
    for (int p : id.parents(pick))
      if (!id.is_decision(p) && used.insert(p).second) block.push_back(p);
    std::sort(block.begin(), block.end());
    order.chance_blocks.push_back(std::move(block));
    order.decisions.push_back(pick);
    left.erase(std::find(left.begin(), left.end(), pick));
  }
  std::vector<int> rest;
  for (int c : id.chance_nodes())
    if (!used.count(c)) rest.push_back(c);
  order.chance_blocks.push_back(std::move(rest));
  return order;
}

MeuResult sum_max_sum(const InfluenceDiagram& id, const TemporalOrder& order, std::size_t cap,
                      std::vector<int> elim_order) {
  validate_order(id, order);
  const AugmentedModel model = build_augmented_model(id);
  std::vector<Scope> scopes;
  for (const auto& f : model.factors) scopes.push_back(f.scope());
  const auto blocks = elimination_blocks(order, model);
  if (elim_order.empty()) {
    elim_order = min_fill_order_blocks(scopes, blocks);
  } else {
    std::size_t at = 0;
    for (const auto& b : blocks) {
      if (at + b.size() > elim_order.size() ||
          !std::is_permutation(b.begin(), b.end(), elim_order.begin() + static_cast<long>(at)))
        throw InvalidModelError("elimination order crosses a temporal block");
      at += b.size();
    }
    if (at != elim_order.size()) throw InvalidModelError("elimination order has extra variables");
  }
  const auto& elim = elim_order;

  std::vector<int> pos(model.num_vars(), -1);
  for (std::size_t i = 0; i < elim.size(); ++i) pos[static_cast<std::size_t>(elim[i])] = static_cast<int>(i);
  std::vector<std::vector<DiscreteFactor>> buckets(elim.size());
  double scalar = 0.0;
  auto place = [&](DiscreteFactor f) {
    int first = -1;
    for (VarId v : f.scope()) {
      int p = pos[static_cast<std::size_t>(v)];
      if (first < 0 || p < first) first = p;
    }
    if (first < 0)
      scalar += f.log_value(0);
    else
      buckets[static_cast<std::size_t>(first)].push_back(std::move(f));
  };
  for (const auto& f : model.factors) place(f);

  MeuResult result;
  for (std::size_t i = 0; i < elim.size(); ++i) {
    const VarId v = elim[i];
    const bool is_dec = v < static_cast<int>(id.num_vars()) && id.is_decision(v);
    auto& bucket = buckets[i];
    if (bucket.empty()) {
      if (is_dec)
        result.strategy.set_policy(v, argmax_policy(DiscreteFactor::constant({v}, {id.card(v)}), id, v));
      continue;
    }
    std::size_t size = 1;
    Scope seen;
    for (const auto& f : bucket)
      for (std::size_t j = 0; j < f.scope().size(); ++j)
        if (std::find(seen.begin(), seen.end(), f.scope()[j]) == seen.end()) {
          seen.push_back(f.scope()[j]);
          size *= static_cast<std::size_t>(f.cards()[j]);
        }
    if (size > cap)
      throw ResourceCapError("constrained elimination needs a table of " + std::to_string(size) +
                             " entries");
    DiscreteFactor combined = factor_combine(bucket);
    bucket.clear();
    if (is_dec) result.strategy.set_policy(v, argmax_policy(combined, id, v));
    place(factor_reduce(combined, std::span<const VarId>(&v, 1),
                        is_dec ? ReduceMode::max : ReduceMode::sum));
  }
  result.log_meu = scalar;
  result.meu = std::exp(scalar);
  return result;
}

std::vector<int> default_elimination_order(const InfluenceDiagram& id, const AugmentedModel& model) {
  std::vector<Scope> scopes;
  for (const auto& f : model.factors) scopes.push_back(f.scope());
  for (int d : id.decisions()) scopes.push_back(id.family(d));
  if (auto order = check_perfect_recall(id)) return min_fill_order_blocks(scopes, elimination_blocks(*order, model));
  std::vector<int> all(model.num_vars());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return min_fill_order(scopes, all);
}

}  // namespace meu
