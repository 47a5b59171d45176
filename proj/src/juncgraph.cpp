#include "meu/juncgraph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>

#include "meu/errors.hpp"

namespace meu {

namespace {

bool subset_of(const Scope& a, const Scope& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

Scope sorted(Scope s) {
  std::sort(s.begin(), s.end());
  return s;
}

std::size_t table_size_of(const Scope& scope, const std::vector<int>& cards) {
  std::size_t n = 1;
  for (int v : scope) {
    n *= static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]);
    if (n > (std::size_t{1} << 60)) return n;
  }
  return n;
}

void rebuild_incidence(JunctionGraph& jg) {
  jg.incident.assign(jg.clusters.size(), {});
  for (std::size_t e = 0; e < jg.edges.size(); ++e) {
    jg.incident[static_cast<std::size_t>(jg.edges[e].a)].push_back(static_cast<int>(e));
    jg.incident[static_cast<std::size_t>(jg.edges[e].b)].push_back(static_cast<int>(e));
  }
}

std::vector<int> components(const JunctionGraph& jg) {
  std::vector<int> comp(jg.clusters.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < jg.clusters.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{static_cast<int>(s)};
    comp[s] = next;
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      for (int e : jg.incident[static_cast<std::size_t>(c)]) {
        int o = jg.edges[static_cast<std::size_t>(e)].a == c ? jg.edges[static_cast<std::size_t>(e)].b
                                                             : jg.edges[static_cast<std::size_t>(e)].a;
        if (comp[static_cast<std::size_t>(o)] < 0) {
          comp[static_cast<std::size_t>(o)] = next;
          stack.push_back(o);
        }
      }
    }
    ++next;
  }
  return comp;
}

bool acyclic(const JunctionGraph& jg) {
  auto comp = components(jg);
  int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  return jg.edges.size() + static_cast<std::size_t>(ncomp) == jg.clusters.size();
}

// Kuhn matching of decisions to clusters, trying candidates smallest first.
std::optional<std::vector<int>> match_decisions(const JunctionGraph& jg,
                                                const std::vector<DecisionFamily>& decisions,
                                                std::vector<int>* unmatched) {
  const std::size_t nd = decisions.size();
  std::vector<std::vector<int>> cand(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    Scope fam = sorted(decisions[i].family);
    for (const auto& c : jg.clusters)
      if (subset_of(fam, c.scope)) cand[i].push_back(c.id);
    std::stable_sort(cand[i].begin(), cand[i].end(), [&](int a, int b) {
      return jg.clusters[static_cast<std::size_t>(a)].scope.size() <
             jg.clusters[static_cast<std::size_t>(b)].scope.size();
    });
    if (cand[i].empty())
      throw InvalidModelError("no cluster contains the family of decision " +
                              std::to_string(decisions[i].decision));
  }
  std::vector<int> owner(jg.clusters.size(), -1), match(nd, -1);
  std::vector<char> seen;
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (int c : cand[i]) {
      if (seen[static_cast<std::size_t>(c)]) continue;
      seen[static_cast<std::size_t>(c)] = 1;
      int o = owner[static_cast<std::size_t>(c)];
      if (o < 0 || self(self, static_cast<std::size_t>(o))) {
        owner[static_cast<std::size_t>(c)] = static_cast<int>(i);
        match[i] = c;
        return true;
      }
    }
    return false;
  };
  bool ok = true;
  for (std::size_t i = 0; i < nd; ++i) {
    seen.assign(jg.clusters.size(), 0);
    if (!augment(augment, i)) {
      ok = false;
      if (unmatched) unmatched->push_back(static_cast<int>(i));
    }
  }
  if (!ok) return std::nullopt;
  return match;
}

void assign_factors_to_smallest(JunctionGraph& jg, const AugmentedModel& model) {
  for (auto& c : jg.clusters) c.factors.clear();
  for (std::size_t f = 0; f < model.factors.size(); ++f) {
    Scope s = sorted(model.factors[f].scope());
    int best = -1;
    for (const auto& c : jg.clusters)
      if (subset_of(s, c.scope) &&
          (best < 0 || c.scope.size() < jg.clusters[static_cast<std::size_t>(best)].scope.size()))
        best = c.id;
    if (best < 0) throw ScopeError("factor " + std::to_string(f) + " fits in no cluster");
    jg.clusters[static_cast<std::size_t>(best)].factors.push_back(static_cast<int>(f));
  }
}

}  // namespace

std::vector<DecisionFamily> decision_families(const InfluenceDiagram& id) {
  std::vector<DecisionFamily> out;
  for (int d : id.decisions()) out.push_back({d, id.family(d)});
  return out;
}

int JunctionGraph::cluster_of_decision(int d) const {
  for (const auto& c : clusters)
    if (c.decision && *c.decision == d) return c.id;
  return -1;
}

std::size_t JunctionGraph::max_cluster_size() const {
  std::size_t m = 0;
  for (const auto& c : clusters) m = std::max(m, table_size_of(c.scope, cards));
  return m;
}

JunctionGraph build_junction_tree(const AugmentedModel& model,
                                  const std::vector<DecisionFamily>& decisions,
                                  std::vector<int> elim_order, std::size_t cap) {
  const std::size_t n = model.num_vars();
  std::vector<Scope> scopes;
  for (const auto& f : model.factors) scopes.push_back(f.scope());
  for (const auto& d : decisions) scopes.push_back(d.family);

  if (elim_order.empty()) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    elim_order = min_fill_order(scopes, all);
  }
  {
    std::vector<int> check = elim_order;
    std::sort(check.begin(), check.end());
    std::vector<int> want(n);
    std::iota(want.begin(), want.end(), 0);
    if (check != want) throw InvalidModelError("elimination order is not a permutation");
  }

  std::vector<std::set<int>> adj(n);
  for (const auto& s : scopes)
    for (int a : s)
      for (int b : s)
        if (a != b) adj[static_cast<std::size_t>(a)].insert(b);

  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[static_cast<std::size_t>(elim_order[i])] = static_cast<int>(i);

  // one elimination clique per variable, indexed by elimination position
  std::vector<Scope> clique(n);
  std::vector<int> parent(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = elim_order[i];
    const auto nb = adj[static_cast<std::size_t>(v)];
    Scope c(nb.begin(), nb.end());
    c.push_back(v);
    clique[i] = sorted(c);
    if (table_size_of(clique[i], model.cards) > cap)
      throw ResourceCapError("junction tree cluster exceeds " + std::to_string(cap) + " entries");
    int first = -1;
    for (int u : nb)
      if (first < 0 || pos[static_cast<std::size_t>(u)] < first) first = pos[static_cast<std::size_t>(u)];
    parent[i] = first;
    for (int a : nb) {
      adj[static_cast<std::size_t>(a)].erase(v);
      for (int b : nb)
        if (a != b) adj[static_cast<std::size_t>(a)].insert(b);
    }
    adj[static_cast<std::size_t>(v)].clear();
  }

  std::vector<char> keep_own(n, 0);
  for (const auto& d : decisions) keep_own[static_cast<std::size_t>(pos[static_cast<std::size_t>(d.decision)])] = 1;

  // edge list over clique indices; merge redundant cliques
  struct E {
    int a, b;
    Scope sep;
    bool alive;
  };
  std::vector<E> es;
  for (std::size_t i = 0; i < n; ++i)
    if (parent[i] >= 0) {
      Scope sep = clique[i];
      sep.erase(std::find(sep.begin(), sep.end(), elim_order[i]));
      es.push_back({static_cast<int>(i), parent[i], sep, true});
    }
  std::vector<char> alive(n, 1);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n && !changed; ++i) {
      if (!alive[i] || keep_own[i]) continue;
      for (auto& e : es) {
        if (!e.alive || (e.a != static_cast<int>(i) && e.b != static_cast<int>(i))) continue;
        const int other = e.a == static_cast<int>(i) ? e.b : e.a;
        if (!subset_of(clique[i], clique[static_cast<std::size_t>(other)])) continue;
        e.alive = false;
        for (auto& f : es) {
          if (!f.alive) continue;
          if (f.a == static_cast<int>(i)) f.a = other;
          if (f.b == static_cast<int>(i)) f.b = other;
        }
        alive[i] = 0;
        changed = true;
        break;
      }
    }
  }

  JunctionGraph jg;
  jg.cards = model.cards;
  std::vector<int> remap(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) {
      remap[i] = static_cast<int>(jg.clusters.size());
      jg.clusters.push_back({remap[i], clique[i], {}, std::nullopt, {}});
    }
  if (jg.clusters.empty()) jg.clusters.push_back({0, {}, {}, std::nullopt, {}});
  for (const auto& e : es)
    if (e.alive)
      jg.edges.push_back({remap[static_cast<std::size_t>(e.a)], remap[static_cast<std::size_t>(e.b)], e.sep});
  rebuild_incidence(jg);

  // join the elimination forest into one tree with empty separators
  auto comp = components(jg);
  std::vector<int> first_of;
  for (std::size_t c = 0; c < jg.clusters.size(); ++c) {
    if (static_cast<std::size_t>(comp[c]) >= first_of.size()) first_of.push_back(static_cast<int>(c));
  }
  for (std::size_t k = 1; k < first_of.size(); ++k) jg.edges.push_back({first_of[0], first_of[k], {}});
  rebuild_incidence(jg);
  jg.is_tree = true;

  assign_factors_to_smallest(jg, model);

  // a decision whose family only fits a cluster already claimed gets its own
  // leaf cluster hanging off the smallest container
  std::vector<int> unmatched;
  if (!match_decisions(jg, decisions, &unmatched)) {
    for (int i : unmatched) {
      Scope fam = sorted(decisions[static_cast<std::size_t>(i)].family);
      int best = -1;
      for (const auto& c : jg.clusters)
        if (subset_of(fam, c.scope) &&
            (best < 0 || c.scope.size() < jg.clusters[static_cast<std::size_t>(best)].scope.size()))
          best = c.id;
      const int id = static_cast<int>(jg.clusters.size());
      jg.clusters.push_back({id, fam, {}, std::nullopt, {}});
      jg.edges.push_back({id, best, fam});
    }
    rebuild_incidence(jg);
  }
  return assign_decision_clusters(std::move(jg), decisions);
}

JunctionGraph build_loopy_junction_graph(const AugmentedModel& model,
                                         const std::vector<DecisionFamily>& decisions) {
  JunctionGraph jg;
  jg.cards = model.cards;
  auto link_to_singletons = [&](int c, std::size_t singleton_base) {
    for (int v : jg.clusters[static_cast<std::size_t>(c)].scope)
      jg.edges.push_back({c, static_cast<int>(singleton_base) + v, {v}});
  };
  for (const auto& d : decisions)
    jg.clusters.push_back({static_cast<int>(jg.clusters.size()), sorted(d.family), {}, std::nullopt, {}});
  for (std::size_t f = 0; f < model.factors.size(); ++f)
    jg.clusters.push_back({static_cast<int>(jg.clusters.size()), sorted(model.factors[f].scope()),
                           {static_cast<int>(f)}, std::nullopt, {}});
  const std::size_t base = jg.clusters.size();
  for (std::size_t c = 0; c < base; ++c) link_to_singletons(static_cast<int>(c), base);
  for (std::size_t v = 0; v < model.num_vars(); ++v)
    jg.clusters.push_back({static_cast<int>(jg.clusters.size()), {static_cast<int>(v)}, {}, std::nullopt, {}});
  rebuild_incidence(jg);
  jg.is_tree = acyclic(jg);
  return assign_decision_clusters(std::move(jg), decisions);
}

bool verify_running_intersection(const JunctionGraph& jg) {
  for (const auto& e : jg.edges) {
    if (e.a == e.b) return false;
    if (!subset_of(e.separator, jg.clusters[static_cast<std::size_t>(e.a)].scope) ||
        !subset_of(e.separator, jg.clusters[static_cast<std::size_t>(e.b)].scope))
      return false;
  }
  std::set<int> vars;
  for (const auto& c : jg.clusters) vars.insert(c.scope.begin(), c.scope.end());
  for (int v : vars) {
    std::vector<int> nodes;
    for (const auto& c : jg.clusters)
      if (std::binary_search(c.scope.begin(), c.scope.end(), v)) nodes.push_back(c.id);
    std::vector<const Edge*> es;
    for (const auto& e : jg.edges)
      if (std::binary_search(e.separator.begin(), e.separator.end(), v)) es.push_back(&e);
    if (es.size() + 1 != nodes.size()) return false;
    // union-find connectivity over the induced subgraph
    std::vector<int> up(jg.clusters.size());
    std::iota(up.begin(), up.end(), 0);
    auto find = [&](int x) {
      while (up[static_cast<std::size_t>(x)] != x) x = up[static_cast<std::size_t>(x)] = up[static_cast<std::size_t>(up[static_cast<std::size_t>(x)])];
      return x;
    };
    for (const Edge* e : es) {
      int ra = find(e->a), rb = find(e->b);
      if (ra == rb) return false;
      up[static_cast<std::size_t>(ra)] = rb;
    }
  }
  return true;
}

ConsistencyCertificate find_consistency_certificate(const JunctionGraph& jg,
                                                    const std::vector<DecisionFamily>& decisions) {
  if (!jg.is_tree) throw InvalidModelError("consistency certificates need a tree");
  ConsistencyCertificate best;
  best.root = -1;
  for (std::size_t r = 0; r < jg.clusters.size(); ++r) {
    std::vector<int> parent(jg.clusters.size(), -2), parent_edge(jg.clusters.size(), -1);
    auto bfs = [&](int root) {
      parent[static_cast<std::size_t>(root)] = -1;
      std::queue<int> q;
      q.push(root);
      while (!q.empty()) {
        int c = q.front();
        q.pop();
        for (int e : jg.incident[static_cast<std::size_t>(c)]) {
          const auto& ed = jg.edges[static_cast<std::size_t>(e)];
          int o = ed.a == c ? ed.b : ed.a;
          if (parent[static_cast<std::size_t>(o)] != -2) continue;
          parent[static_cast<std::size_t>(o)] = c;
          parent_edge[static_cast<std::size_t>(o)] = e;
          q.push(o);
        }
      }
    };
    bfs(static_cast<int>(r));
    for (std::size_t c = 0; c < jg.clusters.size(); ++c)
      if (parent[c] == -2) bfs(static_cast<int>(c));

    std::vector<int> good;
    for (const auto& d : decisions) {
      int k = jg.cluster_of_decision(d.decision);
      if (k < 0) continue;
      int e = parent_edge[static_cast<std::size_t>(k)];
      if (e >= 0) {
        Scope pa = sorted(Scope(d.family.begin(), d.family.end() - 1));
        if (!subset_of(jg.edges[static_cast<std::size_t>(e)].separator, pa)) continue;
      }
      good.push_back(d.decision);
    }
    std::sort(good.begin(), good.end());
    if (best.root < 0 || good.size() > best.consistent_decisions.size()) {
      best.root = static_cast<int>(r);
      best.parent = parent;
      best.consistent_decisions = good;
    }
  }
  if (best.root < 0) best.root = 0;
  return best;
}

JunctionGraph assign_decision_clusters(JunctionGraph jg,
                                       const std::vector<DecisionFamily>& decisions) {
  for (auto& c : jg.clusters) {
    c.decision.reset();
    c.decision_family.clear();
  }
  auto match = match_decisions(jg, decisions, nullptr);
  if (!match) throw InvalidModelError("two decisions are forced into the same cluster");
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto& c = jg.clusters[static_cast<std::size_t>((*match)[i])];
    c.decision = decisions[i].decision;
    c.decision_family = decisions[i].family;
  }
  return jg;
}

std::string dump_graph(const JunctionGraph& jg) {
  auto list = [](const std::vector<int>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "}";
  };
  std::string out = jg.is_tree ? "tree\n" : "graph\n";
  for (const auto& c : jg.clusters) {
    out += "cluster " + std::to_string(c.id) + " scope " + list(c.scope) + " factors " +
           list(c.factors) + " decision " + (c.decision ? std::to_string(*c.decision) : "-") + "\n";
  }
  for (const auto& e : jg.edges)
    out += "edge " + std::to_string(e.a) + " " + std::to_string(e.b) + " sep " + list(e.separator) + "\n";
  return out;
}

}  // namespace meu
