#include "meu/meubp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>

#include "meu/errors.hpp"

namespace meu {

namespace {

// table[i] += scale * f(x_i) where f's scope is a subset of the table scope
void accumulate(std::vector<double>& table, const Scope& scope, const std::vector<int>& cards,
                const DiscreteFactor& f, double scale = 1.0) {
  if (f.scope().empty()) {
    for (double& x : table) x += scale * f.log_value(0);
    return;
  }
  detail::Walker w(cards, detail::strides_for(f, scope));
  for (double& x : table) {
    const double v = f.log_value(w.offset());
    if (v == kLogZero)
      x = kLogZero;
    else
      x += scale * v;
    w.next();
  }
}

double max_abs_log_change(const DiscreteFactor& a, const DiscreteFactor& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.log_value(i), y = b.log_value(i);
    if (x == kLogZero && y == kLogZero) continue;
    if (x == kLogZero || y == kLogZero) return std::numeric_limits<double>::infinity();
    r = std::max(r, std::abs(x - y));
  }
  return r;
}

DiscreteFactor uniform_over(const Scope& scope, const std::vector<int>& all_cards) {
  std::vector<int> cards;
  std::size_t n = 1;
  for (int v : scope) {
    cards.push_back(all_cards[static_cast<std::size_t>(v)]);
    n *= static_cast<std::size_t>(cards.back());
  }
  return DiscreteFactor::constant(scope, cards, -std::log(static_cast<double>(n)));
}

DiscreteFactor normalized_or_throw(const DiscreteFactor& f) {
  if (factor_log_sum(f) == kLogZero) throw NumericalSupportError("message has no support");
  return factor_normalize(f);
}

// Row-wise log b_eps over a table whose last scope variable is the decision.
std::vector<double> policy_rows(const DiscreteFactor& marg, double eps, bool lenient) {
  const std::size_t k = static_cast<std::size_t>(marg.cards().back());
  const auto& lv = marg.log_values();
  std::vector<double> out(lv.size(), kLogZero);
  for (std::size_t r = 0; r < lv.size() / k; ++r) {
    const double* row = lv.data() + r * k;
    double* dst = out.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    if (mx == kLogZero) {
      if (!lenient) throw DegenerateSliceError("policy row has no support");
      for (std::size_t x = 0; x < k; ++x) dst[x] = -std::log(static_cast<double>(k));
      continue;
    }
    if (eps == 0.0) {
      std::size_t ties = 0;
      for (std::size_t x = 0; x < k; ++x)
        if (row[x] >= mx - kTieTolerance) ++ties;
      for (std::size_t x = 0; x < k; ++x)
        if (row[x] >= mx - kTieTolerance) dst[x] = -std::log(static_cast<double>(ties));
    } else {
      double z = 0.0;
      for (std::size_t x = 0; x < k; ++x)
        if (row[x] != kLogZero) z += std::exp((row[x] - mx) / eps);
      const double lz = std::log(z);
      for (std::size_t x = 0; x < k; ++x)
        if (row[x] != kLogZero) dst[x] = (row[x] - mx) / eps - lz;
    }
  }
  return out;
}

DiscreteFactor policy_of(const DiscreteFactor& b, const Scope& family, double eps, bool lenient) {
  if (eps < 0.0) throw InvalidModelError("temperature must be nonnegative");
  if (family.empty()) throw ScopeError("empty decision family");
  DiscreteFactor marg = factor_marginal(b, family);
  auto rows = policy_rows(marg, eps, lenient);
  return DiscreteFactor(marg.scope(), marg.cards(), std::move(rows));
}

DiscreteFactor sigma_of(const DiscreteFactor& b, const Scope& family, double eps, bool lenient) {
  if (eps == 1.0) return b;
  DiscreteFactor pol = policy_of(b, family, eps, lenient);
  std::vector<double> vals = b.log_values();
  accumulate(vals, b.scope(), b.cards(), pol, 1.0 - eps);
  return DiscreteFactor(b.scope(), b.cards(), std::move(vals));
}

Strategy strategy_from(const Beliefs& beliefs, const JunctionGraph& jg, bool lenient) {
  Strategy s;
  for (const auto& c : jg.clusters)
    if (c.decision)
      s.set_policy(*c.decision,
                   policy_of(beliefs.cluster[static_cast<std::size_t>(c.id)], c.decision_family,
                             beliefs.epsilon, lenient));
  return s;
}

}  // namespace

DiscreteFactor anneal_policy(const DiscreteFactor& b, const Scope& family, double eps) {
  return policy_of(b, family, eps, false);
}

DiscreteFactor sigma(const DiscreteFactor& b, const Scope& family, double eps) {
  return sigma_of(b, family, eps, false);
}

double BpOptions::temperature(int t) const {
  switch (schedule) {
    case Schedule::fixed:
      return epsilon;
    case Schedule::anneal:
      return 1.0 / static_cast<double>(std::max(t, 1));
    case Schedule::zero:
      break;
  }
  return 0.0;
}

void BpOptions::validate() const {
  if (!(tolerance > 0.0)) throw InvalidModelError("tolerance must be positive");
  if (max_iters < 1) throw InvalidModelError("max_iters must be at least 1");
  if (!(damping >= 0.0 && damping < 1.0)) throw InvalidModelError("damping must lie in [0, 1)");
  if (schedule == Schedule::fixed && !(epsilon >= 0.0 && epsilon <= 1.0))
    throw InvalidModelError("temperature must lie in [0, 1]");
}

MeuBp::MeuBp(const JunctionGraph& jg, std::vector<DiscreteFactor> potentials) : jg_(&jg) {
  set_potentials(std::move(potentials));
  reset_messages();
  set_root(0);
}

std::vector<DiscreteFactor> MeuBp::cluster_potentials(const JunctionGraph& jg,
                                                      const AugmentedModel& model) {
  std::vector<DiscreteFactor> out;
  for (const auto& c : jg.clusters) {
    std::vector<int> cards;
    for (int v : c.scope) cards.push_back(jg.cards[static_cast<std::size_t>(v)]);
    DiscreteFactor psi = DiscreteFactor::constant(c.scope, cards, 0.0);
    std::vector<double> vals = psi.log_values();
    for (int f : c.factors) accumulate(vals, c.scope, cards, model.factors[static_cast<std::size_t>(f)]);
    out.emplace_back(c.scope, cards, std::move(vals));
  }
  return out;
}

void MeuBp::set_potentials(std::vector<DiscreteFactor> potentials) {
  if (potentials.size() != jg_->clusters.size())
    throw ScopeError("one potential per cluster expected");
  for (std::size_t k = 0; k < potentials.size(); ++k)
    if (potentials[k].scope() != jg_->clusters[k].scope)
      throw ScopeError("potential scope differs from cluster " + std::to_string(k));
  potentials_ = std::move(potentials);
}

void MeuBp::set_messages(MessageSet m) {
  if (m.messages.size() != 2 * jg_->edges.size()) throw ScopeError("wrong number of messages");
  messages_ = std::move(m);
}

void MeuBp::reset_messages() {
  messages_.messages.clear();
  for (const auto& e : jg_->edges) {
    messages_.messages.push_back(uniform_over(e.separator, jg_->cards));
    messages_.messages.push_back(uniform_over(e.separator, jg_->cards));
  }
}

void MeuBp::randomize_messages(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : messages_.messages) {
    std::vector<double> vals(m.size());
    for (double& v : vals) v = 1.0 - u(rng);  // (0, 1]
    m = factor_normalize(DiscreteFactor::from_values(m.scope(), m.cards(), vals));
  }
}

void MeuBp::set_root(int root) {
  const std::size_t n = jg_->clusters.size();
  if (root < 0 || static_cast<std::size_t>(root) >= std::max<std::size_t>(n, 1))
    throw InvalidModelError("sweep root out of range");
  std::vector<int> rank(n, -1), order;
  auto bfs = [&](int r) {
    std::queue<int> q;
    q.push(r);
    rank[static_cast<std::size_t>(r)] = static_cast<int>(order.size());
    order.push_back(r);
    while (!q.empty()) {
      int c = q.front();
      q.pop();
      for (int e : jg_->incident[static_cast<std::size_t>(c)]) {
        const auto& ed = jg_->edges[static_cast<std::size_t>(e)];
        int o = ed.a == c ? ed.b : ed.a;
        if (rank[static_cast<std::size_t>(o)] >= 0) continue;
        rank[static_cast<std::size_t>(o)] = static_cast<int>(order.size());
        order.push_back(o);
        q.push(o);
      }
    }
  };
  if (n) bfs(root);
  for (std::size_t c = 0; c < n; ++c)
    if (rank[c] < 0) bfs(static_cast<int>(c));

  forward_.clear();
  backward_.clear();
  auto out_edges = [&](int k, bool toward_root) {
    for (int e : jg_->incident[static_cast<std::size_t>(k)]) {
      const auto& ed = jg_->edges[static_cast<std::size_t>(e)];
      const int l = ed.a == k ? ed.b : ed.a;
      const int dir = ed.a == k ? 2 * e : 2 * e + 1;
      const bool earlier = rank[static_cast<std::size_t>(l)] < rank[static_cast<std::size_t>(k)];
      if (earlier == toward_root) (toward_root ? forward_ : backward_).push_back(dir);
    }
  };
  for (auto it = order.rbegin(); it != order.rend(); ++it) out_edges(*it, true);
  for (int k : order) out_edges(k, false);
}

int MeuBp::source(int directed) const {
  const auto& e = jg_->edges[static_cast<std::size_t>(directed / 2)];
  return directed % 2 == 0 ? e.a : e.b;
}

int MeuBp::target(int directed) const {
  const auto& e = jg_->edges[static_cast<std::size_t>(directed / 2)];
  return directed % 2 == 0 ? e.b : e.a;
}

DiscreteFactor MeuBp::incoming_product(int k, int skip_edge) const {
  const auto& psi = potentials_[static_cast<std::size_t>(k)];
  std::vector<double> vals = psi.log_values();
  for (int e : jg_->incident[static_cast<std::size_t>(k)]) {
    if (e == skip_edge) continue;
    const int into = jg_->edges[static_cast<std::size_t>(e)].b == k ? 2 * e : 2 * e + 1;
    accumulate(vals, psi.scope(), psi.cards(), messages_.messages[static_cast<std::size_t>(into)]);
  }
  return DiscreteFactor(psi.scope(), psi.cards(), std::move(vals));
}

DiscreteFactor MeuBp::sum_message(int directed) const {
  const int k = source(directed);
  const auto& sep = jg_->edges[static_cast<std::size_t>(directed / 2)].separator;
  return normalized_or_throw(factor_marginal(incoming_product(k, directed / 2), sep));
}

DiscreteFactor MeuBp::meu_message(int directed, double eps) const {
  const int k = source(directed);
  const auto& cl = jg_->clusters[static_cast<std::size_t>(k)];
  if (!cl.decision || eps == 1.0) return sum_message(directed);
  // sigma(b) / m_{l->k} with the division cancelled symbolically: the policy
  // comes from the full belief, the rest from the exclusive product. Equal to
  // the quotient wherever m_{l->k} > 0 and to its eps -> 0+ limit elsewhere.
  const auto& sep = jg_->edges[static_cast<std::size_t>(directed / 2)].separator;
  DiscreteFactor pol = policy_of(incoming_product(k, -1), cl.decision_family, eps, true);
  DiscreteFactor rest = incoming_product(k, directed / 2);
  std::vector<double> vals = rest.log_values();
  accumulate(vals, rest.scope(), rest.cards(), pol, 1.0 - eps);
  return normalized_or_throw(
      factor_marginal(DiscreteFactor(rest.scope(), rest.cards(), std::move(vals)), sep));
}

double MeuBp::update(int directed, double eps, double damping) {
  DiscreteFactor fresh = meu_message(directed, eps);
  auto& old = messages_.messages[static_cast<std::size_t>(directed)];
  if (damping > 0.0) {
    std::vector<double> vals = fresh.log_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double o = old.log_value(i);
      vals[i] = (vals[i] == kLogZero || o == kLogZero) ? kLogZero
                                                       : (1.0 - damping) * vals[i] + damping * o;
    }
    fresh = factor_normalize(DiscreteFactor(fresh.scope(), fresh.cards(), std::move(vals)));
  }
  const double r = max_abs_log_change(fresh, old);
  old = std::move(fresh);
  return r;
}

double MeuBp::sweep(double eps, double damping) {
  double r = 0.0;
  for (int d : forward_) r = std::max(r, update(d, eps, damping));
  for (int d : backward_) r = std::max(r, update(d, eps, damping));
  return r;
}

DiscreteFactor MeuBp::cluster_belief(int k) const {
  return normalized_or_throw(incoming_product(k, -1));
}

Beliefs MeuBp::beliefs(double eps) const {
  Beliefs b;
  b.epsilon = eps;
  for (std::size_t k = 0; k < jg_->clusters.size(); ++k) {
    b.cluster.push_back(cluster_belief(static_cast<int>(k)));
    const auto& cl = jg_->clusters[k];
    b.tau_cluster.push_back(cl.decision ? normalized_or_throw(sigma_of(b.cluster.back(), cl.decision_family, eps, true))
                                        : b.cluster.back());
  }
  for (std::size_t e = 0; e < jg_->edges.size(); ++e)
    b.separator.push_back(normalized_or_throw(
        factor_product(messages_.messages[2 * e], messages_.messages[2 * e + 1])));
  return b;
}

Strategy MeuBp::strategy(double eps, bool lenient) const {
  Strategy s;
  for (const auto& c : jg_->clusters)
    if (c.decision) s.set_policy(*c.decision, policy_of(cluster_belief(c.id), c.decision_family, eps, lenient));
  return s;
}

BpRun run_bp(MeuBp& engine, const BpOptions& options, const TraceContext* ctx) {
  options.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto saved = engine.potentials();
  if (options.tie_seed) {
    std::mt19937_64 rng(*options.tie_seed);
    std::uniform_real_distribution<double> u(0.0, 1e-9);
    auto biased = saved;
    for (const auto& c : engine.graph().clusters)
      if (c.decision)
        for (double& v : biased[static_cast<std::size_t>(c.id)].mutable_log_values())
          if (v != kLogZero) v += u(rng);
    engine.set_potentials(std::move(biased));
  }
  engine.set_root(options.root);

  BpRun run;
  for (int t = 1; t <= options.max_iters; ++t) {
    const double eps = options.temperature(t);
    run.residual = engine.sweep(eps, options.damping);
    run.iterations = t;
    if (ctx) {
      Beliefs b = engine.beliefs(eps);
      Strategy soft = strategy_from(b, engine.graph(), true);
      Strategy rounded = round_strategy(soft);
      TraceRow row{ctx->algorithm, ctx->junction, ctx->seed, t, eps, 0.0, 0.0, run.residual, 0.0};
      if (ctx->eu) {
        row.rounded_eu = ctx->eu(rounded);
        row.soft_eu = ctx->eu(soft);
        if (row.rounded_eu > run.best_rounded_eu) {
          run.best_rounded_eu = row.rounded_eu;
          run.best_rounded = rounded;
        }
      }
      row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      run.trace.push_back(std::move(row));
    }
    if (run.residual < options.tolerance) {
      run.converged = true;
      break;
    }
  }
  const double eps = options.temperature(run.iterations);
  run.beliefs = engine.beliefs(eps);
  run.soft = strategy_from(run.beliefs, engine.graph(), true);
  run.messages = engine.messages();
  if (options.tie_seed) engine.set_potentials(saved);
  return run;
}

BpRun run_bp(const JunctionGraph& jg, const AugmentedModel& model, const BpOptions& options,
             const TraceContext* ctx) {
  MeuBp engine(jg, MeuBp::cluster_potentials(jg, model));
  return run_bp(engine, options, ctx);
}

Strategy extract_strategy(const Beliefs& beliefs, const JunctionGraph& jg) {
  return strategy_from(beliefs, jg, false);
}

Strategy soft_strategy(const Beliefs& beliefs, const JunctionGraph& jg) {
  return strategy_from(beliefs, jg, true);
}

double check_reparameterization(const AugmentedModel& model, const Beliefs& beliefs,
                                const JunctionGraph& jg, std::size_t cap) {
  const std::size_t total = detail::table_size(model.cards);
  if (total > cap) throw ResourceCapError("joint table exceeds cap");
  Scope all(model.num_vars());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<int>(v);
  std::vector<double> lhs(total, 0.0), rhs(total, 0.0);
  for (const auto& f : model.factors) accumulate(lhs, all, model.cards, f);
  for (const auto& b : beliefs.cluster) accumulate(rhs, all, model.cards, b);
  // assignments where a separator belief vanishes are 0/0 on the right and skipped
  std::vector<char> skip(total, 0);
  for (std::size_t e = 0; e < jg.edges.size(); ++e) {
    const auto& s = beliefs.separator[e];
    detail::Walker w(model.cards, detail::strides_for(s, all));
    for (std::size_t i = 0; i < total; ++i) {
      const double v = s.log_value(w.offset());
      if (v == kLogZero)
        skip[i] = 1;
      else if (rhs[i] != kLogZero)
        rhs[i] -= v;
      w.next();
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < total; ++i) {
    if (skip[i]) continue;
    const bool z1 = lhs[i] == kLogZero, z2 = rhs[i] == kLogZero;
    if (z1 && z2) continue;
    if (z1 != z2) return std::numeric_limits<double>::infinity();
    const double d = lhs[i] - rhs[i];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi < lo ? 0.0 : 0.5 * (hi - lo);
}

ConsistencyReport check_fixed_point_consistency(const Beliefs& beliefs, const JunctionGraph& jg,
                                                double eps) {
  ConsistencyReport rep;
  std::vector<DiscreteFactor> side(jg.clusters.size());
  for (const auto& c : jg.clusters) {
    const auto& b = beliefs.cluster[static_cast<std::size_t>(c.id)];
    side[static_cast<std::size_t>(c.id)] = c.decision ? sigma_of(b, c.decision_family, eps, true) : b;
  }
  for (std::size_t e = 0; e < jg.edges.size(); ++e) {
    const auto& ed = jg.edges[e];
    const auto sep = beliefs.separator[e].values();
    double r = 0.0;
    for (int k : {ed.a, ed.b}) {
      auto m = factor_normalize(factor_marginal(side[static_cast<std::size_t>(k)], ed.separator)).values();
      for (std::size_t i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m[i] - sep[i]));
    }
    rep.edge_residual.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
  }
  return rep;
}

double junction_free_energy(const Beliefs& tau, const std::vector<DiscreteFactor>& potentials,
                            const JunctionGraph& jg, double eps) {
  double f = 0.0;
  for (const auto& c : jg.clusters) {
    const auto& t = tau.tau_cluster[static_cast<std::size_t>(c.id)];
    const auto& psi = potentials[static_cast<std::size_t>(c.id)];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double p = t.value(i);
      if (p <= 0.0) continue;
      if (psi.log_value(i) == kLogZero) return kLogZero;
      f += p * psi.log_value(i);
    }
    f += entropy(t);
    if (c.decision && eps != 1.0) {
      DiscreteFactor fam = factor_marginal(t, c.decision_family);
      f -= (1.0 - eps) * conditional_entropy(fam, *c.decision);
    }
  }
  for (const auto& s : tau.separator) f -= entropy(s);
  return f;
}

}  // namespace meu
