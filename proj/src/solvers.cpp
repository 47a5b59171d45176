#include "meu/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <random>

#include "meu/errors.hpp"
#include "meu/exact.hpp"

namespace meu {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Adds weight * log p (aligned to the cluster) to one cluster potential.
void add_policy(DiscreteFactor& psi, const DiscreteFactor& policy, double weight) {
  DiscreteFactor a = factor_align(policy, psi.scope(), psi.cards());
  auto& vals = psi.mutable_log_values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double p = a.log_value(i);
    if (vals[i] == kLogZero) continue;
    vals[i] = p == kLogZero ? kLogZero : vals[i] + weight * p;
  }
}

std::vector<DiscreteFactor> with_policies(const JunctionGraph& jg, std::vector<DiscreteFactor> pots,
                                          const Strategy& s, double weight, int skip) {
  for (const auto& [d, pol] : s.policies()) {
    if (d == skip) continue;
    const int k = jg.cluster_of_decision(d);
    if (k < 0) throw InvalidModelError("decision " + std::to_string(d) + " has no cluster");
    add_policy(pots[static_cast<std::size_t>(k)], pol, weight);
  }
  return pots;
}

// Sum-product until the residual drops below tol (one forward-backward pass
// is exact on a tree).
double run_sum_product(MeuBp& bp, bool tree, int max_sweeps, double tol, double damping) {
  double r = bp.sweep(1.0, damping);
  if (tree) return r;
  for (int t = 1; t < max_sweeps && r >= tol; ++t) r = bp.sweep(1.0, damping);
  return r;
}

// Largest total-variation distance between matching policy rows.
double max_row_tv(const Strategy& a, const Strategy& b) {
  double out = 0.0;
  for (const auto& [d, pa] : a.policies()) {
    const auto va = pa.values(), vb = b.policy(d).values();
    const std::size_t k = static_cast<std::size_t>(pa.cards().back());
    for (std::size_t r = 0; r < va.size() / k; ++r) {
      double tv = 0.0;
      for (std::size_t x = 0; x < k; ++x) tv += std::abs(va[r * k + x] - vb[r * k + x]);
      out = std::max(out, 0.5 * tv);
    }
  }
  return out;
}

// New SPU row: keep a deterministic current choice that is still optimal,
// otherwise the lowest optimal state.
DiscreteFactor spu_policy(const DiscreteFactor& q, const DiscreteFactor& current) {
  const std::size_t k = static_cast<std::size_t>(q.cards().back());
  const auto& lq = q.log_values();
  const auto& lc = current.log_values();
  std::vector<double> out(lq.size(), kLogZero);
  for (std::size_t r = 0; r < lq.size() / k; ++r) {
    const double* row = lq.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    int cur = -1;
    for (std::size_t x = 0; x < k; ++x)
      if (lc[r * k + x] == 0.0) cur = static_cast<int>(x);
    std::size_t pick = 0;
    if (mx == kLogZero) {
      pick = cur >= 0 ? static_cast<std::size_t>(cur) : 0;
    } else if (cur >= 0 && row[cur] >= mx - kTieTolerance) {
      pick = static_cast<std::size_t>(cur);
    } else {
      while (row[pick] < mx - kTieTolerance) ++pick;
    }
    out[r * k + pick] = 0.0;
  }
  return DiscreteFactor(q.scope(), q.cards(), std::move(out));
}

// Every policy mixed with a little uniform mass, so that contexts the
// current strategy never reaches still get a conditional expectation.
Strategy tremble(const Strategy& s, double lambda) {
  Strategy out;
  for (const auto& [d, p] : s.policies()) {
    const double k = p.cards().back();
    std::vector<double> v = p.values();
    for (double& x : v) x = (1.0 - lambda) * x + lambda / k;
    out.set_policy(d, DiscreteFactor::from_values(p.scope(), p.cards(), v));
  }
  return out;
}

constexpr double kTremble = 1e-6;

// Tracks the per-iteration trace and the best rounded strategy of a run.
struct Recorder {
  Recorder(const SolverContext& c, std::string name, std::uint64_t s)
      : ctx(c), algorithm(std::move(name)), seed(s) {}

  const SolverContext& ctx;
  std::string algorithm;
  std::uint64_t seed;
  Clock::time_point start = Clock::now();
  SolveResult res;
  Strategy best;
  double best_eu = -1.0;
  std::optional<Strategy> last_rounded;
  double last_rounded_eu = 0.0;

  void consider(const Strategy& rounded, double eu) {
    if (eu > best_eu) {
      best_eu = eu;
      best = rounded;
    }
  }

  // rounded strategies often repeat across iterations
  double rounded_eu(const Strategy& rounded) {
    if (!last_rounded || max_row_tv(*last_rounded, rounded) != 0.0) {
      last_rounded = rounded;
      last_rounded_eu = ctx.eu(rounded);
    }
    return last_rounded_eu;
  }

  void record(const Strategy& soft, int iter, double temp, double residual) {
    Strategy rounded = round_strategy(soft);
    TraceRow row{algorithm, junction_name(ctx.kind()), seed, iter, temp, rounded_eu(rounded), 0.0, residual, 0.0};
    row.soft_eu = soft.is_deterministic() ? row.rounded_eu : ctx.eu(soft);
    consider(rounded, row.rounded_eu);
    res.eu_history.push_back(row.soft_eu);
    res.iterations = iter;
    res.residual = residual;
    row.ms = elapsed_ms(start);
    res.trace.push_back(std::move(row));
  }

  SolveResult finish(const Strategy& last) {
    Strategy rounded = round_strategy(last);
    consider(rounded, rounded_eu(rounded));
    res.strategy = best;
    res.log_eu = ctx.log_eu(best);
    res.eu = std::exp(res.log_eu);
    res.eu_exact = ctx.exact_eu();
    return std::move(res);
  }
};

MessageSet strategy_messages(const SolverContext& ctx, const Strategy& s, const AlgorithmSpec& spec) {
  MeuBp bp(ctx.graph(), ctx.potentials_with(s));
  bp.set_root(ctx.root());
  run_sum_product(bp, ctx.kind() == JunctionKind::tree, spec.max_iters, spec.tolerance, spec.damping);
  return bp.messages();
}

void apply_init(const SolverContext& ctx, MeuBp& bp, const BpInit& init, const AlgorithmSpec& spec) {
  if (init.messages)
    bp.set_messages(*init.messages);
  else if (init.strategy)
    bp.set_messages(strategy_messages(ctx, *init.strategy, spec));
}

}  // namespace

void AlgorithmSpec::validate() const {
  if (inner_cap < 1) throw InvalidModelError("inner iteration cap must be at least 1");
  if (restarts < 1) throw InvalidModelError("restart count must be at least 1");
  if (max_iters < 1) throw InvalidModelError("max_iters must be at least 1");
  if (!(tolerance > 0.0) || !(strategy_tolerance > 0.0))
    throw InvalidModelError("tolerances must be positive");
  if (!(damping >= 0.0 && damping < 1.0)) throw InvalidModelError("damping must lie in [0, 1)");
  if (!(perturb_scale >= 0.0) || !std::isfinite(perturb_scale))
    throw InvalidModelError("perturbation scale must be finite and nonnegative");
}

std::string algorithm_name(Algorithm a, ProxWeights w) {
  switch (a) {
    case Algorithm::spu: return "SPU";
    case Algorithm::bp_zero: return "BP-0";
    case Algorithm::anneal_bp: return "Anneal-BP";
    case Algorithm::anneal_bp_perturbed: return "Anneal-BP-perturbed";
    case Algorithm::prox_bp: return w == ProxWeights::constant ? "Prox-BP-one" : "Prox-BP-harmonic";
  }
  return "?";
}

std::string junction_name(JunctionKind k) { return k == JunctionKind::tree ? "tree" : "loopy"; }

Algorithm parse_algorithm(const std::string& name, ProxWeights* weights) {
  const std::string n = lower(name);
  auto set = [&](ProxWeights w) {
    if (weights) *weights = w;
    return Algorithm::prox_bp;
  };
  if (n == "spu") return Algorithm::spu;
  if (n == "bp-0" || n == "bp0") return Algorithm::bp_zero;
  if (n == "anneal-bp" || n == "anneal") return Algorithm::anneal_bp;
  if (n == "anneal-bp-perturbed" || n == "anneal-perturbed" || n == "perturbed") return Algorithm::anneal_bp_perturbed;
  if (n == "prox-bp-one" || n == "prox-one" || n == "prox-bp" || n == "prox") return set(ProxWeights::constant);
  if (n == "prox-bp-harmonic" || n == "prox-harmonic") return set(ProxWeights::harmonic);
  throw InvalidModelError("unknown algorithm '" + name + "'");
}

JunctionKind parse_junction(const std::string& name) {
  const std::string n = lower(name);
  if (n == "tree") return JunctionKind::tree;
  if (n == "loopy") return JunctionKind::loopy;
  throw InvalidModelError("unknown junction kind '" + name + "'");
}

SolverContext::SolverContext(const InfluenceDiagram& id, JunctionKind kind, std::size_t cap)
    : id_(&id), aug_(build_augmented_model(id)), kind_(kind) {
  const auto ds = decision_families(id);
  if (kind == JunctionKind::tree) {
    jg_ = build_junction_tree(aug_, ds, default_elimination_order(id, aug_), cap);
    root_ = find_consistency_certificate(jg_, ds).root;
  } else {
    jg_ = build_loopy_junction_graph(aug_, ds);
  }
  potentials_ = MeuBp::cluster_potentials(jg_, aug_);
  try {
    exact_ = std::make_unique<EuEvaluator>(id, cap);
  } catch (const ResourceCapError&) {
    bethe_graph_ = kind == JunctionKind::loopy ? jg_ : build_loopy_junction_graph(aug_, ds);
  }
}

SolverContext::~SolverContext() = default;

std::vector<DiscreteFactor> SolverContext::potentials_with(const Strategy& s, double weight,
                                                           int skip) const {
  return with_policies(jg_, potentials_, s, weight, skip);
}

double SolverContext::log_eu(const Strategy& s) const {
  if (exact_) return exact_->log_eu(s);
  // Bethe estimate of log sum_x exp(theta(x)) prod p_d on the loopy graph
  auto pots = with_policies(bethe_graph_, MeuBp::cluster_potentials(bethe_graph_, aug_), s, 1.0, -1);
  MeuBp bp(bethe_graph_, pots);
  run_sum_product(bp, false, 200, 1e-9, 0.0);
  return junction_free_energy(bp.beliefs(1.0), pots, bethe_graph_, 1.0);
}

double SolverContext::eu(const Strategy& s) const { return std::exp(log_eu(s)); }

SolveResult run_spu(const SolverContext& ctx, const Strategy& init, const AlgorithmSpec& spec,
                    std::uint64_t seed) {
  spec.validate();
  const auto& id = ctx.diagram();
  init.validate(id);
  const bool tree = ctx.kind() == JunctionKind::tree;
  Recorder rec{ctx, algorithm_name(Algorithm::spu), seed};
  Strategy cur = init;
  for (int sweep = 1; sweep <= spec.max_iters; ++sweep) {
    double change = 0.0;
    for (int d : id.decisions()) {
      MeuBp bp(ctx.graph(), ctx.potentials_with(cur, 1.0, d));
      bp.set_root(ctx.root());
      run_sum_product(bp, tree, spec.max_iters, spec.tolerance, spec.damping);
      const int k = ctx.graph().cluster_of_decision(d);
      DiscreteFactor q = factor_marginal(bp.cluster_belief(k), id.family(d));
      if (std::any_of(q.log_values().begin(), q.log_values().end(), [](double v) { return v == kLogZero; })) {
        // unreachable contexts: take their rows from the trembled strategy
        MeuBp tb(ctx.graph(), ctx.potentials_with(tremble(cur, kTremble), 1.0, d));
        tb.set_root(ctx.root());
        run_sum_product(tb, tree, spec.max_iters, spec.tolerance, spec.damping);
        DiscreteFactor qt = factor_marginal(tb.cluster_belief(k), id.family(d));
        const std::size_t kd = static_cast<std::size_t>(id.card(d));
        auto& lv = q.mutable_log_values();
        for (std::size_t r = 0; r < lv.size() / kd; ++r) {
          if (*std::max_element(lv.begin() + static_cast<long>(r * kd), lv.begin() + static_cast<long>((r + 1) * kd)) != kLogZero)
            continue;
          for (std::size_t x = 0; x < kd; ++x) lv[r * kd + x] = qt.log_value(r * kd + x);
        }
      }
      Strategy next = cur;
      next.set_policy(d, spu_policy(q, cur.policy(d)));
      change = std::max(change, max_row_tv(cur, next));
      cur = std::move(next);
      rec.res.eu_history.push_back(ctx.eu(cur));
    }
    // eu_history holds one entry per update; record() would add one per sweep
    const double eu = rec.res.eu_history.empty() ? ctx.eu(cur) : rec.res.eu_history.back();
    rec.res.trace.push_back({rec.algorithm, junction_name(ctx.kind()), seed, sweep, 0.0, eu, eu, change,
                             elapsed_ms(rec.start)});
    rec.consider(cur, eu);
    rec.res.iterations = sweep;
    rec.res.residual = change;
    if (change == 0.0) {
      rec.res.converged = true;
      break;
    }
  }
  return rec.finish(cur);
}

SolveResult run_bp_zero(const SolverContext& ctx, const AlgorithmSpec& spec, const BpInit& init,
                        std::uint64_t seed) {
  spec.validate();
  MeuBp bp(ctx.graph(), ctx.base_potentials());
  apply_init(ctx, bp, init, spec);
  BpOptions opt;
  opt.schedule = BpOptions::Schedule::zero;
  opt.damping = spec.damping;
  opt.tolerance = spec.tolerance;
  opt.max_iters = spec.max_iters;
  opt.root = ctx.root();
  if (spec.tie_break) opt.tie_seed = seed;
  TraceContext tc{algorithm_name(Algorithm::bp_zero), junction_name(ctx.kind()), seed,
                  [&ctx](const Strategy& s) { return ctx.eu(s); }};
  BpRun run = run_bp(bp, opt, &tc);
  Recorder rec{ctx, tc.algorithm, seed};
  rec.res.trace = std::move(run.trace);
  for (const auto& row : rec.res.trace) rec.res.eu_history.push_back(row.soft_eu);
  rec.res.iterations = run.iterations;
  rec.res.residual = run.residual;
  rec.res.converged = run.converged;
  if (run.best_rounded_eu >= 0.0) rec.consider(run.best_rounded, run.best_rounded_eu);
  return rec.finish(run.soft);
}

SolveResult run_anneal_bp(const SolverContext& ctx, const AlgorithmSpec& spec, bool perturbed,
                          const BpInit& init, std::uint64_t seed) {
  spec.validate();
  const auto& base = ctx.base_potentials();
  MeuBp bp(ctx.graph(), base);
  apply_init(ctx, bp, init, spec);
  bp.set_root(ctx.root());
  Recorder rec{ctx, algorithm_name(perturbed ? Algorithm::anneal_bp_perturbed : Algorithm::anneal_bp),
               seed};

  double eta0 = 0.0;
  std::vector<std::vector<double>> noise;
  if (perturbed) {
    for (const auto& p : base)
      for (double v : p.log_values())
        if (v != kLogZero) eta0 = std::max(eta0, std::abs(v));
    eta0 *= spec.perturb_scale;
    std::seed_seq seq{seed, std::uint64_t{0x5eed}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& p : base) {
      noise.emplace_back(p.size());
      for (double& z : noise.back()) z = u(rng);
    }
  }

  double eps = 1.0;
  int t = 1;
  for (; t <= spec.max_iters; ++t) {
    eps = 1.0 / t;
    if (perturbed && eta0 > 0.0) {
      auto pots = base;
      for (std::size_t k = 0; k < pots.size(); ++k) {
        auto& vals = pots[k].mutable_log_values();
        for (std::size_t i = 0; i < vals.size(); ++i)
          if (vals[i] != kLogZero) vals[i] += eta0 / t * noise[k][i];
      }
      bp.set_potentials(std::move(pots));
    }
    const double r = bp.sweep(eps, spec.damping);
    rec.record(bp.strategy(eps, true), t, eps, r);
    if (r < spec.tolerance) {
      rec.res.converged = true;
      break;
    }
  }
  if (perturbed && eta0 > 0.0) {
    bp.set_potentials(base);
    const int last = std::min(t, spec.max_iters) + 1;
    const double r = bp.sweep(eps, spec.damping);
    rec.record(bp.strategy(eps, true), last, eps, r);
  }
  return rec.finish(bp.strategy(eps, true));
}

SolveResult run_prox_bp(const SolverContext& ctx, const Strategy& init, const AlgorithmSpec& spec,
                        std::uint64_t seed) {
  spec.validate();
  init.validate(ctx.diagram());
  for (const auto& [d, p] : init.policies())
    for (double v : p.log_values())
      if (v == kLogZero) throw InvalidModelError("proximal updates need a strictly positive start");
  MeuBp bp(ctx.graph(), ctx.base_potentials());
  bp.set_root(ctx.root());
  Recorder rec{ctx, algorithm_name(Algorithm::prox_bp, spec.weights), seed};
  Strategy tau = init;
  for (int t = 1; t <= spec.max_iters; ++t) {
    const double w = spec.weights == ProxWeights::constant ? 1.0 : 1.0 / t;
    bp.set_potentials(ctx.potentials_with(tau, w));
    // at w = 1 on a tree the inner problem is plain sum-product, exact after one sweep
    const int inner = w == 1.0 && ctx.kind() == JunctionKind::tree ? 1 : spec.inner_cap;
    for (int s = 0; s < inner; ++s)
      if (bp.sweep(w, spec.damping) < spec.tolerance) break;
    Strategy next = bp.strategy(w, false);
    const double change = max_row_tv(tau, next);
    tau = std::move(next);
    rec.record(tau, t, w, change);
    if (change < spec.strategy_tolerance) {
      rec.res.converged = true;
      break;
    }
  }
  return rec.finish(tau);
}

namespace {

SolveResult run_one(const SolverContext& ctx, const AlgorithmSpec& spec, int restart) {
  const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(restart);
  std::mt19937_64 rng(seed);
  const auto& id = ctx.diagram();
  const bool zero = restart == 0 && spec.start_at_zero;
  auto start_strategy = [&] {
    if (zero) return Strategy::constant_state(id, 0);
    return restart == 0 ? Strategy::uniform(id) : Strategy::random(id, rng);
  };
  auto start_messages = [&] {
    BpInit init;
    if (zero) {
      init.strategy = Strategy::constant_state(id, 0);
    } else if (restart > 0) {
      MeuBp tmp(ctx.graph(), ctx.base_potentials());
      tmp.randomize_messages(rng);
      init.messages = tmp.messages();
    }
    return init;
  };
  switch (spec.algorithm) {
    case Algorithm::spu: return run_spu(ctx, start_strategy(), spec, seed);
    case Algorithm::prox_bp: return run_prox_bp(ctx, start_strategy(), spec, seed);
    case Algorithm::bp_zero: return run_bp_zero(ctx, spec, start_messages(), seed);
    case Algorithm::anneal_bp: return run_anneal_bp(ctx, spec, false, start_messages(), seed);
    case Algorithm::anneal_bp_perturbed: return run_anneal_bp(ctx, spec, true, start_messages(), seed);
  }
  throw InvalidModelError("unknown algorithm");
}

}  // namespace

SolveResult run_with_restarts(const SolverContext& ctx, const AlgorithmSpec& spec) {
  spec.validate();
  std::vector<std::optional<SolveResult>> runs(static_cast<std::size_t>(spec.restarts));
  auto attempt = [&](int r) -> std::optional<SolveResult> {
    try {
      return run_one(ctx, spec, r);
    } catch (const DegenerateSliceError&) {
      return std::nullopt;
    }
  };
  if (spec.parallel && spec.restarts > 1) {
    std::vector<std::future<std::optional<SolveResult>>> jobs;
    for (int r = 0; r < spec.restarts; ++r) jobs.push_back(std::async(std::launch::async, attempt, r));
    for (int r = 0; r < spec.restarts; ++r) runs[static_cast<std::size_t>(r)] = jobs[static_cast<std::size_t>(r)].get();
  } else {
    for (int r = 0; r < spec.restarts; ++r) runs[static_cast<std::size_t>(r)] = attempt(r);
  }

  SolveResult best;
  SolveTrace all;
  int failed = 0;
  bool have = false;
  for (int r = 0; r < spec.restarts; ++r) {
    auto& run = runs[static_cast<std::size_t>(r)];
    if (!run) {
      ++failed;
      continue;
    }
    all.insert(all.end(), run->trace.begin(), run->trace.end());
    if (!have || run->eu > best.eu) {
      best = std::move(*run);
      best.restart = r;
      have = true;
    }
  }
  if (!have) throw DegenerateSliceError("every restart collapsed to an all-zero policy row");
  best.trace = std::move(all);
  best.failed_restarts = failed;
  return best;
}

SolveResult solve(const InfluenceDiagram& id, const AlgorithmSpec& spec) {
  SolverContext ctx(id, spec.junction);
  return run_with_restarts(ctx, spec);
}

}  // namespace meu
