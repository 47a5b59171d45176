#include "meu/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "meu/errors.hpp"
#include "meu/formats.hpp"

namespace meu {

namespace {

constexpr double kDrawFloor = 1e-300;

// k distinct values from [0, n) by a partial Fisher-Yates shuffle.
std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<double> dirichlet_rows(std::size_t rows, std::size_t k, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> out(rows * k);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.0;
    for (std::size_t x = 0; x < k; ++x) z += out[r * k + x] = g(rng) + kDrawFloor;
    for (std::size_t x = 0; x < k; ++x) out[r * k + x] /= z;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidModelError("setting '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidModelError("setting '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::string short_real(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void RandomIdConfig::validate() const {
  if (n_vars < 2) throw InvalidModelError("random diagrams need at least two nodes");
  if (max_parents < 1) throw InvalidModelError("max_parents must be at least 1");
  if (cardinality < 2) throw InvalidModelError("cardinality must be at least 2");
  if (!(decision_fraction >= 0.0 && decision_fraction < 1.0))
    throw InvalidModelError("decision fraction must lie in [0, 1)");
  if (!(dirichlet_alpha > 0.0) || !(gamma_alpha > 0.0)) throw InvalidModelError("alphas must be positive");
}

InfluenceDiagram gen_random_id(const RandomIdConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.n_vars;
  std::vector<std::vector<int>> parents(static_cast<std::size_t>(n));
  std::vector<int> children(static_cast<std::size_t>(n), 0);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> count(1, std::min(i, cfg.max_parents));
    parents[static_cast<std::size_t>(i)] = sample_without_replacement(i, count(rng), rng);
    for (int p : parents[static_cast<std::size_t>(i)]) ++children[static_cast<std::size_t>(p)];
  }
  std::vector<int> inner, leaves;
  for (int i = 0; i < n; ++i) {
    if (children[static_cast<std::size_t>(i)] > 0)
      inner.push_back(i);
    else if (!parents[static_cast<std::size_t>(i)].empty())
      leaves.push_back(i);  // a node with neither parents nor children is dropped
  }
  const auto m = static_cast<long long>(inner.size());
  const long long n_dec = std::llround(cfg.decision_fraction * static_cast<double>(m));
  if (cfg.decision_fraction > 0.0 && n_dec == 0)
    throw InvalidModelError("decision fraction selects no decision node");
  if (n_dec >= m && m > 0 && cfg.decision_fraction > 0.0)
    throw InvalidModelError("decision fraction leaves no chance node");
  std::vector<int> shuffled = inner;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::set<int> decision(shuffled.begin(), shuffled.begin() + n_dec);

  std::vector<int> new_id(static_cast<std::size_t>(n), -1);
  for (std::size_t j = 0; j < inner.size(); ++j) new_id[static_cast<std::size_t>(inner[j])] = static_cast<int>(j);
  auto renumber = [&](const std::vector<int>& ps) {
    std::vector<int> out;
    for (int p : ps) out.push_back(new_id[static_cast<std::size_t>(p)]);
    return out;
  };

  const auto k = static_cast<std::size_t>(cfg.cardinality);
  std::vector<Variable> vars;
  std::vector<Table> cpts;
  for (int old : inner) {
    const bool is_dec = decision.count(old) > 0;
    Variable v{new_id[static_cast<std::size_t>(old)], cfg.cardinality,
               is_dec ? VarKind::decision : VarKind::chance, renumber(parents[static_cast<std::size_t>(old)])};
    if (is_dec) {
      cpts.push_back(Table{});
    } else {
      Scope scope = v.parents;
      scope.push_back(v.id);
      std::size_t rows = 1;
      for (std::size_t i = 0; i < v.parents.size(); ++i) rows *= k;
      cpts.push_back(Table{scope, dirichlet_rows(rows, k, cfg.dirichlet_alpha, rng)});
    }
    vars.push_back(std::move(v));
  }
  std::gamma_distribution<double> g(cfg.gamma_alpha, 1.0);
  std::vector<Table> utils;
  for (int leaf : leaves) {
    Table t{renumber(parents[static_cast<std::size_t>(leaf)]), {}};
    std::size_t size = 1;
    for (std::size_t i = 0; i < t.scope.size(); ++i) size *= k;
    for (std::size_t i = 0; i < size; ++i) t.values.push_back(g(rng) + kDrawFloor);
    utils.push_back(std::move(t));
  }
  return InfluenceDiagram(std::move(vars), std::move(cpts), std::move(utils), cfg.utility_mode);
}

SensorNetConfig SensorNetConfig::grid(int w, int h) {
  SensorNetConfig c;
  c.n_sensors = w * h;
  auto at = [w](int r, int col) { return r * w + col; };
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      c.accuracy.push_back(col == 0 ? SensorAccuracy::accurate : SensorAccuracy::noisy);
      if (col + 1 < w) {
        c.mrf_edges.emplace_back(at(r, col), at(r, col + 1));
        c.signal_edges.emplace_back(at(r, col), at(r, col + 1));
      }
      if (r + 1 < h) c.mrf_edges.emplace_back(at(r, col), at(r + 1, col));
    }
  return c;
}

SensorNetConfig SensorNetConfig::random_graph(int n, int edges, std::uint64_t seed) {
  if (n < 2) throw InvalidModelError("random sensor graphs need at least two sensors");
  if (edges < n - 1 || edges > n * (n - 1) / 2) throw InvalidModelError("edge count out of range");
  SensorNetConfig c;
  c.n_sensors = n;
  c.seed = seed;
  std::mt19937_64 rng(seed);
  std::set<std::pair<int, int>> used;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> p(0, i - 1);
    used.emplace(p(rng), i);
  }
  std::uniform_int_distribution<int> any(0, n - 1);
  while (static_cast<int>(used.size()) < edges) {
    int a = any(rng), b = any(rng);
    if (a == b) continue;
    used.emplace(std::min(a, b), std::max(a, b));
  }
  c.mrf_edges.assign(used.begin(), used.end());
  const int n_acc = (n + 2) / 3;
  for (int i = 0; i < n; ++i) c.accuracy.push_back(i < n_acc ? SensorAccuracy::accurate : SensorAccuracy::noisy);
  for (int i = 0; i < n_acc; ++i)
    for (const auto& [a, b] : c.mrf_edges) {
      const int other = a == i ? b : b == i ? a : -1;
      if (other >= n_acc) {
        c.signal_edges.emplace_back(i, other);
        break;
      }
    }
  return c;
}

void SensorNetConfig::validate() const {
  if (n_sensors < 1 || n_sensors > 20) throw InvalidModelError("sensor count must lie in [1, 20]");
  if (static_cast<int>(accuracy.size()) != n_sensors) throw InvalidModelError("one accuracy class per sensor expected");
  auto check = [&](const std::pair<int, int>& e) {
    if (e.first < 0 || e.second < 0 || e.first >= n_sensors || e.second >= n_sensors || e.first == e.second)
      throw InvalidModelError("sensor edge out of range");
  };
  for (const auto& e : mrf_edges) check(e);
  for (const auto& e : signal_edges) check(e);
  for (double p : {accurate_prob, noisy_prob})
    if (!(p > 0.0 && p < 1.0)) throw InvalidModelError("sensor accuracies must lie in (0, 1)");
  if (!std::isfinite(coupling)) throw InvalidModelError("coupling must be finite");
  if (!(reward > 0.0) || !std::isfinite(reward)) throw InvalidModelError("reward must be positive");
  if (!(cost >= 0.0) || !std::isfinite(cost)) throw InvalidModelError("cost must be finite and nonnegative");
  // signal paths must be acyclic
  std::vector<int> indeg(static_cast<std::size_t>(n_sensors), 0);
  for (const auto& e : signal_edges) ++indeg[static_cast<std::size_t>(e.second)];
  std::vector<int> ready;
  for (int i = 0; i < n_sensors; ++i)
    if (!indeg[static_cast<std::size_t>(i)]) ready.push_back(i);
  int seen = 0;
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& e : signal_edges)
      if (e.first == v && --indeg[static_cast<std::size_t>(e.second)] == 0) ready.push_back(e.second);
  }
  if (seen != n_sensors) throw InvalidModelError("signal paths contain a cycle");
}

InfluenceDiagram gen_sensor_id(const SensorNetConfig& cfg, SensorLayout* layout) {
  cfg.validate();
  const int n = cfg.n_sensors;
  const std::size_t states = std::size_t{1} << n;

  // exact joint of the hidden MRF
  std::vector<double> joint(states);
  for (std::size_t x = 0; x < states; ++x) {
    double e = 0.0;
    for (const auto& [a, b] : cfg.mrf_edges)
      if (((x >> a) & 1) == ((x >> b) & 1)) e += cfg.coupling;
    joint[x] = std::exp(e);
  }
  const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
  for (double& p : joint) p /= z;

  // triangulate by eliminating the last sensor first; earlier neighbours
  // become parents, so p(h) factorizes exactly along the sensor order
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [a, b] : cfg.mrf_edges) {
    adj[static_cast<std::size_t>(a)].insert(b);
    adj[static_cast<std::size_t>(b)].insert(a);
  }
  std::vector<std::vector<int>> hpar(static_cast<std::size_t>(n));
  for (int v = n - 1; v >= 0; --v) {
    std::vector<int> earlier;
    for (int u : adj[static_cast<std::size_t>(v)])
      if (u < v) earlier.push_back(u);
    for (int a : earlier)
      for (int b : earlier)
        if (a != b) adj[static_cast<std::size_t>(a)].insert(b);
    hpar[static_cast<std::size_t>(v)] = earlier;
  }

  SensorLayout lay;
  for (int i = 0; i < n; ++i) lay.hidden.push_back(i);
  for (int i = 0; i < n; ++i) lay.observed.push_back(n + i);
  int next = 2 * n;
  for (std::size_t e = 0; e < cfg.signal_edges.size(); ++e) lay.signal.push_back(next++);
  for (int i = 0; i < n; ++i) lay.predict.push_back(next++);

  std::vector<Variable> vars;
  std::vector<Table> cpts;
  for (int v = 0; v < n; ++v) {
    const auto& pa = hpar[static_cast<std::size_t>(v)];
    // p(h_v, pa) by summing the joint, then normalize per parent row
    const std::size_t rows = std::size_t{1} << pa.size();
    std::vector<double> table(rows * 2, 0.0);
    for (std::size_t x = 0; x < states; ++x) {
      std::size_t r = 0;
      for (int p : pa) r = r * 2 + ((x >> p) & 1);
      table[r * 2 + ((x >> v) & 1)] += joint[x];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double s = table[2 * r] + table[2 * r + 1];
      table[2 * r] /= s;
      table[2 * r + 1] /= s;
    }
    Scope scope = pa;
    scope.push_back(v);
    vars.push_back({v, 2, VarKind::chance, pa});
    cpts.push_back({scope, table});
  }
  for (int i = 0; i < n; ++i) {
    const double acc = cfg.accuracy[static_cast<std::size_t>(i)] == SensorAccuracy::accurate ? cfg.accurate_prob
                                                                                            : cfg.noisy_prob;
    const int id = lay.observed[static_cast<std::size_t>(i)];
    vars.push_back({id, 2, VarKind::chance, {i}});
    cpts.push_back({{i, id}, {acc, 1 - acc, 1 - acc, acc}});
  }
  auto informed = [&](int i) {
    std::vector<int> pa{lay.observed[static_cast<std::size_t>(i)]};
    for (std::size_t e = 0; e < cfg.signal_edges.size(); ++e)
      if (cfg.signal_edges[e].second == i) pa.push_back(lay.signal[e]);
    std::sort(pa.begin(), pa.end());
    return pa;
  };
  for (std::size_t e = 0; e < cfg.signal_edges.size(); ++e) {
    vars.push_back({lay.signal[e], 2, VarKind::decision, informed(cfg.signal_edges[e].first)});
    cpts.push_back({});
  }
  for (int i = 0; i < n; ++i) {
    vars.push_back({lay.predict[static_cast<std::size_t>(i)], 2, VarKind::decision, informed(i)});
    cpts.push_back({});
  }

  std::vector<Table> utils;
  for (int i = 0; i < n; ++i)
    utils.push_back({{i, lay.predict[static_cast<std::size_t>(i)]}, {cfg.reward, 1.0, 1.0, cfg.reward}});
  for (int s : lay.signal) utils.push_back({{s}, {1.0, std::exp(-cfg.cost)}});
  if (layout) *layout = lay;
  return InfluenceDiagram(std::move(vars), std::move(cpts), std::move(utils), UtilityMode::additive);
}

double expected_signals(const InfluenceDiagram& id, const Strategy& s, const SensorLayout& layout) {
  std::vector<DiscreteFactor> fs;
  for (int c : id.chance_nodes()) fs.push_back(id.cpt_factor(c));
  for (int d : id.decisions()) fs.push_back(s.policy(d));
  double total = 0.0;
  for (int sig : layout.signal) {
    auto with = fs;
    with.push_back(DiscreteFactor::from_values({sig}, {2}, std::vector<double>{0.0, 1.0}));
    total += std::exp(log_partition(with));
  }
  return total;
}

ExperimentReport run_experiment(const std::vector<NamedModel>& models, const std::vector<AlgorithmSpec>& specs,
                                const ExperimentOptions& options) {
  if (models.empty() || specs.empty()) throw InvalidModelError("an experiment needs models and specs");
  for (const auto& s : specs) s.validate();
  AlgorithmSpec baseline = specs.front();
  baseline.algorithm = Algorithm::spu;
  baseline.junction = JunctionKind::tree;
  baseline.start_at_zero = false;
  auto same_as_baseline = [&](const AlgorithmSpec& s) {
    return s.algorithm == Algorithm::spu && s.junction == JunctionKind::tree && !s.start_at_zero &&
           s.restarts == baseline.restarts && s.seed == baseline.seed && s.max_iters == baseline.max_iters;
  };

  struct ModelOut {
    std::vector<ExperimentRow> rows;
    SolveTrace trace;
  };
  std::vector<ModelOut> outs(models.size());

  auto run_model = [&](std::size_t mi) {
    const auto& m = models[mi];
    ModelOut& out = outs[mi];
    std::unique_ptr<SolverContext> tree, loopy;
    auto ctx_for = [&](JunctionKind k) -> const SolverContext& {
      auto& slot = k == JunctionKind::tree ? tree : loopy;
      if (!slot) slot = std::make_unique<SolverContext>(m.id, k);
      return *slot;
    };
    auto run = [&](const AlgorithmSpec& spec, ExperimentRow& row) -> std::optional<SolveResult> {
      row.model = m.name;
      row.group = m.group;
      row.algorithm = algorithm_name(spec.algorithm, spec.weights) + (spec.start_at_zero ? "+zero" : "");
      row.junction = junction_name(spec.junction);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        SolveResult r = run_with_restarts(ctx_for(spec.junction), spec);
        row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.log_meu = r.log_eu;
        row.iterations = r.iterations;
        row.eu_exact = r.eu_exact;
        return r;
      } catch (const Error& e) {
        row.status = e.what();
        return std::nullopt;
      }
    };

    ExperimentRow base_row;
    auto base = run(baseline, base_row);
    if (!base) {
      AlgorithmSpec loopy_base = baseline;
      loopy_base.junction = JunctionKind::loopy;
      base_row = {};
      base = run(loopy_base, base_row);
    }
    for (const auto& spec : specs) {
      ExperimentRow row;
      std::optional<SolveResult> r;
      if (same_as_baseline(spec) && base && base_row.junction == "tree") {
        row = base_row;
        r = base;
      } else {
        r = run(spec, row);
      }
      row.baseline_junction = base ? base_row.junction : "";
      if (r && base)
        row.rel_log_meu = row.log_meu - base_row.log_meu;
      else
        row.rel_log_meu = std::nan("");
      if (r) out.trace.insert(out.trace.end(), r->trace.begin(), r->trace.end());
      out.rows.push_back(std::move(row));
    }
    if (options.trace_path && !out.trace.empty())
      write_trace(out.trace, *options.trace_path + "." + m.name + ".csv");
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) run_model(mi);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t mi; (mi = next++) < models.size();) run_model(mi);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ExperimentReport rep;
  for (auto& o : outs) {
    rep.rows.insert(rep.rows.end(), o.rows.begin(), o.rows.end());
    rep.trace.insert(rep.trace.end(), o.trace.begin(), o.trace.end());
  }
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  for (const auto& r : rep.rows) {
    auto key = std::make_tuple(r.group, r.algorithm, r.junction);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rep.summary.size()).first;
      rep.summary.push_back({r.group, r.algorithm, r.junction, 0, 0, 0.0, 0.0});
    }
    auto& s = rep.summary[it->second];
    if (r.status != "ok" || !std::isfinite(r.rel_log_meu)) {
      ++s.failures;
      continue;
    }
    ++s.trials;
    s.mean_log_meu += r.log_meu;
    s.mean_rel_log_meu += r.rel_log_meu;
  }
  for (auto& s : rep.summary)
    if (s.trials) {
      s.mean_log_meu /= s.trials;
      s.mean_rel_log_meu /= s.trials;
    }

  auto to_file = [](const std::string& path, auto&& writer) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    writer(f);
    if (!f) throw Error("cannot write " + path);
  };
  if (options.report_path) to_file(*options.report_path, [&](std::ostream& o) { write_report(rep.rows, o); });
  if (options.summary_path) to_file(*options.summary_path, [&](std::ostream& o) { write_summary(rep.summary, o); });
  return rep;
}

void write_report(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << "model,group,algorithm,junction,log_meu,rel_log_meu,baseline_junction,iterations,ms,eu_exact,status\n";
  for (const auto& r : rows)
    out << csv_field(r.model) << ',' << csv_field(r.group) << ',' << r.algorithm << ',' << r.junction << ','
        << format_real(r.log_meu) << ',' << format_real(r.rel_log_meu) << ',' << r.baseline_junction << ','
        << r.iterations << ',' << format_real(r.ms) << ',' << (r.eu_exact ? 1 : 0) << ',' << csv_field(r.status)
        << '\n';
}

void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "group,algorithm,junction,trials,failures,mean_log_meu,mean_rel_log_meu\n";
  for (const auto& r : rows)
    out << csv_field(r.group) << ',' << r.algorithm << ',' << r.junction << ',' << r.trials << ',' << r.failures
        << ',' << format_real(r.mean_log_meu) << ',' << format_real(r.mean_rel_log_meu) << '\n';
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value", no, 1);
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ParseError("empty key", no, 1);
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void BenchConfig::apply(const std::map<std::string, std::string>& kv) {
  std::string algo, weights, junction;
  for (const auto& [key, v] : kv) {
    auto list = [&] {
      std::vector<double> out;
      for (const auto& s : split(v, ',')) out.push_back(to_double(key, s));
      if (out.empty()) throw InvalidModelError("setting '" + key + "' needs at least one value");
      return out;
    };
    if (key == "suite") suite = v;
    else if (key == "trials") trials = static_cast<int>(to_int(key, v));
    else if (key == "fractions" || key == "decisions") fractions = list();
    else if (key == "costs") costs = list();
    else if (key == "alpha") alpha = to_double(key, v);
    else if (key == "n-vars") n_vars = static_cast<int>(to_int(key, v));
    else if (key == "max-parents") max_parents = static_cast<int>(to_int(key, v));
    else if (key == "card") cardinality = static_cast<int>(to_int(key, v));
    else if (key == "grid") {
      const auto x = v.find('x');
      if (x == std::string::npos) throw InvalidModelError("grid expects WxH");
      grid_w = static_cast<int>(to_int(key, v.substr(0, x)));
      grid_h = static_cast<int>(to_int(key, v.substr(x + 1)));
    } else if (key == "algos") algorithms = split(v, ',');
    else if (key == "algo") algo = v;
    else if (key == "w") weights = v;
    else if (key == "junction") junction = v;
    else if (key == "restarts") base.restarts = static_cast<int>(to_int(key, v));
    else if (key == "seed") base.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "tol") base.tolerance = to_double(key, v);
    else if (key == "max-iters") base.max_iters = static_cast<int>(to_int(key, v));
    else if (key == "inner-iters") base.inner_cap = static_cast<int>(to_int(key, v));
    else if (key == "damping") base.damping = to_double(key, v);
    else if (key == "out") out = v;
    else if (key == "threads") threads = static_cast<int>(to_int(key, v));
    else throw InvalidModelError("unknown setting '" + key + "'");
  }
  if (!algo.empty() || !weights.empty() || !junction.empty()) {
    if (algo.empty()) algo = "prox";
    std::string name = algo;
    if (algo == "prox" || algo == "prox-bp") name = weights == "harmonic" ? "prox-harmonic" : "prox-one";
    algorithms = {name + ":" + (junction.empty() ? "tree" : junction)};
  }
  base.validate();
}

std::vector<NamedModel> suite_models(const BenchConfig& cfg) {
  std::vector<NamedModel> out;
  if (cfg.suite == "random20") {
    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi)
      for (int t = 0; t < cfg.trials; ++t) {
        RandomIdConfig rc;
        rc.n_vars = cfg.n_vars;
        rc.max_parents = cfg.max_parents;
        rc.cardinality = cfg.cardinality;
        rc.decision_fraction = cfg.fractions[fi];
        rc.dirichlet_alpha = rc.gamma_alpha = cfg.alpha;
        // retry a few seeds when a draw has too few inner nodes for the fraction
        for (int attempt = 0;; ++attempt) {
          rc.seed = cfg.base.seed * 1'000'003ULL + fi * 10'007ULL + static_cast<std::uint64_t>(t) * 101ULL +
                    static_cast<std::uint64_t>(attempt);
          try {
            out.push_back({"f" + short_real(cfg.fractions[fi]) + "-t" + std::to_string(t),
                           "frac=" + short_real(cfg.fractions[fi]), gen_random_id(rc)});
            break;
          } catch (const InvalidModelError&) {
            if (attempt == 100) throw;
          }
        }
      }
  } else if (cfg.suite == "sensor") {
    for (double c : cfg.costs) {
      auto sc = SensorNetConfig::grid(cfg.grid_w, cfg.grid_h);
      sc.cost = c;
      out.push_back({"grid" + std::to_string(cfg.grid_w) + "x" + std::to_string(cfg.grid_h) + "-c" + short_real(c),
                     "cost=" + short_real(c), gen_sensor_id(sc)});
    }
  } else if (cfg.suite == "toy") {
    std::vector<Variable> vars = {{0, 2, VarKind::decision, {}}, {1, 2, VarKind::decision, {}}};
    out.push_back({"coordination", "toy",
                   InfluenceDiagram(vars, {Table{}, Table{}}, {Table{{0, 1}, {1.0, 0.1, 0.1, 2.0}}},
                                    UtilityMode::multiplicative)});
  } else {
    throw InvalidModelError("unknown suite '" + cfg.suite + "'");
  }
  return out;
}

std::vector<AlgorithmSpec> suite_specs(const BenchConfig& cfg) {
  std::vector<std::string> names = cfg.algorithms;
  if (names.empty()) {
    if (cfg.suite == "toy")
      names = {"spu+zero:tree", "spu:tree",         "bp0+zero:tree",       "bp0:tree",
               "anneal:tree",   "anneal-perturbed:tree", "prox-one:tree", "prox-harmonic:tree"};
    else if (cfg.suite == "sensor")
      names = {"spu:tree",      "bp0:tree",   "anneal:tree", "prox-one:tree",
               "prox-harmonic:tree", "spu:loopy", "anneal:loopy", "prox-one:loopy"};
    else
      names = {"spu:tree",    "prox-one:tree",         "spu:loopy",      "bp0:loopy",
               "anneal:loopy", "anneal-perturbed:loopy", "prox-one:loopy", "prox-harmonic:loopy"};
  }
  std::vector<AlgorithmSpec> out;
  for (const auto& n : names) {
    AlgorithmSpec s = cfg.base;
    std::string algo = n, junction = "tree";
    if (const auto c = n.find(':'); c != std::string::npos) {
      algo = n.substr(0, c);
      junction = n.substr(c + 1);
    }
    if (algo.size() > 5 && algo.substr(algo.size() - 5) == "+zero") {
      s.start_at_zero = true;
      algo.resize(algo.size() - 5);
    }
    s.algorithm = parse_algorithm(algo, &s.weights);
    s.junction = parse_junction(junction);
    s.validate();
    out.push_back(s);
  }
  return out;
}

}  // namespace meu
