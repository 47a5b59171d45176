// meu: command-line front end for the solvers, generators and benchmarks.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "meu/bench.hpp"
#include "meu/errors.hpp"
#include "meu/formats.hpp"
#include "meu/solvers.hpp"

namespace {

using Settings = std::map<std::string, std::string>;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw meu::Error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Flags shared by solve and bench. Values stay strings so a config file and
// the command line feed the same BenchConfig::apply.
void add_solver_flags(CLI::App* app, Settings& s) {
  app->add_option("--algo", s["algo"], "spu, bp0, anneal, anneal-perturbed or prox");
  app->add_option("--w", s["w"], "Prox-BP weights: one or harmonic");
  app->add_option("--junction", s["junction"], "tree or loopy");
  app->add_option("--restarts", s["restarts"], "number of restarts");
  app->add_option("--seed", s["seed"], "base seed");
  app->add_option("--tol", s["tol"], "message residual tolerance");
  app->add_option("--max-iters", s["max-iters"], "outer iteration cap");
  app->add_option("--inner-iters", s["inner-iters"], "Prox-BP inner sweep cap (default 5)");
  app->add_option("--damping", s["damping"], "message damping in [0, 1)");
}

meu::BenchConfig load_config(const std::string& config_path, Settings flags) {
  meu::BenchConfig cfg;
  Settings merged;
  if (!config_path.empty()) merged = meu::parse_config(slurp(config_path));
  for (auto& [k, v] : flags)
    if (!v.empty()) merged[k] = v;
  cfg.apply(merged);
  return cfg;
}

void print_strategy(const meu::InfluenceDiagram& id, const meu::Strategy& s, std::ostream& out) {
  for (int d : id.decisions()) {
    const auto vals = s.table(d);
    const auto parents = id.parents(d);
    const auto k = static_cast<std::size_t>(id.card(d));
    out << "decision " << d << " | parents";
    for (int p : parents) out << ' ' << p;
    out << '\n';
    std::vector<int> row(parents.size(), 0);
    for (std::size_t r = 0; r * k < vals.size(); ++r) {
      out << "  ";
      if (parents.empty()) out << "(no parents)";
      for (std::size_t i = 0; i < parents.size(); ++i) out << (i ? " " : "") << "x" << parents[i] << "=" << row[i];
      std::size_t best = 0;
      for (std::size_t x = 1; x < k; ++x)
        if (vals[r * k + x] > vals[r * k + best]) best = x;
      out << " -> " << best << '\n';
      for (std::size_t i = parents.size(); i-- > 0;) {
        if (++row[i] < id.card(parents[i])) break;
        row[i] = 0;
      }
    }
  }
}

meu::InfluenceDiagram load_model(const std::string& id_path, const std::string& uai_path, double fraction,
                                 std::uint64_t seed) {
  if (!id_path.empty() && !uai_path.empty()) throw meu::InvalidModelError("give either --id or --uai, not both");
  if (!id_path.empty()) return meu::read_id_file(id_path);
  if (!uai_path.empty()) return meu::bn_to_id(meu::read_uai_file(uai_path), fraction, seed);
  throw meu::InvalidModelError("a model is required: --id PATH or --uai PATH");
}

int run(int argc, char** argv) {
  CLI::App app{"Maximum expected utility solvers for influence diagrams"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "solve one influence diagram");
  Settings solve_flags;
  std::string id_path, uai_path, trace_out, solve_config;
  double fraction = 0.3;
  add_solver_flags(solve, solve_flags);
  solve->add_option("--id", id_path, "influence diagram file");
  solve->add_option("--uai", uai_path, "UAI Bayes net, converted on the fly");
  solve->add_option("--decisions", fraction, "decision fraction for --uai");
  solve->add_option("--out", trace_out, "trace CSV path");
  solve->add_option("--config", solve_config, "key=value settings file");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a random or sensor-network diagram");
  std::string kind = "random", gen_out, grid = "3x3";
  meu::RandomIdConfig rc;
  double cost = 0.0, coupling = 0.5;
  gen->add_option("--kind", kind, "random or sensor")->check(CLI::IsMember({"random", "sensor"}));
  gen->add_option("--n-vars", rc.n_vars, "node count");
  gen->add_option("--max-parents", rc.max_parents, "parent cap");
  gen->add_option("--card", rc.cardinality, "states per variable");
  gen->add_option("--decisions", rc.decision_fraction, "decision fraction");
  gen->add_option("--alpha", rc.dirichlet_alpha, "Dirichlet and Gamma shape");
  gen->add_option("--seed", rc.seed, "seed");
  gen->add_option("--grid", grid, "sensor grid WxH");
  gen->add_option("--cost", cost, "signal cost");
  gen->add_option("--coupling", coupling, "MRF coupling");
  gen->add_option("--out", gen_out, "output ID file (stdout if omitted)");

  // convert
  auto* convert = app.add_subcommand("convert", "turn a UAI Bayes net into an influence diagram");
  std::string conv_in, conv_out, conv_mode = "mul";
  double conv_fraction = 0.3;
  std::uint64_t conv_seed = 0;
  convert->add_option("--uai", conv_in, "UAI Bayes net")->required();
  convert->add_option("--decisions", conv_fraction, "decision fraction");
  convert->add_option("--seed", conv_seed, "seed");
  convert->add_option("--mode", conv_mode, "utility combination: mul or add")->check(CLI::IsMember({"mul", "add"}));
  convert->add_option("--out", conv_out, "output ID file (stdout if omitted)");

  // bench
  auto* bench = app.add_subcommand("bench", "run an experiment suite and write CSV reports");
  Settings bench_flags;
  std::string bench_config;
  add_solver_flags(bench, bench_flags);
  bench->add_option("--suite", bench_flags["suite"], "random20, sensor or toy");
  bench->add_option("--trials", bench_flags["trials"], "models per setting");
  bench->add_option("--decisions", bench_flags["fractions"], "comma-separated decision fractions");
  bench->add_option("--costs", bench_flags["costs"], "comma-separated signal costs");
  bench->add_option("--algos", bench_flags["algos"], "comma-separated name:junction list");
  bench->add_option("--threads", bench_flags["threads"], "worker threads");
  bench->add_option("--out", bench_flags["out"], "output prefix");
  bench->add_option("--config", bench_config, "key=value settings file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  if (*solve) {
    meu::BenchConfig cfg = load_config(solve_config, solve_flags);
    if (cfg.algorithms.empty()) cfg.algorithms = {"prox-one:tree"};
    if (cfg.algorithms.size() != 1) throw meu::InvalidModelError("solve runs exactly one algorithm");
    const meu::AlgorithmSpec spec = meu::suite_specs(cfg).front();
    const auto id = load_model(id_path, uai_path, fraction, spec.seed);
    meu::SolverContext ctx(id, spec.junction);
    const auto res = meu::run_with_restarts(ctx, spec);
    std::cout << "algorithm " << meu::algorithm_name(spec.algorithm, spec.weights) << " ("
              << meu::junction_name(spec.junction) << ")\n"
              << "MEU " << meu::format_real(res.eu) << (res.eu_exact ? "" : " (Bethe estimate)") << '\n'
              << "log MEU " << meu::format_real(res.log_eu) << '\n'
              << "iterations " << res.iterations << (res.converged ? " converged" : "") << '\n';
    print_strategy(id, res.strategy, std::cout);
    if (!trace_out.empty()) meu::write_trace(res.trace, trace_out);
    return 0;
  }

  if (*gen) {
    meu::InfluenceDiagram id = [&] {
      if (kind == "random") {
        rc.gamma_alpha = rc.dirichlet_alpha;
        return meu::gen_random_id(rc);
      }
      const auto x = grid.find('x');
      if (x == std::string::npos) throw meu::InvalidModelError("--grid expects WxH");
      auto sc = meu::SensorNetConfig::grid(std::stoi(grid.substr(0, x)), std::stoi(grid.substr(x + 1)));
      sc.cost = cost;
      sc.coupling = coupling;
      return meu::gen_sensor_id(sc);
    }();
    const std::string text = meu::write_id(id);
    if (gen_out.empty())
      std::cout << text;
    else
      meu::write_text_file(gen_out, text);
    return 0;
  }

  if (*convert) {
    const auto id = meu::bn_to_id(meu::read_uai_file(conv_in), conv_fraction, conv_seed,
                                  conv_mode == "add" ? meu::UtilityMode::additive : meu::UtilityMode::multiplicative);
    const std::string text = meu::write_id(id);
    if (conv_out.empty())
      std::cout << text;
    else
      meu::write_text_file(conv_out, text);
    return 0;
  }

  meu::BenchConfig cfg = load_config(bench_config, bench_flags);
  const auto models = meu::suite_models(cfg);
  const auto specs = meu::suite_specs(cfg);
  meu::ExperimentOptions opt;
  opt.report_path = cfg.out + "_report.csv";
  opt.summary_path = cfg.out + "_summary.csv";
  opt.trace_path = cfg.out + "_trace";
  opt.threads = cfg.threads;
  const auto rep = meu::run_experiment(models, specs, opt);
  meu::write_summary(rep.summary, std::cout);
  std::cerr << "wrote " << *opt.report_path << " and " << *opt.summary_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const meu::ResourceCapError& e) {
    std::cerr << "resource cap: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
