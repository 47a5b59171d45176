#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "meu/model.hpp"
#include "meu/solvers.hpp"

namespace meu {

struct RandomIdConfig {
  int n_vars = 20;
  int max_parents = 3;
  int cardinality = 4;
  double decision_fraction = 0.3;
  double dirichlet_alpha = 1.0;
  double gamma_alpha = 1.0;
  UtilityMode utility_mode = UtilityMode::additive;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random DAG over n_vars nodes in index order; node i > 0 draws
/// 1..min(i, max_parents) parents uniformly without replacement. Leaves
/// become utility factors over their parents with Gamma(gamma_alpha, 1)
/// entries; a fraction of the remaining nodes become decisions; chance CPT
/// rows follow Dir(dirichlet_alpha).
InfluenceDiagram gen_random_id(const RandomIdConfig& cfg);

enum class SensorAccuracy { accurate, noisy };

struct SensorNetConfig {
  int n_sensors = 0;
  std::vector<std::pair<int, int>> mrf_edges;     // undirected couplings
  std::vector<SensorAccuracy> accuracy;           // per sensor
  std::vector<std::pair<int, int>> signal_edges;  // directed i -> j
  double coupling = 0.5;
  double accurate_prob = 0.9;
  double noisy_prob = 0.6;
  double reward = 2.718281828459045;
  double cost = 0.0;
  std::uint64_t seed = 0;  // used by random topologies only

  /// w x h grid, left column accurate, signals flowing rightwards along rows.
  static SensorNetConfig grid(int w, int h);
  /// n sensors with `edges` random couplings (a random spanning tree first),
  /// the first ceil(n / 3) accurate, signals from each accurate sensor to one
  /// of its noisy MRF neighbours.
  static SensorNetConfig random_graph(int n, int edges, std::uint64_t seed);

  void validate() const;
};

/// Variable ids of the generated sensor diagram.
struct SensorLayout {
  std::vector<int> hidden, observed, predict;
  std::vector<int> signal;  // one per signal edge, in edge order
};

/// Hidden states h_i (pairwise MRF turned into a DAG by triangulation),
/// readings v_i, one binary signal decision per signal edge and a prediction
/// decision per sensor. Additive utility: reward when d_i = h_i (1 otherwise)
/// and, per signal, 1 when silent and exp(-cost) when sent.
InfluenceDiagram gen_sensor_id(const SensorNetConfig& cfg, SensorLayout* layout = nullptr);

/// Expected number of signals sent under a strategy.
double expected_signals(const InfluenceDiagram& id, const Strategy& s, const SensorLayout& layout);

struct NamedModel {
  std::string name;
  std::string group;  // aggregation key, e.g. "frac=0.3"
  InfluenceDiagram id;
};

struct ExperimentRow {
  std::string model;
  std::string group;
  std::string algorithm;
  std::string junction;
  double log_meu = kLogZero;
  double rel_log_meu = 0.0;  // against the baseline of the same model
  std::string baseline_junction;
  int iterations = 0;
  double ms = 0.0;
  bool eu_exact = true;
  std::string status = "ok";  // or the error message
};

struct SummaryRow {
  std::string group;
  std::string algorithm;
  std::string junction;
  int trials = 0;
  int failures = 0;
  double mean_log_meu = 0.0;
  double mean_rel_log_meu = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<SummaryRow> summary;
  SolveTrace trace;
};

struct ExperimentOptions {
  std::optional<std::string> trace_path;
  std::optional<std::string> report_path;
  std::optional<std::string> summary_path;
  int threads = 1;
};

/// Runs every (model, spec) pair through run_with_restarts. The baseline is
/// SPU on the junction tree (SPU on the loopy graph when the tree is over
/// the cap), with the restarts and seed of the first spec. A failure on one
/// pair is recorded in its row.
ExperimentReport run_experiment(const std::vector<NamedModel>& models,
                                const std::vector<AlgorithmSpec>& specs,
                                const ExperimentOptions& options = {});

void write_report(const std::vector<ExperimentRow>& rows, std::ostream& out);
void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out);

/// Line-oriented key=value settings; '#' starts a comment. Keys mirror the
/// command-line flags without dashes.
std::map<std::string, std::string> parse_config(const std::string& text);

struct BenchConfig {
  std::string suite = "random20";  // random20 | sensor | toy
  int trials = 20;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> costs = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  double alpha = 1.0;
  int n_vars = 20;
  int max_parents = 3;
  int cardinality = 4;
  int grid_w = 3;
  int grid_h = 3;
  std::vector<std::string> algorithms;  // "name:junction"; empty means the default set
  AlgorithmSpec base;                   // restarts, seed, tolerances
  std::string out = "bench";            // prefix of the output files
  int threads = 1;

  /// Applies settings from parse_config; unknown keys throw InvalidModelError.
  /// A single algo / w / junction triple replaces the algorithm list (algo
  /// defaults to prox).
  void apply(const std::map<std::string, std::string>& kv);
};

std::vector<NamedModel> suite_models(const BenchConfig& cfg);
std::vector<AlgorithmSpec> suite_specs(const BenchConfig& cfg);

}  // namespace meu
