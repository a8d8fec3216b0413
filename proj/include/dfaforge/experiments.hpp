#pragma once

// The four experiment families: model capacity, training time, random initial
// hidden state, and long-string generalization. Each returns a report made of
// plain tables that write_report turns into CSV files plus a JSON manifest.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfaforge/extraction.hpp"
#include "dfaforge/rnn.hpp"
#include "dfaforge/tomita.hpp"

namespace dfaforge {

// Default cap per grammar: twice the last epoch at which the reference
// training-time table still lists that grammar.
int default_epoch_cap(GrammarId g);

struct ExperimentConfig {
  int grammar = 1;
  int min_len = kDefaultMinLen;
  int max_len = kDefaultMaxLen;
  double test_fraction = kDefaultTestFraction;

  int hidden = 15;
  TrainConfig train;
  // 0 means default_epoch_cap(grammar).
  int epoch_cap = 0;

  int k_min = 3;
  int k_max = 15;
  ClusteringMethod method = ClusteringMethod::kmeans;
  bool include_post_stop_states = false;
  bool compute_silhouette = true;
  std::size_t fit_sample_cap = 20000;

  // capacity
  std::vector<int> hidden_values{5, 10, 15, 20, 30};
  int seeds = 3;
  // training time; empty means the grammar's reference epoch axis
  std::vector<int> checkpoints;
  int long_eval_length = 200;
  // random initial state
  int n_inits = 10;
  // long strings
  int long_hidden = 9;
  int long_min = 20;
  int long_max = 200;
  int long_step = 20;
  int n_per_length = 100000;
  int max_attempts = 10;
  // Which K's automaton an attempt keeps: "silhouette" (highest silhouette,
  // chosen without looking at labels) or "best_accuracy" (highest test accuracy).
  std::string long_k_selection = "silhouette";

  std::uint64_t master_seed = 1;
  int jobs = 1;

  int effective_epoch_cap() const;
  std::vector<int> k_values() const;
  std::vector<int> effective_checkpoints() const;
  // Throws UsageError.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// splitmix64 over the master seed and the cell coordinates.
std::uint64_t cell_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentReport {
  std::string experiment;
  ExperimentConfig config;
  nlohmann::json axes;
  nlohmann::json summary;
  std::vector<Table> tables;
  // file name -> DOT text
  std::map<std::string, std::string> dots;

  const Table& table(const std::string& name) const;
  // Hex digest of the manifest's config section; names the run directory.
  std::string config_hash() const;
  nlohmann::json manifest() const;
};

ExperimentReport capacity_sweep(const ExperimentConfig& cfg);
ExperimentReport training_time_sweep(const ExperimentConfig& cfg);
ExperimentReport random_init_sweep(const ExperimentConfig& cfg);
ExperimentReport long_string_comparison(const ExperimentConfig& cfg);

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"capacity", "training-time", "random-init",
                                              "long-strings"};
  return names;
}
// Throws UsageError listing the valid names.
ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& cfg);

// Writes <root>/<experiment>-g<G>-<hash>/ with one CSV per table, manifest.json
// and dot/*.dot. Returns the run directory. Throws IoError.
std::string write_report(const ExperimentReport& report, const std::string& root);

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

// Trains from scratch until 100% accuracy on `test` or `cap` epochs.
struct ConvergenceRun {
  TrainResult result;
  bool converged = false;
  int epochs = 0;  // epochs_run; equals cap when not converged
  double test_accuracy = 0.0;
};
ConvergenceRun train_to_convergence(SecondOrderRnn init, const LabeledDataset& train,
                                    const LabeledDataset& test, TrainConfig cfg, int cap,
                                    const std::vector<int>& checkpoints = {});

}  // namespace dfaforge
