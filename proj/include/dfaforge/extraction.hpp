#pragma once

// Rule extraction: collect the hidden activations of a trained network, cluster
// them into discrete states, tabulate the transitions between clusters, and
// minimize the resulting automaton.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfaforge/clustering.hpp"
#include "dfaforge/dfa.hpp"
#include "dfaforge/rnn.hpp"
#include "dfaforge/tomita.hpp"

namespace dfaforge {

struct ActivationTraceSet {
  int hidden = 0;
  std::vector<std::string> strings;
  std::vector<bool> labels;
  std::vector<double> readouts;
  // Trace i occupies rows offsets[i] .. offsets[i+1]-1 of `states`.
  std::vector<std::size_t> offsets{0};
  std::vector<double> states;

  std::size_t size() const { return strings.size(); }
  std::size_t trace_length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::span<const double> state(std::size_t i, std::size_t t) const {
    return {states.data() + (offsets[i] + t) * hidden, static_cast<std::size_t>(hidden)};
  }
};

ActivationTraceSet collect_activations(const SecondOrderRnn& rnn, const LabeledDataset& data);
ActivationTraceSet collect_activations_serial(const SecondOrderRnn& rnn,
                                              const LabeledDataset& data);

// The activations handed to the clustering step: for every string, the states
// before each binary symbol and after the last one (|s| + 1 rows), plus the
// post-stop state when requested.
struct ClusterInput {
  int dim = 0;
  bool with_post_stop = false;
  std::vector<double> points;
  std::vector<std::size_t> first_row;  // per string
  std::vector<std::size_t> string_id;  // per row
  std::vector<std::size_t> position;   // per row

  PointsView view() const { return {points, dim}; }
  std::size_t rows() const { return string_id.size(); }
};

ClusterInput clustered_activations(const ActivationTraceSet& traces, bool include_post_stop);

struct TransitionCounts {
  int k = 0;
  std::vector<std::uint64_t> counts;  // k x 2 x k

  explicit TransitionCounts(int clusters = 0)
      : k(clusters), counts(static_cast<std::size_t>(clusters) * kAlphabetSize * clusters, 0) {}
  std::uint64_t& at(int from, int symbol, int to) {
    return counts[(static_cast<std::size_t>(from) * kAlphabetSize + symbol) * k + to];
  }
  std::uint64_t at(int from, int symbol, int to) const {
    return counts[(static_cast<std::size_t>(from) * kAlphabetSize + symbol) * k + to];
  }
  std::uint64_t row_total(int from, int symbol) const;
  std::uint64_t total() const;
};

// Counts cluster-to-cluster moves over every binary-symbol step; the stop step
// is never counted.
TransitionCounts build_transitions(const ActivationTraceSet& traces, const ClusterInput& input,
                                   const Clustering& clustering);

enum class ClusteringMethod { kmeans, binary_quantization };

std::string to_string(ClusteringMethod m);
ClusteringMethod parse_clustering_method(std::string_view text);

struct ExtractionConfig {
  int k = 10;
  ClusteringMethod method = ClusteringMethod::kmeans;
  std::uint64_t seed = 0;
  bool include_post_stop_states = false;
  int max_iters = kDefaultMaxIters;
  bool compute_silhouette = true;
  // When positive and there are more activations than this, k-means is fitted
  // on a seeded subsample of this size and every activation is then assigned
  // to its nearest fitted centroid. 0 fits on everything.
  std::size_t fit_sample_cap = 0;

  // Throws NeedTwoClusters for k < 2 with k-means.
  void validate() const;
};

struct ExtractionDiagnostics {
  int k_requested = 0;
  int k_used = 0;
  std::optional<double> silhouette;
  int unobserved_pairs = 0;
  int pre_minimization_states = 0;
  int transition_ties = 0;
  int vote_ties = 0;
  int initial_ties = 0;
  std::size_t activations = 0;
  std::uint64_t counted_transitions = 0;
  // Share of counted transitions that agree with the kept (argmax) target.
  double transition_consistency = 1.0;
};

struct ExtractionResult {
  Dfa dfa;  // minimized
  Dfa raw;  // one state per cluster, before minimization
  ExtractionDiagnostics diagnostics;
  Clustering clustering;
  ClusterInput input;
};

// collect -> cluster -> count transitions -> keep the most frequent target per
// (cluster, symbol) -> complete unseen pairs by stepping the network from the
// cluster centroid -> label clusters by majority stop-step readout -> minimize.
ExtractionResult extract_dfa(const SecondOrderRnn& rnn, const LabeledDataset& data,
                             const ExtractionConfig& cfg);

// Same pipeline on already collected traces.
ExtractionResult extract_dfa(const SecondOrderRnn& rnn, const ActivationTraceSet& traces,
                             const ExtractionConfig& cfg);

double dfa_accuracy(const Dfa& dfa, const LabeledDataset& data);
double dfa_accuracy_serial(const Dfa& dfa, const LabeledDataset& data);
// 100% agreement with the labels.
bool is_correct(const Dfa& dfa, const LabeledDataset& data);

nlohmann::json extraction_report(const ExtractionConfig& cfg, const ExtractionResult& result);

// activation_index,string_id,position,cluster_id
std::string clustering_csv(const ClusterInput& input, const Clustering& clustering);

}  // namespace dfaforge
