#include "dfaforge/extraction.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dfaforge/errors.hpp"

namespace dfaforge {

namespace {

ActivationTraceSet trace_skeleton(const SecondOrderRnn& rnn, const LabeledDataset& data) {
  ActivationTraceSet out;
  out.hidden = rnn.hidden();
  out.strings.reserve(data.size());
  out.labels.reserve(data.size());
  out.offsets.reserve(data.size() + 1);
  for (const auto& item : data.items) {
    check_binary(item.text);
    out.strings.push_back(item.text);
    out.labels.push_back(item.label);
    out.offsets.push_back(out.offsets.back() + item.text.size() + 2);
  }
  out.readouts.assign(data.size(), 0.0);
  out.states.assign(out.offsets.back() * out.hidden, 0.0);
  return out;
}

void fill_trace(const SecondOrderRnn& rnn, ActivationTraceSet& out, std::size_t i) {
  const int n = out.hidden;
  const std::string& s = out.strings[i];
  double* base = out.states.data() + out.offsets[i] * n;
  std::copy(rnn.initial_state().begin(), rnn.initial_state().end(), base);
  for (std::size_t t = 0; t <= s.size(); ++t) {
    const int symbol = t < s.size() ? symbol_index(s[t]) : kStopSymbol;
    step(rnn, std::span<const double>(base + t * n, n), symbol,
         std::span<double>(base + (t + 1) * n, n));
  }
  out.readouts[i] = base[(s.size() + 1) * n + rnn.response_index()];
}

Clustering fit_kmeans(const ClusterInput& input, const ExtractionConfig& cfg) {
  const std::size_t n = input.rows();
  if (cfg.fit_sample_cap == 0 || n <= cfg.fit_sample_cap)
    return kmeans(input.view(), cfg.k, cfg.seed, cfg.max_iters);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cfg.fit_sample_cap);
  std::sort(idx.begin(), idx.end());
  std::vector<double> sub;
  sub.reserve(idx.size() * input.dim);
  for (std::size_t i : idx) {
    auto p = input.view()[i];
    sub.insert(sub.end(), p.begin(), p.end());
  }
  Clustering cl = kmeans(PointsView{sub, input.dim}, cfg.k, cfg.seed, cfg.max_iters);
  cl.assignment.assign(n, 0);
  cl.inertia = assign_nearest(input.view(), cl.centroids, cl.k, cl.assignment);
  cl.inertia_history.push_back(cl.inertia);
  drop_empty_clusters(cl);
  return cl;
}

}  // namespace

ActivationTraceSet collect_activations_serial(const SecondOrderRnn& rnn,
                                              const LabeledDataset& data) {
  ActivationTraceSet out = trace_skeleton(rnn, data);
  for (std::size_t i = 0; i < out.size(); ++i) fill_trace(rnn, out, i);
  return out;
}

ActivationTraceSet collect_activations(const SecondOrderRnn& rnn, const LabeledDataset& data) {
  ActivationTraceSet out = trace_skeleton(rnn, data);
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) fill_trace(rnn, out, static_cast<std::size_t>(i));
  return out;
}

ClusterInput clustered_activations(const ActivationTraceSet& traces, bool include_post_stop) {
  ClusterInput in;
  in.dim = traces.hidden;
  in.with_post_stop = include_post_stop;
  in.first_row.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    in.first_row.push_back(in.string_id.size());
    const std::size_t rows = traces.trace_length(i) - (include_post_stop ? 0 : 1);
    for (std::size_t t = 0; t < rows; ++t) {
      auto h = traces.state(i, t);
      in.points.insert(in.points.end(), h.begin(), h.end());
      in.string_id.push_back(i);
      in.position.push_back(t);
    }
  }
  return in;
}

std::uint64_t TransitionCounts::row_total(int from, int symbol) const {
  std::uint64_t sum = 0;
  for (int to = 0; to < k; ++to) sum += at(from, symbol, to);
  return sum;
}

std::uint64_t TransitionCounts::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

TransitionCounts build_transitions(const ActivationTraceSet& traces, const ClusterInput& input,
                                   const Clustering& clustering) {
  if (clustering.assignment.size() != input.rows())
    throw UsageError("clustering does not cover the clustered activations");
  TransitionCounts counts(clustering.k);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string& s = traces.strings[i];
    const std::size_t row = input.first_row[i];
    for (std::size_t t = 0; t < s.size(); ++t) {
      const int from = clustering.assignment[row + t];
      const int to = clustering.assignment[row + t + 1];
      ++counts.at(from, symbol_index(s[t]), to);
    }
  }
  return counts;
}

std::string to_string(ClusteringMethod m) {
  return m == ClusteringMethod::kmeans ? "kmeans" : "quantize";
}

ClusteringMethod parse_clustering_method(std::string_view text) {
  if (text == "kmeans") return ClusteringMethod::kmeans;
  if (text == "quantize" || text == "binary_quantization")
    return ClusteringMethod::binary_quantization;
  throw UsageError("unknown clustering method '" + std::string(text) +
                   "' (expected kmeans or quantize)");
}

void ExtractionConfig::validate() const {
  if (method == ClusteringMethod::kmeans && k < 2)
    throw NeedTwoClusters("k-means extraction needs k >= 2, got " + std::to_string(k));
  if (max_iters < 1) throw UsageError("max_iters must be at least 1");
}

ExtractionResult extract_dfa(const SecondOrderRnn& rnn, const LabeledDataset& data,
                             const ExtractionConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw EmptyTraceSet("extraction needs at least one string");
  return extract_dfa(rnn, collect_activations(rnn, data), cfg);
}

ExtractionResult extract_dfa(const SecondOrderRnn& rnn, const ActivationTraceSet& traces,
                             const ExtractionConfig& cfg) {
  cfg.validate();
  if (traces.size() == 0) throw EmptyTraceSet("extraction needs at least one string");

  ExtractionDiagnostics diag;
  diag.k_requested = cfg.k;

  ClusterInput input = clustered_activations(traces, cfg.include_post_stop_states);
  diag.activations = input.rows();
  Clustering clustering = cfg.method == ClusteringMethod::kmeans
                              ? fit_kmeans(input, cfg)
                              : quantize_binary(input.view());
  const int k = clustering.k;
  diag.k_used = k;
  if (cfg.compute_silhouette && k >= 2)
    diag.silhouette = silhouette(input.view(), clustering, cfg.seed ^ 0x5111ULL);

  const TransitionCounts counts = build_transitions(traces, input, clustering);
  diag.counted_transitions = counts.total();

  std::vector<Dfa::Row> delta(k);
  std::uint64_t kept = 0;
  std::vector<double> next_state(rnn.hidden());
  for (int c = 0; c < k; ++c) {
    for (int a = 0; a < kAlphabetSize; ++a) {
      int best = -1;
      std::uint64_t best_n = 0;
      for (int to = 0; to < k; ++to) {
        const std::uint64_t n = counts.at(c, a, to);
        if (n == 0) continue;
        if (n > best_n) {
          best_n = n;
          best = to;
        } else if (n == best_n) {
          ++diag.transition_ties;
        }
      }
      if (best < 0) {
        // Unseen pair: one network step from the centroid, then nearest cluster.
        ++diag.unobserved_pairs;
        step(rnn, clustering.centroid(c), a, next_state);
        best = nearest_centroid(next_state, clustering.centroids, k);
      }
      delta[c][a] = best;
      kept += best_n;
    }
  }
  if (diag.counted_transitions > 0)
    diag.transition_consistency =
        static_cast<double>(kept) / static_cast<double>(diag.counted_transitions);

  // Initial state: the cluster nearest to h_init.
  StateId initial = 0;
  {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = squared_distance(rnn.initial_state(), clustering.centroid(c));
      if (d < best) {
        best = d;
        initial = c;
      } else if (d == best) {
        ++diag.initial_ties;
      }
    }
  }

  // Acceptance: majority of member activations whose stop-step readout exceeds
  // the threshold; ties reject. Post-stop rows never vote.
  std::vector<std::int64_t> votes(k, 0);
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const std::size_t i = input.string_id[r];
    if (input.position[r] > traces.strings[i].size()) continue;
    step(rnn, input.view()[r], kStopSymbol, next_state);
    votes[clustering.assignment[r]] +=
        next_state[rnn.response_index()] > kDecisionThreshold ? 1 : -1;
  }
  std::vector<bool> accepting(k);
  for (int c = 0; c < k; ++c) {
    accepting[c] = votes[c] > 0;
    if (votes[c] == 0) ++diag.vote_ties;
  }

  Dfa raw(k, initial, std::move(accepting), std::move(delta));
  diag.pre_minimization_states = canonicalize(raw).num_states();
  Dfa minimal = minimize(raw);
  return ExtractionResult{std::move(minimal), std::move(raw), diag, std::move(clustering),
                          std::move(input)};
}

double dfa_accuracy_serial(const Dfa& dfa, const LabeledDataset& data) {
  if (data.empty()) return 1.0;
  std::size_t hits = 0;
  for (const auto& item : data.items)
    if (accepts(dfa, item.text) == item.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double dfa_accuracy(const Dfa& dfa, const LabeledDataset& data) {
  if (data.empty()) return 1.0;
  const auto count = static_cast<std::ptrdiff_t>(data.size());
  std::size_t hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    if (accepts(dfa, data.items[i].text) == data.items[i].label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

bool is_correct(const Dfa& dfa, const LabeledDataset& data) {
  return std::all_of(data.items.begin(), data.items.end(),
                     [&](const LabeledString& x) { return accepts(dfa, x.text) == x.label; });
}

nlohmann::json extraction_report(const ExtractionConfig& cfg, const ExtractionResult& result) {
  const auto& d = result.diagnostics;
  nlohmann::json j;
  j["config"] = {{"k", cfg.k},
                 {"method", to_string(cfg.method)},
                 {"seed", cfg.seed},
                 {"include_post_stop_states", cfg.include_post_stop_states},
                 {"max_iters", cfg.max_iters},
                 {"fit_sample_cap", cfg.fit_sample_cap}};
  j["diagnostics"] = {{"k_requested", d.k_requested},
                      {"k_used", d.k_used},
                      {"silhouette", d.silhouette ? nlohmann::json(*d.silhouette) : nlohmann::json()},
                      {"unobserved_pairs", d.unobserved_pairs},
                      {"pre_minimization_states", d.pre_minimization_states},
                      {"transition_ties", d.transition_ties},
                      {"vote_ties", d.vote_ties},
                      {"initial_ties", d.initial_ties},
                      {"activations", d.activations},
                      {"counted_transitions", d.counted_transitions},
                      {"transition_consistency", d.transition_consistency}};
  j["states"] = result.dfa.num_states();
  j["dfa"] = serialize(result.dfa);
  j["dot"] = to_dot(result.dfa);
  return j;
}

std::string clustering_csv(const ClusterInput& input, const Clustering& clustering) {
  std::ostringstream os;
  os << "activation_index,string_id,position,cluster_id\n";
  for (std::size_t r = 0; r < input.rows(); ++r)
    os << r << ',' << input.string_id[r] << ',' << input.position[r] << ','
       << clustering.assignment[r] << '\n';
  return os.str();
}

}  // namespace dfaforge
