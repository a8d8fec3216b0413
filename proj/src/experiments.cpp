#include "dfaforge/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dfaforge/errors.hpp"

namespace dfaforge {

namespace fs = std::filesystem;
using nlohmann::json;

int default_epoch_cap(GrammarId g) {
  static const int caps[] = {420, 1400, 140, 140, 1800, 540, 280};
  return caps[g.value() - 1];
}

std::vector<int> default_checkpoints(GrammarId g) {
  // Epoch axes of the reference training-time tables.
  auto range = [](int first, int step) {
    std::vector<int> v;
    for (int i = 0; i < 7; ++i) v.push_back(first + i * step);
    return v;
  };
  switch (g.value()) {
    case 1: return range(30, 30);
    case 2: return range(100, 100);
    case 3: return range(10, 10);
    case 4: return range(10, 10);
    case 5: return range(600, 50);
    case 6: return range(90, 30);
    default: return range(20, 20);
  }
}

int ExperimentConfig::effective_epoch_cap() const {
  return epoch_cap > 0 ? epoch_cap : default_epoch_cap(GrammarId(grammar));
}

std::vector<int> ExperimentConfig::k_values() const {
  std::vector<int> v;
  for (int k = k_min; k <= k_max; ++k) v.push_back(k);
  return v;
}

std::vector<int> ExperimentConfig::effective_checkpoints() const {
  return checkpoints.empty() ? default_checkpoints(GrammarId(grammar)) : checkpoints;
}

void ExperimentConfig::validate() const {
  GrammarId{grammar};
  if (min_len < 0 || max_len < min_len) throw UsageError("need 0 <= min_len <= max_len");
  if (max_len > 24) throw UsageError("max_len above 24 is not enumerable");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must lie in (0, 1)");
  if (hidden < 1 || long_hidden < 1) throw UsageError("hidden size must be positive");
  if (epoch_cap < 0) throw UsageError("epoch cap must be non-negative");
  if (k_min < 1 || k_max < k_min) throw UsageError("need 1 <= k_min <= k_max");
  if (method == ClusteringMethod::kmeans && k_min < 2)
    throw NeedTwoClusters("k-means extraction needs k >= 2");
  if (hidden_values.empty()) throw UsageError("hidden_values must not be empty");
  for (int n : hidden_values)
    if (n < 1) throw UsageError("hidden_values must be positive");
  if (seeds < 1) throw UsageError("seeds must be at least 1");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end())
    throw UsageError("checkpoints must be strictly ascending");
  for (int c : checkpoints)
    if (c < 1) throw UsageError("checkpoints must be positive");
  if (long_eval_length < 1) throw UsageError("long_eval_length must be positive");
  if (n_inits < 2) throw UsageError("n_inits must be at least 2");
  if (long_min < 1 || long_max < long_min || long_step < 1)
    throw UsageError("need 1 <= long_min <= long_max and long_step >= 1");
  if (n_per_length < 1) throw UsageError("n_per_length must be positive");
  if (max_attempts < 1) throw UsageError("max_attempts must be positive");
  if (long_k_selection != "silhouette" && long_k_selection != "best_accuracy")
    throw UsageError("long_k_selection must be silhouette or best_accuracy");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  TrainConfig t = train;
  t.epochs = std::max(1, t.epochs);
  t.validate();
}

json to_json(const ExperimentConfig& c) {
  return json{{"grammar", c.grammar},
              {"min_len", c.min_len},
              {"max_len", c.max_len},
              {"test_fraction", c.test_fraction},
              {"hidden", c.hidden},
              {"learning_rate", c.train.learning_rate},
              {"rms_decay", c.train.rms_decay},
              {"rms_epsilon", c.train.rms_epsilon},
              {"weight_init_scale", c.train.weight_init_scale},
              {"shuffle_each_epoch", c.train.shuffle_each_epoch},
              {"balance_classes", c.train.balance_classes},
              {"epoch_cap", c.effective_epoch_cap()},
              {"k_min", c.k_min},
              {"k_max", c.k_max},
              {"method", to_string(c.method)},
              {"include_post_stop_states", c.include_post_stop_states},
              {"compute_silhouette", c.compute_silhouette},
              {"fit_sample_cap", c.fit_sample_cap},
              {"hidden_values", c.hidden_values},
              {"seeds", c.seeds},
              {"checkpoints", c.effective_checkpoints()},
              {"long_eval_length", c.long_eval_length},
              {"n_inits", c.n_inits},
              {"long_hidden", c.long_hidden},
              {"long_min", c.long_min},
              {"long_max", c.long_max},
              {"long_step", c.long_step},
              {"n_per_length", c.n_per_length},
              {"max_attempts", c.max_attempts},
              {"long_k_selection", c.long_k_selection},
              {"master_seed", c.master_seed}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("experiment config must be a JSON object");
  ExperimentConfig c;
  static const std::set<std::string> known{
      "grammar", "min_len", "max_len", "test_fraction", "hidden", "learning_rate",
      "rms_decay", "rms_epsilon", "weight_init_scale", "shuffle_each_epoch",
      "balance_classes", "epoch_cap", "k_min", "k_max", "method",
      "include_post_stop_states", "compute_silhouette", "fit_sample_cap", "hidden_values",
      "seeds", "checkpoints", "long_eval_length", "n_inits", "long_hidden", "long_min",
      "long_max", "long_step", "n_per_length", "max_attempts", "long_k_selection", "master_seed", "jobs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ParseError("unknown config key '" + it.key() + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("grammar", c.grammar);
    get("min_len", c.min_len);
    get("max_len", c.max_len);
    get("test_fraction", c.test_fraction);
    get("hidden", c.hidden);
    get("learning_rate", c.train.learning_rate);
    get("rms_decay", c.train.rms_decay);
    get("rms_epsilon", c.train.rms_epsilon);
    get("weight_init_scale", c.train.weight_init_scale);
    get("shuffle_each_epoch", c.train.shuffle_each_epoch);
    get("balance_classes", c.train.balance_classes);
    get("epoch_cap", c.epoch_cap);
    get("k_min", c.k_min);
    get("k_max", c.k_max);
    if (j.contains("method")) c.method = parse_clustering_method(j.at("method").get<std::string>());
    get("include_post_stop_states", c.include_post_stop_states);
    get("compute_silhouette", c.compute_silhouette);
    get("fit_sample_cap", c.fit_sample_cap);
    get("hidden_values", c.hidden_values);
    get("seeds", c.seeds);
    get("checkpoints", c.checkpoints);
    get("long_eval_length", c.long_eval_length);
    get("n_inits", c.n_inits);
    get("long_hidden", c.long_hidden);
    get("long_min", c.long_min);
    get("long_max", c.long_max);
    get("long_step", c.long_step);
    get("n_per_length", c.n_per_length);
    get("max_attempts", c.max_attempts);
    get("long_k_selection", c.long_k_selection);
    get("master_seed", c.master_seed);
    get("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  return c;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}
template <class T>
std::string num(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}
std::string flag(bool b) { return b ? "1" : "0"; }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
// its own slot, so results do not depend on scheduling.
void parallel_cells(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(jobs, n));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
#ifdef _OPENMP
      omp_set_num_threads(1);
#endif
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct TrainCell {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ConvergenceRun run;
  ActivationTraceSet traces;
};

struct ExtractCell {
  bool ok = false;
  std::string error;
  int k_used = 0;
  int states = 0;
  int pre_min_states = 0;
  int unobserved = 0;
  std::optional<double> silhouette;
  double dfa_accuracy = 0.0;
  double dfa_accuracy_long = 0.0;
  bool success = false;
  std::string dot;
  std::optional<Dfa> dfa;
};

ExtractionConfig extraction_config(const ExperimentConfig& cfg, int k, std::uint64_t seed) {
  ExtractionConfig e;
  e.k = k;
  e.method = cfg.method;
  e.seed = seed;
  e.include_post_stop_states = cfg.include_post_stop_states;
  e.compute_silhouette = cfg.compute_silhouette;
  e.fit_sample_cap = cfg.fit_sample_cap;
  return e;
}

// Extraction of one K from precomputed traces, scored on `test`.
ExtractCell extract_cell(const SecondOrderRnn& model, const ActivationTraceSet& traces,
                         const LabeledDataset& test, const ExtractionConfig& ecfg) {
  ExtractCell cell;
  try {
    ExtractionResult r = extract_dfa(model, traces, ecfg);
    cell.ok = true;
    cell.k_used = r.diagnostics.k_used;
    cell.states = r.dfa.num_states();
    cell.pre_min_states = r.diagnostics.pre_minimization_states;
    cell.unobserved = r.diagnostics.unobserved_pairs;
    cell.silhouette = r.diagnostics.silhouette;
    cell.dfa_accuracy = dfa_accuracy(r.dfa, test);
    cell.success = cell.dfa_accuracy == 1.0;
    cell.dot = to_dot(r.dfa);
    cell.dfa = std::move(r.dfa);
  } catch (const Error& e) {
    cell.error = e.what();
  }
  return cell;
}

DatasetSplit make_data(const ExperimentConfig& cfg) {
  return generate_dataset(GrammarId(cfg.grammar), cfg.min_len, cfg.max_len, cfg.test_fraction,
                          cell_seed(cfg.master_seed, {0}));
}

TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

void train_cell(TrainCell& cell, SecondOrderRnn init, const DatasetSplit& data,
                const ExperimentConfig& cfg) {
  try {
    cell.run = train_to_convergence(std::move(init), data.train, data.test,
                                    train_config(cfg, cell.seed), cfg.effective_epoch_cap());
    cell.traces = collect_activations(cell.run.result.model, data.test);
    cell.ok = true;
  } catch (const Error& e) {
    cell.error = e.what();
  }
}

const std::vector<std::string> kTrainingColumns{
    "hidden", "replicate", "seed", "converged", "epochs", "rnn_accuracy_test", "final_loss",
    "error"};

std::vector<std::string> training_row(int hidden, std::size_t replicate, const TrainCell& c) {
  if (!c.ok) return {num(hidden), num(replicate), num(c.seed), "", "", "", "", c.error};
  return {num(hidden),
          num(replicate),
          num(c.seed),
          flag(c.run.converged),
          num(c.run.epochs),
          num(c.run.test_accuracy),
          c.run.result.loss_curve.empty() ? "" : num(c.run.result.loss_curve.back()),
          ""};
}

void append_loss_rows(Table& t, int hidden, std::size_t replicate, const TrainCell& c) {
  if (!c.ok) return;
  const auto& curve = c.run.result.loss_curve;
  for (std::size_t e = 0; e < curve.size(); ++e)
    t.rows.push_back({num(hidden), num(replicate), num(e + 1), num(curve[e])});
}

const std::vector<std::string> kExtractionColumns{
    "hidden",        "replicate",       "k",          "converged",
    "k_used",        "states",          "pre_minimization_states",
    "unobserved_pairs", "silhouette",   "dfa_accuracy", "extraction_success", "error"};

std::vector<std::string> extraction_row(int hidden, std::size_t replicate, int k,
                                        const TrainCell& t, const ExtractCell& c) {
  if (!t.ok || !c.ok)
    return {num(hidden), num(replicate), num(k), t.ok ? flag(t.run.converged) : "",
            "", "", "", "", "", "", "", t.ok ? c.error : t.error};
  return {num(hidden),       num(replicate),   num(k),
          flag(t.run.converged), num(c.k_used), num(c.states),
          num(c.pre_min_states), num(c.unobserved), opt_num(c.silhouette),
          num(c.dfa_accuracy), flag(c.success), ""};
}

std::string dot_name(const std::string& prefix, int k) {
  return prefix + "_k" + std::to_string(k) + ".dot";
}

// Trains `inits` in parallel and extracts every K from each; rows go to the
// training, loss and extraction tables.
struct Grid {
  std::vector<TrainCell> trains;
  std::vector<ExtractCell> extracts;  // trains.size() x ks.size()
};

Grid run_grid(const std::vector<std::pair<std::uint64_t, SecondOrderRnn>>& inits,
              const DatasetSplit& data, const ExperimentConfig& cfg,
              const std::function<std::uint64_t(std::size_t, int)>& extract_seed) {
  Grid g;
  g.trains.resize(inits.size());
  for (std::size_t i = 0; i < inits.size(); ++i) g.trains[i].seed = inits[i].first;
  parallel_cells(inits.size(), cfg.jobs,
                 [&](std::size_t i) { train_cell(g.trains[i], inits[i].second, data, cfg); });

  const auto ks = cfg.k_values();
  g.extracts.resize(inits.size() * ks.size());
  parallel_cells(g.extracts.size(), cfg.jobs, [&](std::size_t cell) {
    const std::size_t i = cell / ks.size();
    const int k = ks[cell % ks.size()];
    if (!g.trains[i].ok) return;
    g.extracts[cell] = extract_cell(g.trains[i].run.result.model, g.trains[i].traces, data.test,
                                    extraction_config(cfg, k, extract_seed(i, k)));
  });
  for (auto& t : g.trains) t.traces = ActivationTraceSet{};
  return g;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

ConvergenceRun train_to_convergence(SecondOrderRnn init, const LabeledDataset& train,
                                    const LabeledDataset& test, TrainConfig cfg, int cap,
                                    const std::vector<int>& checkpoints) {
  ConvergenceRun out;
  cfg.epochs = cap;
  double last_acc = 0.0;
  EpochHook hook = [&](int, const SecondOrderRnn& model, double) {
    last_acc = accuracy(model, test);
    return last_acc == 1.0;
  };
  out.result = dfaforge::train(std::move(init), train, cfg, checkpoints, hook);
  out.test_accuracy = last_acc;
  out.converged = last_acc == 1.0;
  out.epochs = out.result.epochs_run;
  return out;
}

const Table& ExperimentReport::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw UsageError("report has no table '" + name + "'");
}

std::string ExperimentReport::config_hash() const {
  // FNV-1a over the canonical config dump.
  const std::string text = experiment + "\n" + to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

json ExperimentReport::manifest() const {
  json tables_j = json::array();
  for (const auto& t : tables)
    tables_j.push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"columns", t.columns},
                        {"rows", t.rows.size()}});
  json dots_j = json::array();
  for (const auto& [name, text] : dots) dots_j.push_back("dot/" + name);
  return json{{"experiment", experiment},
              {"config", to_json(config)},
              {"config_hash", config_hash()},
              {"master_seed", config.master_seed},
              {"axes", axes},
              {"summary", summary},
              {"tables", tables_j},
              {"dot_files", dots_j}};
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("slope needs two or more points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw UsageError("slope needs distinct x values");
  return sxy / sxx;
}

ExperimentReport capacity_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const DatasetSplit data = make_data(cfg);
  const auto ks = cfg.k_values();

  std::vector<std::pair<std::uint64_t, SecondOrderRnn>> inits;
  std::vector<std::pair<int, std::size_t>> coords;
  for (int n : cfg.hidden_values)
    for (int r = 0; r < cfg.seeds; ++r) {
      const std::uint64_t seed = cell_seed(cfg.master_seed, {1, std::uint64_t(n), std::uint64_t(r)});
      inits.emplace_back(seed, SecondOrderRnn::random(n, cfg.train.weight_init_scale, seed));
      coords.emplace_back(n, r);
    }
  const Grid grid = run_grid(inits, data, cfg, [&](std::size_t i, int k) {
    return cell_seed(cfg.master_seed,
                     {2, std::uint64_t(coords[i].first), coords[i].second, std::uint64_t(k)});
  });

  ExperimentReport rep;
  rep.experiment = "capacity";
  rep.config = cfg;
  rep.axes = {{"hidden", cfg.hidden_values}, {"replicate", cfg.seeds}, {"k", ks}};
  Table training{"training", kTrainingColumns, {}};
  Table loss{"loss", {"hidden", "replicate", "epoch", "loss"}, {}};
  Table extraction{"extraction", kExtractionColumns, {}};
  Table per_hidden{"per_hidden",
                   {"hidden", "mean_epochs", "converged_runs", "successful_k_count",
                    "success_rate"},
                   {}};
  json k_sets = json::object();
  for (std::size_t i = 0; i < grid.trains.size(); ++i) {
    const auto [n, r] = coords[i];
    training.rows.push_back(training_row(n, r, grid.trains[i]));
    append_loss_rows(loss, n, r, grid.trains[i]);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const auto& c = grid.extracts[i * ks.size() + j];
      extraction.rows.push_back(extraction_row(n, r, ks[j], grid.trains[i], c));
      if (c.ok && c.success)
        rep.dots[dot_name("n" + std::to_string(n) + "_r" + std::to_string(r), ks[j])] = c.dot;
    }
  }
  for (int n : cfg.hidden_values) {
    std::vector<double> epochs;
    int converged = 0, successes = 0, cells = 0;
    std::set<int> good_k;
    for (std::size_t i = 0; i < grid.trains.size(); ++i) {
      if (coords[i].first != n) continue;
      const auto& t = grid.trains[i];
      if (t.ok) {
        epochs.push_back(t.run.epochs);
        converged += t.run.converged;
      }
      for (std::size_t j = 0; j < ks.size(); ++j) {
        ++cells;
        const auto& c = grid.extracts[i * ks.size() + j];
        if (c.ok && c.success) {
          ++successes;
          good_k.insert(ks[j]);
        }
      }
    }
    per_hidden.rows.push_back({num(n), num(mean(epochs)), num(converged),
                               num(good_k.size()), num(double(successes) / cells)});
    k_sets[std::to_string(n)] = good_k;
  }
  rep.summary = {{"successful_k_by_hidden", k_sets}};
  rep.tables = {training, loss, extraction, per_hidden};
  return rep;
}

ExperimentReport training_time_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const GrammarId g(cfg.grammar);
  const DatasetSplit data = make_data(cfg);
  const auto ks = cfg.k_values();
  const auto checkpoints = cfg.effective_checkpoints();
  const LabeledDataset long_test = generate_long_testset(
      g, cfg.long_eval_length, cfg.n_per_length, cell_seed(cfg.master_seed, {4}));

  const std::uint64_t seed = cell_seed(cfg.master_seed, {3});
  TrainConfig tcfg = train_config(cfg, seed);
  tcfg.epochs = checkpoints.back();
  const TrainResult tr =
      train(SecondOrderRnn::random(cfg.hidden, cfg.train.weight_init_scale, seed), data.train,
            tcfg, checkpoints);

  struct Snap {
    double acc_test = 0.0, acc_long = 0.0;
    ActivationTraceSet traces;
  };
  std::vector<Snap> snaps(tr.snapshots.size());
  parallel_cells(snaps.size(), cfg.jobs, [&](std::size_t i) {
    const auto& m = tr.snapshots[i].model;
    snaps[i].acc_test = accuracy(m, data.test);
    snaps[i].acc_long = accuracy(m, long_test);
    snaps[i].traces = collect_activations(m, data.test);
  });
  std::vector<ExtractCell> cells(snaps.size() * ks.size());
  parallel_cells(cells.size(), cfg.jobs, [&](std::size_t c) {
    const std::size_t i = c / ks.size();
    const int k = ks[c % ks.size()];
    cells[c] = extract_cell(tr.snapshots[i].model, snaps[i].traces, data.test,
                            extraction_config(cfg, k, cell_seed(cfg.master_seed,
                                                                {5, std::uint64_t(tr.snapshots[i].epoch),
                                                                 std::uint64_t(k)})));
    if (cells[c].ok) cells[c].dfa_accuracy_long = dfa_accuracy(*cells[c].dfa, long_test);
  });

  ExperimentReport rep;
  rep.experiment = "training-time";
  rep.config = cfg;
  rep.axes = {{"epoch", checkpoints}, {"k", ks}};
  Table summary{"checkpoints",
                {"epoch", "rnn_accuracy_test", "rnn_accuracy_long", "best_k", "dfa_accuracy_test",
                 "dfa_accuracy_long", "extraction_success"},
                {}};
  Table detail{"extraction",
               {"epoch", "k", "k_used", "states", "unobserved_pairs", "silhouette",
                "dfa_accuracy_test", "dfa_accuracy_long", "extraction_success", "error"},
               {}};
  Table loss{"loss", {"epoch", "loss"}, {}};
  for (std::size_t e = 0; e < tr.loss_curve.size(); ++e)
    loss.rows.push_back({num(e + 1), num(tr.loss_curve[e])});
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const int epoch = tr.snapshots[i].epoch;
    int best = -1;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const auto& c = cells[i * ks.size() + j];
      if (c.ok) {
        detail.rows.push_back({num(epoch), num(ks[j]), num(c.k_used), num(c.states),
                               num(c.unobserved), opt_num(c.silhouette), num(c.dfa_accuracy),
                               num(c.dfa_accuracy_long), flag(c.success), ""});
        if (best < 0 || c.dfa_accuracy > cells[i * ks.size() + best].dfa_accuracy)
          best = static_cast<int>(j);
      } else {
        detail.rows.push_back(
            {num(epoch), num(ks[j]), "", "", "", "", "", "", "", c.error});
      }
    }
    if (best < 0) {
      summary.rows.push_back({num(epoch), num(snaps[i].acc_test), num(snaps[i].acc_long), "",
                              "", "", ""});
      continue;
    }
    const auto& b = cells[i * ks.size() + best];
    summary.rows.push_back({num(epoch), num(snaps[i].acc_test), num(snaps[i].acc_long),
                            num(ks[best]), num(b.dfa_accuracy), num(b.dfa_accuracy_long),
                            flag(b.success)});
    rep.dots[dot_name("epoch" + std::to_string(epoch), ks[best])] = b.dot;
  }
  rep.summary = {{"train_seed", seed}, {"epochs_run", tr.epochs_run}};
  rep.tables = {summary, detail, loss};
  return rep;
}

ExperimentReport random_init_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const DatasetSplit data = make_data(cfg);
  const auto ks = cfg.k_values();

  std::vector<std::pair<std::uint64_t, SecondOrderRnn>> inits;
  for (int i = 0; i < cfg.n_inits; ++i) {
    const std::uint64_t seed = cell_seed(cfg.master_seed, {6, std::uint64_t(i)});
    SecondOrderRnn rnn = SecondOrderRnn::random(cfg.hidden, cfg.train.weight_init_scale, seed);
    std::mt19937_64 rng(cell_seed(cfg.master_seed, {7, std::uint64_t(i)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> h(cfg.hidden);
    for (double& v : h) v = unit(rng);
    rnn.set_initial_state(std::move(h));
    inits.emplace_back(seed, std::move(rnn));
  }
  const Grid grid = run_grid(inits, data, cfg, [&](std::size_t i, int k) {
    return cell_seed(cfg.master_seed, {8, i, std::uint64_t(k)});
  });

  ExperimentReport rep;
  rep.experiment = "random-init";
  rep.config = cfg;
  rep.axes = {{"init", cfg.n_inits}, {"k", ks}};
  Table training{"training", kTrainingColumns, {}};
  Table loss{"loss", {"hidden", "replicate", "epoch", "loss"}, {}};
  Table extraction{"extraction", kExtractionColumns, {}};
  Table per_k{"per_k",
              {"k", "cells", "mean_dfa_accuracy", "variance_dfa_accuracy", "success_rate"},
              {}};
  std::vector<double> below, above;
  int successes = 0, unconverged = 0;
  for (std::size_t i = 0; i < grid.trains.size(); ++i) {
    training.rows.push_back(training_row(cfg.hidden, i, grid.trains[i]));
    append_loss_rows(loss, cfg.hidden, i, grid.trains[i]);
    if (!grid.trains[i].ok || !grid.trains[i].run.converged) ++unconverged;
  }
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::vector<double> accs;
    int ok = 0;
    for (std::size_t i = 0; i < grid.trains.size(); ++i) {
      const auto& c = grid.extracts[i * ks.size() + j];
      extraction.rows.push_back(extraction_row(cfg.hidden, i, ks[j], grid.trains[i], c));
      // Failed cells count as accuracy 0 so every cell enters the statistics.
      const double a = c.ok ? c.dfa_accuracy : 0.0;
      accs.push_back(a);
      (ks[j] >= 8 ? above : below).push_back(a);
      if (c.ok && c.success) {
        ++ok;
        rep.dots[dot_name("init" + std::to_string(i), ks[j])] = c.dot;
      }
    }
    successes += ok;
    per_k.rows.push_back({num(ks[j]), num(accs.size()), num(mean(accs)), num(variance(accs)),
                          num(double(ok) / accs.size())});
  }
  // Extraction rows above are K-major; present them init-major like the other sweeps.
  std::stable_sort(extraction.rows.begin(), extraction.rows.end(),
                   [](const auto& a, const auto& b) { return std::stoi(a[1]) < std::stoi(b[1]); });
  const double cells = static_cast<double>(grid.extracts.size());
  rep.summary = {{"cells", grid.extracts.size()},
                 {"success_rate", successes / cells},
                 {"unconverged_models", unconverged},
                 {"mean_accuracy_k_below_8", below.empty() ? json() : json(mean(below))},
                 {"mean_accuracy_k_8_up", above.empty() ? json() : json(mean(above))},
                 {"variance_k_below_8", below.empty() ? json() : json(variance(below))},
                 {"variance_k_8_up", above.empty() ? json() : json(variance(above))}};
  rep.tables = {training, loss, extraction, per_k};
  return rep;
}

ExperimentReport long_string_comparison(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.grammar != 3 && cfg.grammar != 4)
    throw UsageError("the long-string comparison is defined for grammars 3 and 4");
  const GrammarId g(cfg.grammar);
  const DatasetSplit data = make_data(cfg);
  const auto ks = cfg.k_values();

  ExperimentReport rep;
  rep.experiment = "long-strings";
  rep.config = cfg;
  const bool by_silhouette = cfg.long_k_selection == "silhouette";
  Table attempts{"attempts",
                 {"attempt", "seed", "converged", "epochs", "chosen_k", "silhouette",
                  "dfa_accuracy_test", "status"},
                 {}};

  std::optional<SecondOrderRnn> chosen_model;
  std::optional<Dfa> chosen_dfa;
  int chosen_attempt = -1, chosen_k = 0;
  bool chosen_correct = false;
  double chosen_acc = 0.0;
  for (int a = 0; a < cfg.max_attempts; ++a) {
    const std::uint64_t seed = cell_seed(cfg.master_seed, {9, std::uint64_t(a)});
    ConvergenceRun run = train_to_convergence(
        SecondOrderRnn::random(cfg.long_hidden, cfg.train.weight_init_scale, seed), data.train,
        data.test, train_config(cfg, seed), cfg.effective_epoch_cap());
    if (!run.converged) {
      attempts.rows.push_back(
          {num(a), num(seed), "0", num(run.epochs), "", "", "", "unconverged"});
      continue;
    }
    const SecondOrderRnn& model = run.result.model;
    const ActivationTraceSet traces = collect_activations(model, data.test);
    std::vector<ExtractCell> cells(ks.size());
    parallel_cells(ks.size(), cfg.jobs, [&](std::size_t j) {
      ExtractionConfig e = extraction_config(
          cfg, ks[j], cell_seed(cfg.master_seed, {10, std::uint64_t(a), std::uint64_t(ks[j])}));
      e.compute_silhouette = e.compute_silhouette || by_silhouette;
      cells[j] = extract_cell(model, traces, data.test, e);
    });
    // The kept K: highest silhouette (labels unseen), or highest test accuracy.
    auto score = [&](const ExtractCell& c) {
      return by_silhouette ? c.silhouette.value_or(-2.0) : c.dfa_accuracy;
    };
    int best = -1;
    for (std::size_t j = 0; j < ks.size(); ++j)
      if (cells[j].ok && (best < 0 || score(cells[j]) > score(cells[best])))
        best = static_cast<int>(j);
    if (best < 0) {
      attempts.rows.push_back({num(a), num(seed), "1", num(run.epochs), "", "", "", "no-dfa"});
      continue;
    }
    const bool correct = cells[best].success;
    attempts.rows.push_back({num(a), num(seed), "1", num(run.epochs), num(ks[best]),
                             opt_num(cells[best].silhouette), num(cells[best].dfa_accuracy),
                             correct ? "correct-dfa-flagged" : "incorrect-dfa-used"});
    chosen_model = model;
    chosen_dfa = cells[best].dfa;
    chosen_attempt = a;
    chosen_k = ks[best];
    chosen_correct = correct;
    chosen_acc = cells[best].dfa_accuracy;
    if (!correct) break;
  }

  Table curves{"long",
               {"length", "n", "negative_ratio", "negative_ratio_exact", "rnn_error", "dfa_error"},
               {}};
  std::vector<int> lengths;
  for (int len = cfg.long_min; len <= cfg.long_max; len += cfg.long_step) lengths.push_back(len);
  rep.axes = {{"attempt", cfg.max_attempts}, {"length", lengths}, {"k", ks}};
  std::vector<double> xs, rnn_err, dfa_err;
  if (chosen_model) {
    struct Row {
      double rnn = 0.0, dfa = 0.0;
      std::size_t n = 0;
    };
    std::vector<Row> rows(lengths.size());
    parallel_cells(lengths.size(), cfg.jobs, [&](std::size_t i) {
      const LabeledDataset set = generate_long_testset(
          g, lengths[i], cfg.n_per_length, cell_seed(cfg.master_seed, {11, std::uint64_t(lengths[i])}));
      rows[i] = {1.0 - accuracy(*chosen_model, set), 1.0 - dfa_accuracy(*chosen_dfa, set),
                 set.size()};
    });
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const Rational ratio = negative_ratio(g, lengths[i]);
      curves.rows.push_back({num(lengths[i]), num(rows[i].n),
                             num(static_cast<double>(ratio)), ratio.str(), num(rows[i].rnn),
                             num(rows[i].dfa)});
      xs.push_back(lengths[i]);
      rnn_err.push_back(rows[i].rnn);
      dfa_err.push_back(rows[i].dfa);
    }
    rep.dots["chosen_attempt" + std::to_string(chosen_attempt) + "_k" +
             std::to_string(chosen_k) + ".dot"] = to_dot(*chosen_dfa);
  }
  json slopes;
  if (xs.size() >= 2) {
    slopes = {{"dfa_error_slope", ls_slope(xs, dfa_err)},
              {"rnn_error_slope", ls_slope(xs, rnn_err)}};
  }
  rep.summary = {{"chosen_attempt", chosen_attempt >= 0 ? json(chosen_attempt) : json()},
                 {"chosen_k", chosen_attempt >= 0 ? json(chosen_k) : json()},
                 {"dfa_accuracy_test", chosen_attempt >= 0 ? json(chosen_acc) : json()},
                 {"incorrect_dfa_found", chosen_attempt >= 0 && !chosen_correct},
                 {"slopes", slopes}};
  rep.tables = {attempts, curves};
  return rep;
}

ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "capacity") return capacity_sweep(cfg);
  if (name == "training-time") return training_time_sweep(cfg);
  if (name == "random-init") return random_init_sweep(cfg);
  if (name == "long-strings") return long_string_comparison(cfg);
  std::string list;
  for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
  throw UsageError("unknown experiment '" + name + "' (valid: " + list + ")");
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  os << text;
  if (!os) throw IoError(path.string(), "write failed");
}

}  // namespace

std::string write_report(const ExperimentReport& report, const std::string& root) {
  const fs::path dir = fs::path(root) / (report.experiment + "-g" +
                                         std::to_string(report.config.grammar) + "-" +
                                         report.config_hash());
  std::error_code ec;
  fs::create_directories(dir / "dot", ec);
  if (ec) throw IoError(dir.string(), ec.message());
  for (const auto& t : report.tables) {
    std::string text;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      text += (c ? "," : "") + csv_field(t.columns[c]);
    text += '\n';
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) text += (c ? "," : "") + csv_field(row[c]);
      text += '\n';
    }
    write_file(dir / (t.name + ".csv"), text);
  }
  for (const auto& [name, text] : report.dots) write_file(dir / "dot" / name, text);
  write_file(dir / "manifest.json", report.manifest().dump(2) + "\n");
  return dir.string();
}

}  // namespace dfaforge
