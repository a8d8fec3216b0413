// dfaforge: generate datasets, train second-order RNNs, extract automata and
// run the experiment sweeps.
//
// Exit codes: 0 success, 2 usage or bad input, 3 file I/O, 1 any other failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dfaforge/dfa.hpp"
#include "dfaforge/errors.hpp"
#include "dfaforge/experiments.hpp"
#include "dfaforge/extraction.hpp"
#include "dfaforge/rnn.hpp"
#include "dfaforge/run_config.hpp"
#include "dfaforge/tomita.hpp"

namespace fs = std::filesystem;
using namespace dfaforge;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Flag values; unset ones leave the config file (or the default) alone.
struct Flags {
  std::string config;
  std::optional<int> grammar, min_len, max_len, hidden, epochs, k, jobs, long_length,
      long_count;
  std::optional<double> split, lr;
  std::optional<std::string> k_range, method, out;
  std::optional<std::uint64_t> seed;
};

void add_data_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file; flags override its values");
  app->add_option("--grammar,-g", f.grammar, "Tomita grammar 1..7");
  app->add_option("--min-len", f.min_len, "shortest string length");
  app->add_option("--max-len", f.max_len, "longest string length");
  app->add_option("--split", f.split, "test fraction of the enumerated strings");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out,-o", f.out, "output directory (default $DFAFORGE_OUT or ./runs)");
}

void add_model_flags(CLI::App* app, Flags& f) {
  app->add_option("--hidden", f.hidden, "hidden units N");
  app->add_option("--epochs", f.epochs, "epoch count (train: 0 = until 100% test accuracy)");
  app->add_option("--lr", f.lr, "RMSprop learning rate");
}

void add_extract_flags(CLI::App* app, Flags& f) {
  app->add_option("--k", f.k, "cluster count K");
  app->add_option("--k-range", f.k_range, "K sweep range, e.g. 3..15");
  app->add_option("--method", f.method, "kmeans or quantize");
}

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  rc.command = command;
  auto& e = rc.exp;
  if (f.grammar) e.grammar = *f.grammar;
  if (f.min_len) e.min_len = *f.min_len;
  if (f.max_len) e.max_len = *f.max_len;
  if (f.split) e.test_fraction = *f.split;
  if (f.hidden) e.hidden = *f.hidden;
  if (f.epochs) rc.epochs = *f.epochs;
  if (f.lr) e.train.learning_rate = *f.lr;
  if (f.k) rc.k = *f.k;
  if (f.k_range) std::tie(e.k_min, e.k_max) = parse_k_range(*f.k_range);
  if (f.method) e.method = parse_clustering_method(*f.method);
  if (f.seed) e.master_seed = *f.seed;
  if (f.jobs) e.jobs = *f.jobs;
  if (f.long_length) rc.long_length = *f.long_length;
  if (f.long_count) rc.long_count = *f.long_count;
  if (f.out) rc.out = *f.out;
  if (rc.out.empty()) rc.out = default_output_root();
  if (rc.epochs < 0) throw UsageError("epochs must be non-negative");
  GrammarId{e.grammar};
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  os << text;
  if (!os) throw IoError(path.string(), "write failed");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, ec.message());
  return dir;
}

// Same derivation the sweeps use, so one --seed names one split everywhere.
DatasetSplit dataset_for(const RunConfig& rc) {
  const auto& e = rc.exp;
  e.validate();
  return generate_dataset(GrammarId(e.grammar), e.min_len, e.max_len, e.test_fraction,
                          cell_seed(e.master_seed, {0}));
}

int cmd_generate(const RunConfig& rc) {
  const DatasetSplit split = dataset_for(rc);
  const fs::path dir = ensure_dir(rc.out);
  const std::string g = "g" + std::to_string(rc.exp.grammar);

  LabeledDataset all = split.train;
  all.role = DatasetRole::all;
  all.items.insert(all.items.end(), split.test.items.begin(), split.test.items.end());
  std::sort(all.items.begin(), all.items.end(), [](const auto& a, const auto& b) {
    return std::pair(a.text.size(), a.text) < std::pair(b.text.size(), b.text);
  });
  write_text(dir / (g + "_all.tsv"), serialize(all));
  write_text(dir / (g + "_train.tsv"), serialize(split.train));
  write_text(dir / (g + "_test.tsv"), serialize(split.test));
  std::cout << "wrote " << all.size() << " strings (" << all.positives() << " positive), "
            << split.train.size() << " train / " << split.test.size() << " test to "
            << dir.string() << "\n";
  if (rc.long_length > 0) {
    const LabeledDataset lt =
        generate_long_testset(GrammarId(rc.exp.grammar), rc.long_length, rc.long_count,
                              cell_seed(rc.exp.master_seed, {11, std::uint64_t(rc.long_length)}));
    const auto name = g + "_long" + std::to_string(rc.long_length) + ".tsv";
    write_text(dir / name, serialize(lt));
    std::cout << "wrote " << lt.size() << " strings of length " << rc.long_length << " ("
              << lt.positives() << " positive) to " << (dir / name).string() << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& rc, const std::string& train_path, const std::string& test_path) {
  const auto& e = rc.exp;
  DatasetSplit data;
  if (!train_path.empty() || !test_path.empty()) {
    if (train_path.empty() || test_path.empty())
      throw UsageError("--train and --test must be given together");
    data.train = load_dataset(train_path);
    data.test = load_dataset(test_path);
  } else {
    data = dataset_for(rc);
  }
  const std::uint64_t seed = cell_seed(e.master_seed, {1, std::uint64_t(e.hidden), 0});
  SecondOrderRnn init = SecondOrderRnn::random(e.hidden, e.train.weight_init_scale, seed);
  TrainConfig tcfg = e.train;
  tcfg.seed = seed;

  std::vector<double> test_acc;
  bool converged = false;
  EpochHook hook = [&](int, const SecondOrderRnn& m, double) {
    test_acc.push_back(accuracy(m, data.test));
    converged = test_acc.back() == 1.0;
    return rc.epochs == 0 && converged;
  };
  tcfg.epochs = rc.epochs > 0 ? rc.epochs : e.effective_epoch_cap();
  const TrainResult tr = train(std::move(init), data.train, tcfg, {}, hook);

  const fs::path dir = ensure_dir(rc.out);
  save_model(tr.model, (dir / "model.txt").string());
  std::string csv = "epoch,loss,test_accuracy\n";
  for (std::size_t i = 0; i < tr.loss_curve.size(); ++i) {
    std::ostringstream row;
    row.precision(17);
    row << i + 1 << ',' << tr.loss_curve[i] << ',' << test_acc[i] << '\n';
    csv += row.str();
  }
  write_text(dir / "loss.csv", csv);
  json summary{{"config", rc.to_json()},
               {"train_seed", seed},
               {"epochs_run", tr.epochs_run},
               {"converged", converged},
               {"test_accuracy", test_acc.empty() ? 0.0 : test_acc.back()}};
  write_text(dir / "train.json", summary.dump(2) + "\n");
  std::cout << "epochs " << tr.epochs_run << ", test accuracy "
            << (test_acc.empty() ? 0.0 : test_acc.back()) << (converged ? "" : " (not converged)")
            << ", model " << (dir / "model.txt").string() << "\n";
  return 0;
}

int cmd_extract(const RunConfig& rc, const std::string& model_path, const std::string& data_path,
                bool dump_clusters) {
  ExtractionConfig ecfg;
  ecfg.k = rc.k;
  ecfg.method = rc.exp.method;
  ecfg.seed = rc.exp.master_seed;
  ecfg.include_post_stop_states = rc.exp.include_post_stop_states;
  ecfg.fit_sample_cap = rc.exp.fit_sample_cap;
  ecfg.validate();
  const SecondOrderRnn model = load_model(model_path);
  const LabeledDataset data = data_path.empty() ? dataset_for(rc).test : load_dataset(data_path);
  const ExtractionResult r = extract_dfa(model, data, ecfg);

  const fs::path dir = ensure_dir(rc.out);
  json report = extraction_report(ecfg, r);
  report["dfa_accuracy"] = dfa_accuracy(r.dfa, data);
  report["correct"] = is_correct(r.dfa, data);
  write_text(dir / "dfa.txt", serialize(r.dfa));
  write_text(dir / "dfa.dot", to_dot(r.dfa));
  write_text(dir / "report.json", report.dump(2) + "\n");
  if (dump_clusters) write_text(dir / "clusters.csv", clustering_csv(r.input, r.clustering));
  std::cout << r.dfa.num_states() << " states, accuracy " << report["dfa_accuracy"].get<double>()
            << " on " << data.size() << " strings, report " << (dir / "report.json").string()
            << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& rc, const std::string& dfa_path, const std::string& model_path,
                 const std::string& data_path, bool grammar_given) {
  if (dfa_path.empty() == model_path.empty())
    throw UsageError("give exactly one of --dfa and --model");
  const LabeledDataset data = data_path.empty() ? dataset_for(rc).test : load_dataset(data_path);
  json out{{"strings", data.size()}};
  if (!dfa_path.empty()) {
    const Dfa dfa = parse_dfa(read_text(dfa_path));
    out["accuracy"] = dfa_accuracy(dfa, data);
    out["correct"] = is_correct(dfa, data);
    if (grammar_given) {
      const Equivalence eq = equivalent(dfa, ground_truth(GrammarId(rc.exp.grammar)));
      out["equivalent_to_ground_truth"] = eq.equal;
      if (eq.counterexample) out["counterexample"] = *eq.counterexample;
    }
  } else {
    out["accuracy"] = accuracy(load_model(model_path), data);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& rc, const std::string& name) {
  const std::string experiment = name.empty() ? rc.experiment : name;
  if (experiment.empty()) throw UsageError("sweep needs an experiment name");
  const ExperimentReport rep = run_experiment(experiment, rc.exp);
  const std::string dir = write_report(rep, rc.out);
  std::cout << dir << "\n";
  return 0;
}

int cmd_dot(const RunConfig& rc, const std::string& dfa_path, bool grammar_given) {
  if (dfa_path.empty() && !grammar_given) throw UsageError("give --dfa or --grammar");
  const Dfa dfa = dfa_path.empty() ? minimize(ground_truth(GrammarId(rc.exp.grammar)))
                                   : parse_dfa(read_text(dfa_path));
  std::cout << to_dot(dfa);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tomita grammars, second-order RNNs and automaton extraction"};
  app.require_subcommand(1);

  Flags gen_f, train_f, extract_f, eval_f, sweep_f, dot_f;
  std::string train_path, test_path, model_path, data_path, dfa_path, experiment;
  bool dump_clusters = false;

  auto* gen = app.add_subcommand("generate", "enumerate, label and split a grammar's strings");
  add_data_flags(gen, gen_f);
  gen->add_option("--long-length", gen_f.long_length, "also sample a long test set of this length");
  gen->add_option("--long-count", gen_f.long_count, "strings in the long test set");

  auto* tr = app.add_subcommand("train", "train a second-order RNN");
  add_data_flags(tr, train_f);
  add_model_flags(tr, train_f);
  tr->add_option("--train", train_path, "training set TSV (default: regenerate from --seed)");
  tr->add_option("--test", test_path, "test set TSV");

  auto* ex = app.add_subcommand("extract", "extract a DFA from a trained model");
  add_data_flags(ex, extract_f);
  add_extract_flags(ex, extract_f);
  ex->add_option("--model", model_path, "model file")->required();
  ex->add_option("--data", data_path, "dataset TSV (default: regenerated test split)");
  ex->add_flag("--dump-clusters", dump_clusters, "also write clusters.csv");

  auto* ev = app.add_subcommand("evaluate", "score a DFA or a model on a dataset");
  add_data_flags(ev, eval_f);
  ev->add_option("--dfa", dfa_path, "DFA file");
  ev->add_option("--model", model_path, "model file");
  ev->add_option("--data", data_path, "dataset TSV (default: regenerated test split)");

  auto* sw = app.add_subcommand("sweep", "run an experiment grid and write its report");
  std::string names;
  for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
  sw->add_option("experiment", experiment, "one of: " + names);
  add_data_flags(sw, sweep_f);
  add_model_flags(sw, sweep_f);
  add_extract_flags(sw, sweep_f);
  sw->add_option("--jobs,-j", sweep_f.jobs, "concurrent grid cells");

  auto* dt = app.add_subcommand("dot", "print a DFA (or a grammar's minimal DFA) as DOT");
  dt->add_option("--dfa", dfa_path, "DFA file");
  dt->add_option("--grammar,-g", dot_f.grammar, "Tomita grammar 1..7");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(resolve("generate", gen_f));
    if (tr->parsed()) return cmd_train(resolve("train", train_f), train_path, test_path);
    if (ex->parsed())
      return cmd_extract(resolve("extract", extract_f), model_path, data_path, dump_clusters);
    if (ev->parsed())
      return cmd_evaluate(resolve("evaluate", eval_f), dfa_path, model_path, data_path,
                          eval_f.grammar.has_value());
    if (sw->parsed()) return cmd_sweep(resolve("sweep", sweep_f), experiment);
    if (dt->parsed()) return cmd_dot(resolve("dot", dot_f), dfa_path, dot_f.grammar.has_value());
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NeedTwoClusters& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const KTooLarge& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSymbol& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
