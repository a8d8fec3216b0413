#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "dfaforge/errors.hpp"
#include "dfaforge/experiments.hpp"
#include "dfaforge/run_config.hpp"

using namespace dfaforge;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(int grammar) {
  ExperimentConfig c;
  c.grammar = grammar;
  c.max_len = 8;
  c.hidden = 6;
  c.epoch_cap = 40;
  c.k_min = 3;
  c.k_max = 6;
  c.hidden_values = {4, 8};
  c.seeds = 2;
  c.n_inits = 3;
  c.checkpoints = {5, 10};
  c.long_eval_length = 30;
  c.n_per_length = 200;
  c.long_hidden = 6;
  c.long_min = 20;
  c.long_max = 60;
  c.max_attempts = 2;
  c.fit_sample_cap = 0;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return i;
  FAIL("no column " << name);
  return 0;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfaforge-test-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("cell seeds depend on every coordinate") {
  CHECK(cell_seed(1, {2, 3}) == cell_seed(1, {2, 3}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 4; ++m)
    for (std::uint64_t a = 0; a < 8; ++a)
      for (std::uint64_t b = 0; b < 8; ++b) seen.insert(cell_seed(m, {a, b}));
  CHECK(seen.size() == 4 * 8 * 8);
  CHECK(cell_seed(1, {2, 3}) != cell_seed(1, {3, 2}));
  CHECK(cell_seed(1, {0}) != cell_seed(1, {0, 0}));
}

TEST_CASE("least-squares slope") {
  CHECK(ls_slope({1, 2, 3, 4}, {3, 5, 7, 9}) == doctest::Approx(2.0));
  CHECK(ls_slope({0, 1, 2}, {1, 0, 2}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(ls_slope({1}, {1}), UsageError);
  CHECK_THROWS_AS(ls_slope({2, 2}, {1, 3}), UsageError);
}

TEST_CASE("config JSON round-trip and validation") {
  ExperimentConfig c = tiny(4);
  c.method = ClusteringMethod::binary_quantization;
  c.train.learning_rate = 0.02;
  c.long_k_selection = "best_accuracy";
  const auto j = to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);
  auto bad = j;
  bad["no_such_key"] = 1;
  CHECK_THROWS_AS(experiment_config_from_json(bad), ParseError);
  CHECK(experiment_config_from_json(nlohmann::json::object()).hidden == 15);

  ExperimentConfig v;
  v.k_min = 1;
  CHECK_THROWS_AS(v.validate(), Error);
  v = {};
  v.grammar = 9;
  CHECK_THROWS_AS(v.validate(), UsageError);
  v = {};
  v.long_k_selection = "median";
  CHECK_THROWS_AS(v.validate(), UsageError);
  v = {};
  CHECK(v.k_values().front() == 3);
  CHECK(v.k_values().back() == 15);
  CHECK(v.effective_epoch_cap() == default_epoch_cap(GrammarId(1)));
}

TEST_CASE("reference epoch axes") {
  for (int g = 1; g <= 7; ++g) {
    ExperimentConfig c;
    c.grammar = g;
    const auto cps = c.effective_checkpoints();
    CHECK(cps.size() == 7);
    CHECK(std::is_sorted(cps.begin(), cps.end()));
    CHECK(default_epoch_cap(GrammarId(g)) == 2 * cps.back());
  }
}

TEST_CASE("unknown experiment names are rejected with the list") {
  try {
    run_experiment("bogus", tiny(1));
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string what = e.what();
    for (const auto& n : experiment_names()) CHECK(what.find(n) != std::string::npos);
  }
}

TEST_CASE("capacity sweep grid") {
  const ExperimentConfig c = tiny(1);
  const ExperimentReport r = capacity_sweep(c);
  const std::size_t ks = c.k_values().size();
  CHECK(r.table("training").rows.size() == 4);
  CHECK(r.table("extraction").rows.size() == 4 * ks);
  CHECK(r.table("per_hidden").rows.size() == 2);
  const Table& ex = r.table("extraction");
  const auto acc = column(ex, "dfa_accuracy"), ok = column(ex, "extraction_success");
  std::size_t successes = 0;
  for (const auto& row : ex.rows) {
    if (row[ok].empty()) continue;
    REQUIRE((row[ok] == "1") == (std::stod(row[acc]) == 1.0));
    successes += row[ok] == "1";
  }
  CHECK(r.dots.size() == successes);
  CHECK(r.summary.contains("successful_k_by_hidden"));
}

TEST_CASE("random-init sweep grid and summary") {
  const ExperimentConfig c = tiny(4);
  const ExperimentReport r = random_init_sweep(c);
  const std::size_t ks = c.k_values().size();
  CHECK(r.table("extraction").rows.size() == 3 * ks);
  CHECK(r.table("per_k").rows.size() == ks);
  CHECK(r.summary["cells"] == 3 * ks);
  const double rate = r.summary["success_rate"];
  CHECK(rate >= 0.0);
  CHECK(rate <= 1.0);
}

TEST_CASE("training-time sweep grid") {
  const ExperimentConfig c = tiny(4);
  const ExperimentReport r = training_time_sweep(c);
  CHECK(r.table("checkpoints").rows.size() == 2);
  CHECK(r.table("extraction").rows.size() == 2 * c.k_values().size());
  CHECK(r.table("loss").rows.size() == 10);
}

TEST_CASE("long-string comparison") {
  CHECK_THROWS_AS(long_string_comparison(tiny(5)), UsageError);
  const ExperimentConfig c = tiny(4);
  const ExperimentReport r = long_string_comparison(c);
  CHECK(r.table("attempts").rows.size() >= 1);
  const Table& l = r.table("long");
  if (!r.summary["chosen_attempt"].is_null()) {
    REQUIRE(l.rows.size() == 3);
    CHECK(l.rows[0][column(l, "n")] == "200");
    CHECK(r.summary["slopes"].contains("dfa_error_slope"));
  }
}

TEST_CASE("reports are reproducible on disk and across job counts") {
  ExperimentConfig c = tiny(1);
  const fs::path a = scratch("a"), b = scratch("b");
  const std::string dir_a = write_report(capacity_sweep(c), a.string());
  c.jobs = 2;
  const std::string dir_b = write_report(capacity_sweep(c), b.string());
  CHECK(fs::path(dir_a).filename() == fs::path(dir_b).filename());
  for (const auto& e : fs::recursive_directory_iterator(dir_a)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    const fs::path rel = fs::relative(e.path(), dir_a);
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(fs::path(dir_b) / rel));
  }

  // Rerunning from the manifest reproduces every CSV byte for byte.
  const RunConfig rc = load_run_config((fs::path(dir_a) / "manifest.json").string());
  CHECK(rc.experiment == "capacity");
  const fs::path again = scratch("again");
  const std::string dir_c = write_report(run_experiment(rc.experiment, rc.exp), again.string());
  CHECK(fs::path(dir_c).filename() == fs::path(dir_a).filename());
  for (const auto& e : fs::directory_iterator(dir_a))
    if (e.path().extension() == ".csv")
      CHECK(slurp(e.path()) == slurp(fs::path(dir_c) / e.path().filename()));
  const auto manifest = nlohmann::json::parse(slurp(fs::path(dir_a) / "manifest.json"));
  CHECK(manifest["tables"].size() == 4);
  for (const auto& f : manifest["dot_files"])
    CHECK(fs::exists(fs::path(dir_a) / f.get<std::string>()));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(again);
}

TEST_CASE("k ranges") {
  CHECK(parse_k_range("3..15") == std::pair{3, 15});
  CHECK(parse_k_range("4-9") == std::pair{4, 9});
  CHECK(parse_k_range("7") == std::pair{7, 7});
  CHECK_THROWS_AS(parse_k_range("9..3"), UsageError);
  CHECK_THROWS_AS(parse_k_range("x"), UsageError);
}
