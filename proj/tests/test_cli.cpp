#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string(DFAFORGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream os;
  os << in.rdbuf();
  r.out = os.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int count_prefix(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) n += line.rfind(prefix, 0) == 0;
  return n;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfaforge-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("generate writes the enumerated grammar-1 corpus deterministically") {
  const fs::path a = scratch("gen-a"), b = scratch("gen-b");
  REQUIRE(cli("generate -g 1 --seed 7 -o " + (a / "d").string(), a).code == 0);
  REQUIRE(cli("generate -g 1 --seed 7 -o " + (b / "d").string(), b).code == 0);
  const std::string all = slurp(a / "d" / "g1_all.tsv");
  CHECK(count_prefix(all, "1\t") == 13);
  for (const char* f : {"g1_all.tsv", "g1_train.tsv", "g1_test.tsv"})
    CHECK(slurp(a / "d" / f) == slurp(b / "d" / f));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("generate samples balanced long sets") {
  const fs::path d = scratch("long");
  REQUIRE(cli("generate -g 5 --long-length 40 --long-count 10000 -o " + d.string(), d).code == 0);
  const std::string text = slurp(d / "g5_long40.tsv");
  CHECK(count_prefix(text, "1\t") == 5000);
  CHECK(count_prefix(text, "0\t") == 5000);
  fs::remove_all(d);
}

TEST_CASE("train, extract, evaluate and dot chain together") {
  const fs::path d = scratch("chain");
  const std::string common = " -g 1 --max-len 8 --seed 2";
  REQUIRE(cli("train" + common + " --hidden 6 --epochs 5 -o " + (d / "m").string(), d).code == 0);
  const std::string loss = slurp(d / "m" / "loss.csv");
  CHECK(loss.rfind("epoch,loss,test_accuracy\n", 0) == 0);
  CHECK(count_prefix(loss, "") == 6);

  const std::string model = (d / "m" / "model.txt").string();
  CHECK(cli("extract" + common + " --k 1 --model " + model + " -o " + (d / "x").string(), d).code == 2);
  REQUIRE(cli("extract" + common + " --k 4 --dump-clusters --model " + model + " -o " +
                  (d / "x").string(),
              d)
              .code == 0);
  CHECK(fs::exists(d / "x" / "dfa.txt"));
  CHECK(fs::exists(d / "x" / "dfa.dot"));
  CHECK(fs::exists(d / "x" / "report.json"));
  CHECK(fs::exists(d / "x" / "clusters.csv"));

  const Result ev = cli("evaluate" + common + " --dfa " + (d / "x" / "dfa.txt").string(), d);
  CHECK(ev.code == 0);
  CHECK(ev.out.find("accuracy") != std::string::npos);

  const Result dot = cli("dot -g 2", d);
  CHECK(dot.code == 0);
  CHECK(dot.out.find("digraph") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("usage errors exit with status 2") {
  const fs::path d = scratch("usage");
  const Result r = cli("sweep bogus -g 1 -o " + d.string(), d);
  CHECK(r.code == 2);
  for (const char* n : {"capacity", "training-time", "random-init", "long-strings"})
    CHECK(r.out.find(n) != std::string::npos);
  CHECK(cli("generate -g 9", d).code == 2);
  CHECK(cli("no-such-command", d).code == 2);
  CHECK(cli("evaluate -g 1 --dfa " + (d / "missing.txt").string(), d).code == 3);
  fs::remove_all(d);
}
