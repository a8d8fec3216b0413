#include "dfaforge/tomita.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <tuple>

#include "dfaforge/errors.hpp"

namespace dfaforge {

GrammarId::GrammarId(int value) : value_(value) {
  if (value < 1 || value > 7)
    throw UsageError("grammar id must be in 1..7, got " + std::to_string(value));
}

std::vector<GrammarId> GrammarId::all() {
  std::vector<GrammarId> out;
  for (int g = 1; g <= 7; ++g) out.emplace_back(g);
  return out;
}

namespace {

Dfa make(StateId initial, std::vector<bool> acc, std::vector<Dfa::Row> delta) {
  int n = static_cast<int>(delta.size());
  return Dfa(n, initial, std::move(acc), std::move(delta));
}

}  // namespace

Dfa ground_truth(GrammarId g) {
  // Rows are {on 0, on 1}. The last state is the garbage state where one exists.
  switch (g.value()) {
    case 1:  // 1*
      return make(0, {true, false}, {{1, 0}, {1, 1}});
    case 2:  // (10)*
      return make(0, {true, false, false}, {{2, 1}, {0, 2}, {2, 2}});
    case 3:
      // 0: neutral   1: odd run of 1s   2: odd 0s after odd 1s
      // 3: even 0s after odd 1s   4: garbage
      return make(0, {true, true, false, true, false},
                  {{0, 1}, {2, 0}, {3, 4}, {2, 1}, {4, 4}});
    case 4:  // no "000"; state = trailing zeros
      return make(0, {true, true, true, false}, {{1, 0}, {2, 0}, {3, 0}, {3, 3}});
    case 5:  // state = 2 * (#0 mod 2) + (#1 mod 2)
      return make(0, {true, false, false, false}, {{2, 1}, {3, 0}, {0, 3}, {1, 2}});
    case 6:  // state = (#0 - #1) mod 3
      return make(0, {true, false, false}, {{1, 2}, {2, 0}, {0, 1}});
    case 7:  // 0*1*0*1*
      return make(0, {true, true, true, true, false},
                  {{0, 1}, {2, 1}, {2, 3}, {4, 3}, {4, 4}});
  }
  throw UsageError("unknown grammar");
}

namespace {

bool tomita3(std::string_view s) {
  // Run-length scan: an odd block of 1s directly followed by an odd block of 0s
  // is forbidden.
  std::vector<std::pair<char, int>> runs;
  for (char c : s) {
    if (!runs.empty() && runs.back().first == c)
      ++runs.back().second;
    else
      runs.emplace_back(c, 1);
  }
  for (std::size_t i = 0; i + 1 < runs.size(); ++i)
    if (runs[i].first == '1' && runs[i].second % 2 == 1 && runs[i + 1].second % 2 == 1)
      return false;
  return true;
}

}  // namespace

bool membership(GrammarId g, std::string_view s) {
  check_binary(s);
  const auto zeros = std::count(s.begin(), s.end(), '0');
  const auto ones = static_cast<long>(s.size()) - zeros;
  switch (g.value()) {
    case 1:
      return zeros == 0;
    case 2:
      if (s.size() % 2 != 0) return false;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != (i % 2 == 0 ? '1' : '0')) return false;
      return true;
    case 3:
      return tomita3(s);
    case 4:
      return s.find("000") == std::string_view::npos;
    case 5:
      return zeros % 2 == 0 && ones % 2 == 0;
    case 6:
      return (zeros - ones) % 3 == 0;
    case 7: {
      static const std::regex pattern("^0*1*0*1*$");
      return std::regex_match(s.begin(), s.end(), pattern);
    }
  }
  throw UsageError("unknown grammar");
}

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::train: return "train";
    case DatasetRole::test: return "test";
    case DatasetRole::long_test: return "long_test";
    case DatasetRole::all: return "all";
  }
  return "?";
}

DatasetRole parse_role(std::string_view text) {
  if (text == "train") return DatasetRole::train;
  if (text == "test") return DatasetRole::test;
  if (text == "long_test") return DatasetRole::long_test;
  if (text == "all") return DatasetRole::all;
  throw ParseError("unknown dataset role '" + std::string(text) + "'");
}

std::size_t LabeledDataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const LabeledString& x) { return x.label; }));
}

DatasetSplit generate_dataset(GrammarId g, int min_len, int max_len, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must lie strictly between 0 and 1");
  if (min_len < 0 || min_len > max_len || max_len > 30)
    throw UsageError("length bounds must satisfy 0 <= min_len <= max_len <= 30");

  const Dfa dfa = ground_truth(g);
  const int lengths = max_len - min_len + 1;

  // strata[label][length - min_len] = all strings in enumeration order
  std::vector<std::vector<std::string>> strata[2];
  strata[0].resize(lengths);
  strata[1].resize(lengths);
  for (int len = min_len; len <= max_len; ++len) {
    const std::uint64_t total = 1ULL << len;
    for (std::uint64_t code = 0; code < total; ++code) {
      std::string s(len, '0');
      for (int i = 0; i < len; ++i)
        if (code >> (len - 1 - i) & 1ULL) s[i] = '1';
      bool label = accepts(dfa, s);
      strata[label][len - min_len].push_back(std::move(s));
    }
  }

  std::mt19937_64 rng(seed);
  DatasetSplit split;
  for (auto* part : {&split.train, &split.test}) {
    part->min_len = min_len;
    part->max_len = max_len;
    part->grammar = g.value();
    part->seed = seed;
  }
  split.train.role = DatasetRole::train;
  split.test.role = DatasetRole::test;

  std::vector<std::vector<char>> to_test[2];
  for (int label = 0; label < 2; ++label) {
    auto& groups = strata[label];
    std::size_t total = 0;
    for (const auto& s : groups) total += s.size();
    const auto target = static_cast<std::size_t>(std::llround(test_fraction * total));

    std::vector<std::size_t> quota(lengths);
    std::vector<double> remainder(lengths);
    std::size_t assigned = 0;
    for (int l = 0; l < lengths; ++l) {
      double exact = test_fraction * groups[l].size();
      quota[l] = static_cast<std::size_t>(std::floor(exact));
      remainder[l] = exact - quota[l];
      assigned += quota[l];
    }
    // Largest remainder gets the leftover slots; ties go to a seeded shuffle order.
    std::vector<int> order(lengths);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int i = 0; assigned < target && i < lengths; ++i) {
      int l = order[i];
      if (remainder[l] > 0.0) {
        ++quota[l];
        ++assigned;
      }
    }

    to_test[label].resize(lengths);
    for (int l = 0; l < lengths; ++l) {
      std::vector<std::size_t> idx(groups[l].size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      to_test[label][l].assign(groups[l].size(), 0);
      for (std::size_t k = 0; k < quota[l]; ++k) to_test[label][l][idx[k]] = 1;
    }
  }

  // Emit both splits in enumeration order (length, then lexicographic).
  for (int l = 0; l < lengths; ++l) {
    // (string, label, goes_to_test), sorted back into lexicographic order.
    std::vector<std::tuple<std::string, bool, bool>> all;
    for (int label = 0; label < 2; ++label)
      for (std::size_t k = 0; k < strata[label][l].size(); ++k)
        all.emplace_back(strata[label][l][k], label == 1, to_test[label][l][k] != 0);
    std::sort(all.begin(), all.end());
    for (auto& [s, label, test] : all)
      (test ? split.test : split.train).items.push_back({std::move(s), label});
  }
  return split;
}

LabeledDataset generate_long_testset(GrammarId g, int length, int n, std::uint64_t seed) {
  if (length < 0 || n < 0) throw UsageError("length and sample count must be non-negative");
  const Dfa dfa = ground_truth(g);
  const BigCount accepted = count_accepted(dfa, length);
  const BigCount all = BigCount(1) << length;

  // n_pos = round(n * accepted / all), halves rounded up.
  const BigCount n_pos_big = (2 * accepted * n + all) / (2 * all);
  const int n_pos = static_cast<int>(n_pos_big);
  const int n_neg = n - n_pos;

  std::mt19937_64 rng(seed);
  const std::uint64_t pos_seed = rng(), neg_seed = rng(), mix_seed = rng();

  LabeledDataset data;
  data.min_len = data.max_len = length;
  data.grammar = g.value();
  data.role = DatasetRole::long_test;
  data.seed = seed;
  data.items.reserve(n);
  if (n_pos > 0)
    for (auto& s : sample_strings(dfa, length, n_pos, true, pos_seed))
      data.items.push_back({std::move(s), true});
  if (n_neg > 0)
    for (auto& s : sample_strings(dfa, length, n_neg, false, neg_seed))
      data.items.push_back({std::move(s), false});
  std::mt19937_64 mix(mix_seed);
  std::shuffle(data.items.begin(), data.items.end(), mix);
  return data;
}

Rational negative_ratio(GrammarId g, int length) {
  if (length < 0) throw UsageError("length must be non-negative");
  const BigCount accepted = count_accepted(ground_truth(g), length);
  const BigCount all = BigCount(1) << length;
  return Rational(1) - Rational(accepted, all);
}

std::string serialize(const LabeledDataset& data) {
  std::ostringstream os;
  os << "# grammar " << data.grammar << " min_len " << data.min_len << " max_len "
     << data.max_len << " seed " << data.seed << " role " << to_string(data.role) << "\n";
  for (const auto& item : data.items) os << (item.label ? '1' : '0') << '\t' << item.text << '\n';
  return os.str();
}

LabeledDataset parse_dataset(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset: missing header");
  LabeledDataset data;
  {
    std::istringstream h(line);
    std::string hash, k1, k2, k3, k4, k5, role;
    if (!(h >> hash >> k1 >> data.grammar >> k2 >> data.min_len >> k3 >> data.max_len >> k4 >>
          data.seed >> k5 >> role) ||
        hash != "#" || k1 != "grammar" || k2 != "min_len" || k3 != "max_len" || k4 != "seed" ||
        k5 != "role")
      throw ParseError("dataset: malformed header '" + line + "'");
    GrammarId check(data.grammar);
    (void)check;
    data.role = parse_role(role);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() < 2 || (line[0] != '0' && line[0] != '1') || line[1] != '\t')
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected 'label<TAB>string'");
    std::string s = line.substr(2);
    try {
      check_binary(s);
    } catch (const InvalidSymbol&) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": non-binary string");
    }
    data.items.push_back({std::move(s), line[0] == '1'});
  }
  return data;
}

void save_dataset(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << serialize(data);
  if (!out) throw IoError(path, "write failed");
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

}  // namespace dfaforge
