#pragma once

// The seven Tomita grammars: hand-coded ground-truth automata, independent
// membership predicates, and the enumerated / sampled string datasets used to
// train and evaluate the recurrent models.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dfaforge/dfa.hpp"

namespace dfaforge {

class GrammarId {
 public:
  // Throws UsageError unless 1 <= value <= 7.
  explicit GrammarId(int value);
  int value() const { return value_; }
  bool operator==(const GrammarId&) const = default;

  static std::vector<GrammarId> all();

 private:
  int value_;
};

Dfa ground_truth(GrammarId g);

// Direct encoding of each grammar's description, independent of ground_truth.
bool membership(GrammarId g, std::string_view s);

// `all` is the unsplit enumeration (train and test together).
enum class DatasetRole { train, test, long_test, all };

std::string to_string(DatasetRole role);
DatasetRole parse_role(std::string_view text);

struct LabeledString {
  std::string text;
  bool label = false;
  bool operator==(const LabeledString&) const = default;
};

struct LabeledDataset {
  std::vector<LabeledString> items;
  int min_len = 0;
  int max_len = 0;
  int grammar = 1;
  DatasetRole role = DatasetRole::train;
  std::uint64_t seed = 0;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::size_t positives() const;
  bool operator==(const LabeledDataset&) const = default;
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

inline constexpr int kDefaultMinLen = 3;
inline constexpr int kDefaultMaxLen = 15;
inline constexpr double kDefaultTestFraction = 0.2;

// Every string with min_len <= |s| <= max_len, labelled by the ground truth and
// split into train/test. The split is stratified by (label, length): within a
// label, each length stratum sends floor or ceil of test_fraction of its items
// to test, with the ceil slots allotted by largest remainder so the label's
// overall test count is round(test_fraction * total).
DatasetSplit generate_dataset(GrammarId g, int min_len, int max_len, double test_fraction,
                              std::uint64_t seed);

// Strings of one fixed length sampled uniformly within each label, with the
// positive count set to round(p * n) for the exact accepted proportion p.
LabeledDataset generate_long_testset(GrammarId g, int length, int n, std::uint64_t seed);

using Rational = boost::multiprecision::cpp_rational;

// 1 - count_accepted / 2^length.
Rational negative_ratio(GrammarId g, int length);

// "# grammar G min_len A max_len B seed S role R" header, then
// "label<TAB>string" per line.
std::string serialize(const LabeledDataset& data);
LabeledDataset parse_dataset(std::string_view text);

void save_dataset(const LabeledDataset& data, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace dfaforge
