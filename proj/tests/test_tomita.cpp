#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "doctest.h"
#include "oracles.hpp"

#include "dfaforge/errors.hpp"
#include "dfaforge/tomita.hpp"

using namespace dfaforge;

namespace {

// A third, deliberately naive encoding of the seven languages, written from
// their textual descriptions with std::regex and counting loops.
bool naive(int g, const std::string& s) {
  switch (g) {
    case 1: return std::regex_match(s, std::regex("1*"));
    case 2: return std::regex_match(s, std::regex("(10)*"));
    case 3: {
      // Reject when an odd run of 1s is immediately followed by an odd run of 0s.
      bool after_odd_ones = false;
      for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        const bool odd = (j - i) % 2 == 1;
        if (s[i] == '0' && after_odd_ones && odd) return false;
        after_odd_ones = s[i] == '1' && odd;
        i = j;
      }
      return true;
    }
    case 4: return s.find("000") == std::string::npos;
    case 5: {
      int zeros = 0, ones = 0;
      for (char c : s) (c == '0' ? zeros : ones)++;
      return zeros % 2 == 0 && ones % 2 == 0;
    }
    case 6: {
      int zeros = 0, ones = 0;
      for (char c : s) (c == '0' ? zeros : ones)++;
      return (zeros - ones) % 3 == 0;
    }
    default: return std::regex_match(s, std::regex("0*1*0*1*"));
  }
}

}  // namespace

TEST_CASE("grammar ids are range checked") {
  CHECK_THROWS_AS(GrammarId(0), UsageError);
  CHECK_THROWS_AS(GrammarId(8), UsageError);
  CHECK(GrammarId::all().size() == 7);
}

TEST_CASE("ground truth agrees with both membership encodings") {
  const auto strings = oracle::strings_up_to(12);
  for (int g = 1; g <= 7; ++g) {
    CAPTURE(g);
    const Dfa d = ground_truth(GrammarId(g));
    for (const auto& s : strings) {
      CAPTURE(s);
      REQUIRE(accepts(d, s) == membership(GrammarId(g), s));
      REQUIRE(accepts(d, s) == naive(g, s));
    }
  }
}

TEST_CASE("a few hand-checked memberships") {
  CHECK(membership(GrammarId(3), "110100"));
  CHECK_FALSE(membership(GrammarId(3), "1000"));
  CHECK_FALSE(membership(GrammarId(3), "10100"));
  CHECK(membership(GrammarId(3), "100"));
  CHECK_FALSE(membership(GrammarId(4), "10001"));
  CHECK(membership(GrammarId(6), "0011"));
  CHECK(membership(GrammarId(6), "000"));
  CHECK_FALSE(membership(GrammarId(6), "01011"));
  CHECK(membership(GrammarId(7), "0011001"));
  CHECK_FALSE(membership(GrammarId(7), "10101"));
}

TEST_CASE("enumerated dataset: coverage, labels and split") {
  for (int g = 1; g <= 7; ++g) {
    CAPTURE(g);
    const auto split = generate_dataset(GrammarId(g), 3, 10, 0.2, 99);
    std::set<std::string> train, test;
    for (const auto& x : split.train.items) {
      REQUIRE(x.label == membership(GrammarId(g), x.text));
      train.insert(x.text);
    }
    for (const auto& x : split.test.items) {
      REQUIRE(x.label == membership(GrammarId(g), x.text));
      REQUIRE_FALSE(train.count(x.text));
      test.insert(x.text);
    }
    CHECK(train.size() + test.size() == (1u << 11) - 8);
    CHECK(train.size() == split.train.size());

    std::size_t pos = 0, neg = 0;
    for (const auto& s : oracle::strings_up_to(10))
      if (s.size() >= 3) (membership(GrammarId(g), s) ? pos : neg)++;
    CHECK(split.test.positives() == static_cast<std::size_t>(std::llround(0.2 * pos)));
    CHECK(split.test.size() - split.test.positives() ==
          static_cast<std::size_t>(std::llround(0.2 * neg)));
  }
}

TEST_CASE("the split is stratified by length within each label") {
  const auto split = generate_dataset(GrammarId(4), 3, 12, 0.2, 5);
  std::map<std::pair<bool, int>, int> total, in_test;
  for (const auto& x : split.train.items) ++total[{x.label, int(x.text.size())}];
  for (const auto& x : split.test.items) {
    ++total[{x.label, int(x.text.size())}];
    ++in_test[{x.label, int(x.text.size())}];
  }
  for (const auto& [key, n] : total) {
    const double share = 0.2 * n;
    CHECK(in_test[key] >= std::floor(share));
    CHECK(in_test[key] <= std::ceil(share));
  }
}

TEST_CASE("dataset generation is seeded") {
  const auto a = generate_dataset(GrammarId(3), 3, 9, 0.2, 1);
  const auto b = generate_dataset(GrammarId(3), 3, 9, 0.2, 1);
  const auto c = generate_dataset(GrammarId(3), 3, 9, 0.2, 2);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK_FALSE(a.test == c.test);
}

TEST_CASE("grammar 1 has one positive per length") {
  const auto split = generate_dataset(GrammarId(1), 3, 15, 0.2, 7);
  CHECK(split.train.positives() + split.test.positives() == 13);
}

TEST_CASE("long test sets keep the exact class proportion") {
  const auto d = generate_long_testset(GrammarId(5), 40, 10000, 3);
  CHECK(d.size() == 10000);
  CHECK(d.positives() == 5000);
  for (const auto& x : d.items) {
    REQUIRE(x.text.size() == 40);
    REQUIRE(x.label == membership(GrammarId(5), x.text));
  }
  CHECK(d == generate_long_testset(GrammarId(5), 40, 10000, 3));

  // Grammar 4 at length 20: accepted share from brute force over 2^20 strings.
  std::uint64_t accepted = 0;
  for (std::uint64_t v = 0; v < (1u << 20); ++v) {
    int run = 0;
    bool ok = true;
    for (int i = 0; i < 20 && ok; ++i) {
      run = (v >> i & 1) ? 0 : run + 1;
      ok = run < 3;
    }
    accepted += ok;
  }
  const auto g4 = generate_long_testset(GrammarId(4), 20, 1000, 3);
  CHECK(g4.positives() == static_cast<std::size_t>(std::llround(1000.0 * accepted / (1u << 20))));
}

TEST_CASE("negative ratios") {
  for (int n = 2; n <= 200; n += 2) REQUIRE(negative_ratio(GrammarId(5), n) == Rational(1, 2));
  Rational prev = negative_ratio(GrammarId(4), 20);
  for (int n = 40; n <= 200; n += 20) {
    const Rational r = negative_ratio(GrammarId(4), n);
    CHECK(r > prev);
    prev = r;
  }
  CHECK(negative_ratio(GrammarId(1), 5) == Rational(31, 32));
}

TEST_CASE("dataset text round-trip") {
  const auto split = generate_dataset(GrammarId(6), 3, 8, 0.2, 4);
  const std::string text = serialize(split.test);
  const LabeledDataset back = parse_dataset(text);
  CHECK(back == split.test);
  CHECK(serialize(back) == text);
  CHECK(text.rfind("# grammar 6 min_len 3 max_len 8 seed 4 role test\n", 0) == 0);
  CHECK_THROWS_AS(parse_dataset("# grammar 6\n1\t01\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset("# grammar 6 min_len 3 max_len 8 seed 4 role test\n1\t012\n"),
                  Error);
  CHECK_THROWS_AS(parse_dataset("# grammar 6 min_len 3 max_len 8 seed 4 role test\n2\t01\n"),
                  ParseError);
}
