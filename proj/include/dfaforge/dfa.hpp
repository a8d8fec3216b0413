#pragma once

// Deterministic finite automata over the binary alphabet {0,1}.
//
// A Dfa is an immutable value: a total transition table, an initial state and
// a (possibly empty) set of accepting states. Strings are std::string values
// made of the characters '0' and '1'; any other character raises InvalidSymbol.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace dfaforge {

using StateId = int;
using BigCount = boost::multiprecision::cpp_int;

inline constexpr int kAlphabetSize = 2;

// Maps '0'/'1' to 0/1, throws InvalidSymbol otherwise.
int symbol_index(char c);
void check_binary(std::string_view s);

class Dfa {
 public:
  using Row = std::array<StateId, kAlphabetSize>;

  // Throws InvalidDfa if any invariant is violated.
  Dfa(int num_states, StateId initial, std::vector<bool> accepting,
      std::vector<Row> delta);

  int num_states() const { return static_cast<int>(delta_.size()); }
  int alphabet_size() const { return kAlphabetSize; }
  StateId initial() const { return initial_; }
  bool is_accepting(StateId s) const { return accepting_[s]; }
  std::vector<StateId> accepting_states() const;
  StateId next(StateId s, int symbol) const { return delta_[s][symbol]; }
  const std::vector<Row>& table() const { return delta_; }
  const std::vector<bool>& accepting_mask() const { return accepting_; }

  // State reached from the initial state after consuming s.
  StateId run(std::string_view s) const;

  bool operator==(const Dfa&) const = default;

 private:
  StateId initial_;
  std::vector<bool> accepting_;
  std::vector<Row> delta_;
};

bool accepts(const Dfa& dfa, std::string_view s);

// Same transitions, accepting set flipped.
Dfa complement(const Dfa& dfa);

// Hopcroft minimization after pruning unreachable states. The result is
// numbered in breadth-first order from the initial state, symbol 0 first, so
// two minimal DFAs for the same language compare equal with operator==.
Dfa minimize(const Dfa& dfa);

// Renumbers reachable states in BFS order (symbol 0 first), dropping the rest.
Dfa canonicalize(const Dfa& dfa);

struct Equivalence {
  bool equal = true;
  // Shortest distinguishing string, lexicographically least among those.
  std::optional<std::string> counterexample;
};

Equivalence equivalent(const Dfa& a, const Dfa& b);

// Exact number of accepted strings of exactly `length` symbols.
BigCount count_accepted(const Dfa& dfa, int length);

// `count` strings drawn independently and uniformly from the accepted (or
// rejected) strings of the given length. Throws EmptyLanguageSlice if that
// slice has no members.
std::vector<std::string> sample_strings(const Dfa& dfa, int length, int count,
                                        bool want_accepted, std::uint64_t seed);

// Uniform integer in [0, bound). bound must be positive.
BigCount uniform_below(const BigCount& bound, std::mt19937_64& rng);

// Graphviz rendering: entry arrow on the initial state, accepting states
// double-circled, dotted edges for symbol 0 and solid edges for symbol 1.
std::string to_dot(const Dfa& dfa, std::string_view graph_name = "dfa");

// Compact text format:
//   states N alphabet 2 initial I
//   accepting i1 i2 ...
//   state s: on0 t0 on1 t1        (N lines)
std::string serialize(const Dfa& dfa);
Dfa parse_dfa(std::string_view text);

}  // namespace dfaforge
