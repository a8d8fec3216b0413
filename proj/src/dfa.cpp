#include "dfaforge/dfa.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "dfaforge/errors.hpp"

namespace dfaforge {

int symbol_index(char c) {
  if (c == '0') return 0;
  if (c == '1') return 1;
  throw InvalidSymbol(std::string("symbol outside {0,1}: '") + c + "'");
}

void check_binary(std::string_view s) {
  for (char c : s) symbol_index(c);
}

Dfa::Dfa(int num_states, StateId initial, std::vector<bool> accepting,
         std::vector<Row> delta)
    : initial_(initial), accepting_(std::move(accepting)), delta_(std::move(delta)) {
  if (num_states <= 0) throw InvalidDfa("a DFA needs at least one state");
  if (static_cast<int>(delta_.size()) != num_states ||
      static_cast<int>(accepting_.size()) != num_states)
    throw InvalidDfa("transition table or accepting mask has the wrong size");
  if (initial_ < 0 || initial_ >= num_states)
    throw InvalidDfa("initial state out of range");
  for (const auto& row : delta_)
    for (StateId t : row)
      if (t < 0 || t >= num_states) throw InvalidDfa("transition target out of range");
}

std::vector<StateId> Dfa::accepting_states() const {
  std::vector<StateId> out;
  for (StateId s = 0; s < num_states(); ++s)
    if (accepting_[s]) out.push_back(s);
  return out;
}

StateId Dfa::run(std::string_view s) const {
  StateId q = initial_;
  for (char c : s) q = delta_[q][symbol_index(c)];
  return q;
}

bool accepts(const Dfa& dfa, std::string_view s) {
  return dfa.is_accepting(dfa.run(s));
}

Dfa complement(const Dfa& dfa) {
  std::vector<bool> acc = dfa.accepting_mask();
  acc.flip();
  return Dfa(dfa.num_states(), dfa.initial(), std::move(acc), dfa.table());
}

Dfa canonicalize(const Dfa& dfa) {
  const int n = dfa.num_states();
  std::vector<StateId> order;
  std::vector<StateId> new_id(n, -1);
  new_id[dfa.initial()] = 0;
  order.push_back(dfa.initial());
  for (std::size_t head = 0; head < order.size(); ++head) {
    StateId q = order[head];
    for (int a = 0; a < kAlphabetSize; ++a) {
      StateId t = dfa.next(q, a);
      if (new_id[t] < 0) {
        new_id[t] = static_cast<StateId>(order.size());
        order.push_back(t);
      }
    }
  }
  const int m = static_cast<int>(order.size());
  std::vector<bool> acc(m);
  std::vector<Dfa::Row> delta(m);
  for (int i = 0; i < m; ++i) {
    acc[i] = dfa.is_accepting(order[i]);
    for (int a = 0; a < kAlphabetSize; ++a) delta[i][a] = new_id[dfa.next(order[i], a)];
  }
  return Dfa(m, 0, std::move(acc), std::move(delta));
}

namespace {

// Hopcroft partition refinement on a DFA whose states are all reachable.
// Returns the block id of every state.
std::vector<int> hopcroft_blocks(const Dfa& dfa) {
  const int n = dfa.num_states();

  // inverse[a][t] = states q with delta(q, a) = t
  std::array<std::vector<std::vector<StateId>>, kAlphabetSize> inverse;
  for (int a = 0; a < kAlphabetSize; ++a) {
    inverse[a].assign(n, {});
    for (StateId q = 0; q < n; ++q) inverse[a][dfa.next(q, a)].push_back(q);
  }

  std::vector<std::vector<StateId>> blocks;
  std::vector<int> block_of(n, -1);
  {
    std::vector<StateId> acc, rej;
    for (StateId q = 0; q < n; ++q) (dfa.is_accepting(q) ? acc : rej).push_back(q);
    for (auto* b : {&acc, &rej}) {
      if (b->empty()) continue;
      for (StateId q : *b) block_of[q] = static_cast<int>(blocks.size());
      blocks.push_back(std::move(*b));
    }
  }

  std::deque<std::pair<int, int>> work;
  std::vector<std::array<bool, kAlphabetSize>> queued(blocks.size(), {false, false});
  {
    // Seeding with the smaller initial block suffices.
    int start = 0;
    if (blocks.size() == 2 && blocks[1].size() < blocks[0].size()) start = 1;
    for (int a = 0; a < kAlphabetSize; ++a) {
      work.emplace_back(start, a);
      queued[start][a] = true;
    }
  }

  std::vector<int> hits;  // per block: number of marked members
  std::vector<char> marked(n, 0);
  while (!work.empty()) {
    auto [splitter, a] = work.front();
    work.pop_front();
    queued[splitter][a] = false;

    // Predecessors of the splitter on symbol a.
    std::vector<StateId> pre;
    for (StateId t : blocks[splitter])
      for (StateId q : inverse[a][t])
        if (!marked[q]) {
          marked[q] = 1;
          pre.push_back(q);
        }

    hits.assign(blocks.size(), 0);
    std::vector<int> touched;
    for (StateId q : pre) {
      int b = block_of[q];
      if (hits[b]++ == 0) touched.push_back(b);
    }

    for (int b : touched) {
      if (hits[b] == static_cast<int>(blocks[b].size())) continue;
      std::vector<StateId> inside, outside;
      for (StateId q : blocks[b]) (marked[q] ? inside : outside).push_back(q);
      const int fresh = static_cast<int>(blocks.size());
      blocks[b] = std::move(outside);
      for (StateId q : inside) block_of[q] = fresh;
      blocks.push_back(std::move(inside));
      queued.push_back({false, false});
      for (int c = 0; c < kAlphabetSize; ++c) {
        if (queued[b][c]) {
          work.emplace_back(fresh, c);
          queued[fresh][c] = true;
        } else {
          int smaller = blocks[fresh].size() <= blocks[b].size() ? fresh : b;
          work.emplace_back(smaller, c);
          queued[smaller][c] = true;
        }
      }
    }
    for (StateId q : pre) marked[q] = 0;
  }
  return block_of;
}

}  // namespace

Dfa minimize(const Dfa& dfa) {
  Dfa reach = canonicalize(dfa);
  std::vector<int> block_of = hopcroft_blocks(reach);
  int nb = *std::max_element(block_of.begin(), block_of.end()) + 1;
  std::vector<bool> acc(nb);
  std::vector<Dfa::Row> delta(nb);
  for (StateId q = 0; q < reach.num_states(); ++q) {
    int b = block_of[q];
    acc[b] = reach.is_accepting(q);
    for (int a = 0; a < kAlphabetSize; ++a) delta[b][a] = block_of[reach.next(q, a)];
  }
  return canonicalize(Dfa(nb, block_of[reach.initial()], std::move(acc), std::move(delta)));
}

Equivalence equivalent(const Dfa& a, const Dfa& b) {
  const int nb = b.num_states();
  const int pairs = a.num_states() * nb;
  // parent[p] = (previous pair, symbol); the root points at itself.
  std::vector<std::pair<int, char>> parent(pairs, {-1, 0});
  std::vector<int> queue;
  int root = a.initial() * nb + b.initial();
  parent[root] = {root, 0};
  queue.push_back(root);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int p = queue[head];
    StateId qa = p / nb, qb = p % nb;
    if (a.is_accepting(qa) != b.is_accepting(qb)) {
      std::string word;
      for (int cur = p; cur != root; cur = parent[cur].first) word.push_back(parent[cur].second);
      std::reverse(word.begin(), word.end());
      return {false, std::move(word)};
    }
    for (int s = 0; s < kAlphabetSize; ++s) {
      int np = a.next(qa, s) * nb + b.next(qb, s);
      if (parent[np].first < 0) {
        parent[np] = {p, static_cast<char>('0' + s)};
        queue.push_back(np);
      }
    }
  }
  return {true, std::nullopt};
}

BigCount count_accepted(const Dfa& dfa, int length) {
  if (length < 0) throw UsageError("length must be non-negative");
  std::vector<BigCount> occ(dfa.num_states()), next(dfa.num_states());
  occ[dfa.initial()] = 1;
  for (int step = 0; step < length; ++step) {
    std::fill(next.begin(), next.end(), BigCount(0));
    for (StateId q = 0; q < dfa.num_states(); ++q) {
      if (occ[q] == 0) continue;
      for (int a = 0; a < kAlphabetSize; ++a) next[dfa.next(q, a)] += occ[q];
    }
    occ.swap(next);
  }
  BigCount total = 0;
  for (StateId q = 0; q < dfa.num_states(); ++q)
    if (dfa.is_accepting(q)) total += occ[q];
  return total;
}

BigCount uniform_below(const BigCount& bound, std::mt19937_64& rng) {
  const unsigned bits = boost::multiprecision::msb(bound) + 1;
  const unsigned words = (bits + 63) / 64;
  const unsigned top_bits = bits - 64 * (words - 1);
  const std::uint64_t top_mask = top_bits == 64 ? ~0ULL : ((1ULL << top_bits) - 1);
  for (;;) {
    BigCount r = 0;
    for (unsigned w = 0; w < words; ++w) {
      std::uint64_t chunk = rng();
      if (w == 0) chunk &= top_mask;
      r <<= 64;
      r += chunk;
    }
    if (r < bound) return r;
  }
}

std::vector<std::string> sample_strings(const Dfa& dfa, int length, int count,
                                        bool want_accepted, std::uint64_t seed) {
  if (length < 0 || count < 0) throw UsageError("length and count must be non-negative");
  const Dfa target = want_accepted ? dfa : complement(dfa);
  const int n = target.num_states();
  // ways[r][q]: accepted strings of length r starting in q.
  std::vector<std::vector<BigCount>> ways(length + 1, std::vector<BigCount>(n));
  for (StateId q = 0; q < n; ++q) ways[0][q] = target.is_accepting(q) ? 1 : 0;
  for (int r = 1; r <= length; ++r)
    for (StateId q = 0; q < n; ++q)
      ways[r][q] = ways[r - 1][target.next(q, 0)] + ways[r - 1][target.next(q, 1)];

  const BigCount& total = ways[length][target.initial()];
  if (total == 0)
    throw EmptyLanguageSlice("no " + std::string(want_accepted ? "accepted" : "rejected") +
                             " strings of length " + std::to_string(length));

  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    // Unrank a uniform index among the slice members.
    BigCount rank = uniform_below(total, rng);
    std::string s(length, '0');
    StateId q = target.initial();
    for (int pos = 0; pos < length; ++pos) {
      const int remaining = length - pos - 1;
      const BigCount& zero_ways = ways[remaining][target.next(q, 0)];
      if (rank < zero_ways) {
        q = target.next(q, 0);
      } else {
        rank -= zero_ways;
        s[pos] = '1';
        q = target.next(q, 1);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string to_dot(const Dfa& dfa, std::string_view graph_name) {
  std::ostringstream os;
  os << "digraph " << graph_name << " {\n";
  os << "  rankdir=LR;\n";
  os << "  start [shape=none, label=\"\", width=0, height=0];\n";
  for (StateId q = 0; q < dfa.num_states(); ++q)
    os << "  q" << q << " [shape=" << (dfa.is_accepting(q) ? "doublecircle" : "circle")
       << ", label=\"" << q << "\"];\n";
  os << "  start -> q" << dfa.initial() << ";\n";
  for (StateId q = 0; q < dfa.num_states(); ++q)
    for (int a = 0; a < kAlphabetSize; ++a)
      os << "  q" << q << " -> q" << dfa.next(q, a) << " [label=\"" << a
         << "\", style=" << (a == 0 ? "dotted" : "solid") << "];\n";
  os << "}\n";
  return os.str();
}

std::string serialize(const Dfa& dfa) {
  std::ostringstream os;
  os << "states " << dfa.num_states() << " alphabet " << kAlphabetSize << " initial "
     << dfa.initial() << "\n";
  os << "accepting";
  for (StateId q : dfa.accepting_states()) os << ' ' << q;
  os << "\n";
  for (StateId q = 0; q < dfa.num_states(); ++q)
    os << "state " << q << ": on0 " << dfa.next(q, 0) << " on1 " << dfa.next(q, 1) << "\n";
  return os.str();
}

namespace {

void expect_word(std::istringstream& is, const std::string& word, int line) {
  std::string got;
  if (!(is >> got) || got != word)
    throw ParseError("DFA text line " + std::to_string(line) + ": expected '" + word + "'");
}

int expect_int(std::istringstream& is, int line) {
  long long v;
  if (!(is >> v)) throw ParseError("DFA text line " + std::to_string(line) + ": expected integer");
  return static_cast<int>(v);
}

void expect_end(std::istringstream& is, int line) {
  std::string rest;
  if (is >> rest)
    throw ParseError("DFA text line " + std::to_string(line) + ": trailing token '" + rest + "'");
}

}  // namespace

Dfa parse_dfa(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next_line = [&](int no) {
    if (!std::getline(in, line))
      throw ParseError("DFA text truncated before line " + std::to_string(no));
    return std::istringstream(line);
  };

  auto header = next_line(1);
  expect_word(header, "states", 1);
  int n = expect_int(header, 1);
  expect_word(header, "alphabet", 1);
  if (expect_int(header, 1) != kAlphabetSize) throw ParseError("only alphabet 2 is supported");
  expect_word(header, "initial", 1);
  int initial = expect_int(header, 1);
  expect_end(header, 1);
  if (n <= 0 || n > (1 << 24)) throw ParseError("bad state count");

  auto acc_line = next_line(2);
  expect_word(acc_line, "accepting", 2);
  std::vector<bool> acc(n, false);
  int q;
  while (acc_line >> q) {
    if (q < 0 || q >= n) throw ParseError("accepting state out of range");
    acc[q] = true;
  }
  if (!acc_line.eof()) throw ParseError("DFA text line 2: malformed accepting list");

  std::vector<Dfa::Row> delta(n);
  for (int s = 0; s < n; ++s) {
    auto row = next_line(3 + s);
    expect_word(row, "state", 3 + s);
    std::string label;
    row >> label;
    if (label != std::to_string(s) + ":")
      throw ParseError("DFA text line " + std::to_string(3 + s) + ": expected 'state " +
                       std::to_string(s) + ":'");
    expect_word(row, "on0", 3 + s);
    delta[s][0] = expect_int(row, 3 + s);
    expect_word(row, "on1", 3 + s);
    delta[s][1] = expect_int(row, 3 + s);
    expect_end(row, 3 + s);
  }
  try {
    return Dfa(n, initial, std::move(acc), std::move(delta));
  } catch (const InvalidDfa& e) {
    throw ParseError(std::string("DFA text: ") + e.what());
  }
}

}  // namespace dfaforge
