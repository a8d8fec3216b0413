#pragma once

// Small trained networks shared by several test files. Training happens once
// per process on the short-string datasets, which converge in a few epochs.

#include <map>

#include "dfaforge/experiments.hpp"
#include "dfaforge/rnn.hpp"
#include "dfaforge/tomita.hpp"

namespace fixture {

struct Trained {
  dfaforge::DatasetSplit split;
  dfaforge::SecondOrderRnn model;
  bool converged = false;
};

inline const Trained& trained(int grammar, int max_len = 10, int hidden = 15) {
  static std::map<std::tuple<int, int, int>, Trained> cache;
  const auto key = std::make_tuple(grammar, max_len, hidden);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Trained t;
  t.split = dfaforge::generate_dataset(dfaforge::GrammarId(grammar), 3, max_len, 0.2, 1);
  dfaforge::TrainConfig cfg;
  cfg.seed = 3;
  const auto run = dfaforge::train_to_convergence(
      dfaforge::SecondOrderRnn::random(hidden, cfg.weight_init_scale, 3), t.split.train,
      t.split.test, cfg, 300);
  t.model = run.result.model;
  t.converged = run.converged;
  return cache.emplace(key, std::move(t)).first->second;
}

}  // namespace fixture
