#pragma once

// Everything one CLI invocation needs. A JSON file supplies values first, flags
// override them, and the result is echoed into every manifest the run writes.

#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"

#include "dfaforge/experiments.hpp"

namespace dfaforge {

struct RunConfig {
  std::string command;
  std::string experiment;  // sweep only
  ExperimentConfig exp;    // grammar, data, model, training, extraction, seed, jobs
  // train: 0 trains until 100% test accuracy or the grammar's epoch cap;
  // a positive value trains exactly that many epochs.
  int epochs = 0;
  int k = 10;  // extract
  // generate: also write a long test set when long_length > 0
  int long_length = 0;
  int long_count = 10000;
  std::string out;

  nlohmann::json to_json() const;
};

// Accepts flat keys, or a run manifest ({"experiment": ..., "config": {...}}).
// Unknown keys throw ParseError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// "3..15", "3-15" or a single "7".
std::pair<int, int> parse_k_range(std::string_view text);

// $DFAFORGE_OUT, or "runs" when unset.
std::string default_output_root();

}  // namespace dfaforge
