#include "dfaforge/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dfaforge/errors.hpp"

namespace dfaforge {

using nlohmann::json;

json RunConfig::to_json() const {
  json j = dfaforge::to_json(exp);
  j["command"] = command;
  j["experiment"] = experiment;
  j["epochs"] = epochs;
  j["k"] = k;
  j["long_length"] = long_length;
  j["long_count"] = long_count;
  j["out"] = out;
  j["jobs"] = exp.jobs;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  RunConfig rc;
  json flat = j;
  if (j.contains("config") && j["config"].is_object()) {
    // A run manifest: take its config and experiment name, ignore the results.
    flat = j["config"];
    if (j.contains("experiment")) flat["experiment"] = j["experiment"];
  }
  try {
    auto take = [&](const char* key, auto& field) {
      if (flat.contains(key)) {
        flat.at(key).get_to(field);
        flat.erase(key);
      }
    };
    take("command", rc.command);
    take("experiment", rc.experiment);
    take("epochs", rc.epochs);
    take("k", rc.k);
    take("long_length", rc.long_length);
    take("long_count", rc.long_count);
    take("out", rc.out);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  rc.exp = experiment_config_from_json(flat);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path, "cannot open config");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::pair<int, int> parse_k_range(std::string_view text) {
  auto to_int = [&](std::string_view s) {
    int v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
      throw UsageError("bad k range '" + std::string(text) + "'");
    return v;
  };
  auto pos = text.find("..");
  std::size_t skip = 2;
  if (pos == std::string_view::npos) {
    pos = text.find('-');
    skip = 1;
  }
  if (pos == std::string_view::npos) {
    const int k = to_int(text);
    return {k, k};
  }
  const int lo = to_int(text.substr(0, pos)), hi = to_int(text.substr(pos + skip));
  if (hi < lo) throw UsageError("empty k range '" + std::string(text) + "'");
  return {lo, hi};
}

std::string default_output_root() {
  const char* env = std::getenv("DFAFORGE_OUT");
  return env && *env ? env : "runs";
}

}  // namespace dfaforge
