// Copyright (c) 2026 The augsearch Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "augsearch/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace augsearch {
namespace {

nlohmann::json vector_to_json(const ParameterVector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) {
    out.push_back(format_exact(x));
  }
  return out;
}

ParameterVector vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != kVectorDim) {
    throw ParseError(what + ": expected an array of " + std::to_string(kVectorDim) + " strings");
  }
  ParameterVector v{};
  for (std::size_t i = 0; i < kVectorDim; ++i) {
    if (!j[i].is_string()) {
      throw ParseError(what + "[" + std::to_string(i) + "]: expected a decimal string");
    }
    v[i] = parse_exact(j[i].get<std::string>());
  }
  return v;
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(where + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + "." + key + ": wrong type");
  }
}

std::uint64_t get_count(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(where + ": missing field \"" + key + "\"");
  }
  if (!j.at(key).is_number_unsigned()) {
    throw ParseError(where + "." + key + ": expected a non-negative integer");
  }
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

nlohmann::ordered_json config_to_json(const SearchConfig& c) {
  nlohmann::ordered_json j;
  j["step_size"] = c.step_size;
  j["num_directions"] = c.num_directions;
  j["noise_std"] = c.noise_std;
  j["top_directions"] = c.top_directions;
  j["max_iterations"] = c.max_iterations;
  j["run_seed"] = c.run_seed;
  j["table_seed"] = c.table_seed;
  j["table_size"] = c.table_size;
  j["plateau_window"] = c.plateau_window;
  if (c.reward_threshold) {
    j["reward_threshold"] = *c.reward_threshold;
  } else {
    j["reward_threshold"] = nullptr;
  }
  return j;
}

SearchConfig config_from_json(const nlohmann::json& j, SearchConfig c) {
  if (!j.is_object()) {
    throw ParseError("search config: expected a JSON object");
  }
  static const std::set<std::string> kKnown = {
      "step_size", "num_directions", "noise_std",      "top_directions", "max_iterations",
      "run_seed",  "table_seed",     "table_size",     "plateau_window", "reward_threshold"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) {
      throw ParseError("search config: unknown key \"" + key + "\"");
    }
  }
  const std::string where = "search config";
  auto real = [&](const char* key, double& out) {
    if (j.contains(key)) {
      if (!j[key].is_number()) {
        throw ParseError(where + "." + key + ": expected a number");
      }
      out = j[key].get<double>();
    }
  };
  auto count = [&](const char* key, auto& out) {
    if (j.contains(key)) {
      out = static_cast<std::remove_reference_t<decltype(out)>>(get_count(j, key, where));
    }
  };
  real("step_size", c.step_size);
  real("noise_std", c.noise_std);
  count("num_directions", c.num_directions);
  count("top_directions", c.top_directions);
  count("max_iterations", c.max_iterations);
  count("run_seed", c.run_seed);
  count("table_seed", c.table_seed);
  count("table_size", c.table_size);
  count("plateau_window", c.plateau_window);
  if (j.contains("reward_threshold")) {
    if (j["reward_threshold"].is_null()) {
      c.reward_threshold.reset();
    } else if (j["reward_threshold"].is_number()) {
      c.reward_threshold = j["reward_threshold"].get<double>();
    } else {
      throw ParseError(where + ".reward_threshold: expected a number or null");
    }
  }
  return c;
}

nlohmann::ordered_json record_to_json(const RewardRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["direction"] = r.direction_index;
  j["offset"] = r.direction.offset;
  j["sign"] = r.sign == Sign::kPlus ? "+" : "-";
  j["reward"] = format_exact(r.reward);
  j["vector"] = vector_to_json(r.normalized_vector);
  return j;
}

RewardRecord record_from_json(const nlohmann::json& j) {
  const std::string where = "reward record";
  RewardRecord r;
  r.iteration = get_count(j, "iteration", where);
  r.direction_index = get_count(j, "direction", where);
  r.direction.offset = get_count(j, "offset", where);
  const auto sign = get_field<std::string>(j, "sign", where);
  if (sign != "+" && sign != "-") {
    throw ParseError(where + ".sign: expected \"+\" or \"-\"");
  }
  r.sign = sign == "+" ? Sign::kPlus : Sign::kMinus;
  r.reward = parse_exact(get_field<std::string>(j, "reward", where));
  r.normalized_vector = vector_from_json(j.at("vector"), where + ".vector");
  for (double x : r.normalized_vector) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ParseError(where + ".vector: coordinate outside [0, 1]");
    }
  }
  return r;
}

nlohmann::ordered_json checkpoint_to_json(const SearchConfig& config, const SearchState& state,
                                          const MagnitudeRangeTable& ranges) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["iteration"] = state.iteration;
  j["config"] = config_to_json(config);
  j["params"] = vector_to_json(state.params);
  j["handles_issued"] = state.handles_issued;
  j["best_reward"] = format_exact(state.best_reward);

  std::vector<const RewardRecord*> best;
  for (const auto& r : state.history) {
    best.push_back(&r);
  }
  const std::size_t keep = std::min<std::size_t>(best.size(), 5);
  std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(keep), best.end(),
                    [](const RewardRecord* a, const RewardRecord* b) {
                      if (a->reward != b->reward) {
                        return a->reward > b->reward;
                      }
                      return a < b;  // earlier record first
                    });
  j["best"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < keep; ++i) {
    auto rec = record_to_json(*best[i]);
    rec["policy"] = policy_to_json(decode_policy(best[i]->normalized_vector, ranges));
    j["best"].push_back(rec);
  }
  j["skip_events"] = std::count_if(state.events.begin(), state.events.end(), [](const RunEvent& e) {
    return e.kind == EventKind::kSigmaZeroSkip;
  });
  return j;
}

Checkpoint parse_checkpoint(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("checkpoint: malformed JSON");
  }
  const std::string where = "checkpoint";
  if (get_field<std::string>(j, "format", where) != kCheckpointFormat) {
    throw ParseError("checkpoint: unsupported format");
  }
  Checkpoint c;
  c.iteration = get_count(j, "iteration", where);
  c.config = config_from_json(j.at("config"));
  c.config.validate(true);
  c.params = vector_from_json(j.at("params"), where + ".params");
  for (double x : c.params) {
    if (!std::isfinite(x)) {
      throw ParseError("checkpoint.params: non-finite coordinate");
    }
  }
  c.handles_issued = get_count(j, "handles_issued", where);
  c.best_reward = parse_exact(get_field<std::string>(j, "best_reward", where));
  const auto& best = j.at("best");
  if (!best.is_array() || best.size() > 5) {
    throw ParseError("checkpoint.best: expected an array of at most 5 records");
  }
  for (const auto& rec : best) {
    c.best.push_back(record_from_json(rec));
    if (!rec.contains("policy") || !rec.at("policy").is_object()) {
      throw ParseError("checkpoint.best: record without policy");
    }
  }
  c.skip_events = get_count(j, "skip_events", where);
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << text;
    if (!out.flush()) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t iteration) {
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint_%06zu.json", iteration);
  return dir / name;
}

}  // namespace augsearch
