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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "augsearch/ars_core.hpp"

namespace augsearch {

inline constexpr const char* kCheckpointFormat = "augsearch.checkpoint/1";

nlohmann::ordered_json config_to_json(const SearchConfig& config);

/// Reads the keys present in `json` over `base`. Unknown keys are rejected.
/// Throws ParseError naming the offending key.
SearchConfig config_from_json(const nlohmann::json& json, SearchConfig base = {});

nlohmann::ordered_json record_to_json(const RewardRecord& record);
RewardRecord record_from_json(const nlohmann::json& json);

/// Checkpoint document. Vectors and rewards are stored as shortest
/// round-trip decimal strings so a reload is bit-exact. `best` holds up to
/// five best records seen so far.
nlohmann::ordered_json checkpoint_to_json(
    const SearchConfig& config, const SearchState& state,
    const MagnitudeRangeTable& ranges = MagnitudeRangeTable::builtin());

struct Checkpoint {
  SearchConfig config;
  std::size_t iteration = 0;
  ParameterVector params{};
  std::uint64_t handles_issued = 0;
  double best_reward = 0.0;
  std::vector<RewardRecord> best;
  std::size_t skip_events = 0;
};

/// Strict parse of a checkpoint file's text. Throws ParseError.
Checkpoint parse_checkpoint(const std::string& text);

/// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t iteration);

}  // namespace augsearch
