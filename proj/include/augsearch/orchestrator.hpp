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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "augsearch/ars_core.hpp"
#include "augsearch/evaluators.hpp"

namespace augsearch {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitEvaluatorFailure = 3,
  kExitPartial = 4,
};

inline constexpr const char* kManifestFormat = "augsearch.manifest/1";
inline constexpr const char* kHistoryFormat = "augsearch.history/1";
inline constexpr const char* kArtifactRootEnv = "AUGSEARCH_ARTIFACT_ROOT";

std::string_view version_string();

/// Everything needed to start one run. This is the config file format: the
/// SearchConfig keys plus the keys below, all at the top level.
struct RunSpec {
  SearchConfig search;
  EvaluatorSpec evaluator;
  std::size_t workers = 1;
  std::uint64_t target_seed = 0;
  std::size_t checkpoint_stride = 1;
  /// Optional magnitude range file; empty means the built-in table.
  std::string ranges_file;

  /// Validates everything; throws std::invalid_argument.
  void validate() const;
};

nlohmann::ordered_json run_spec_to_json(const RunSpec& spec);
/// Keys present in `json` override `base`. Throws ParseError on unknown keys
/// or wrong types.
RunSpec run_spec_from_json(const nlohmann::json& json, RunSpec base = {});

/// Strict parse of a manifest document. Throws ParseError.
RunSpec run_spec_from_manifest(const nlohmann::json& manifest);

struct SearchCommand {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::filesystem::path> manifest_file;
  /// Applied over the file contents, same keys as the config file.
  nlohmann::json overrides = nlohmann::json::object();
  /// Run directory. Defaults to $AUGSEARCH_ARTIFACT_ROOT/run_<seed>, with
  /// "runs" as the root when the variable is unset.
  std::optional<std::filesystem::path> out_dir;
};

/// Runs one search and writes, under the run directory:
///   manifest.json       written at start, finalized at the end
///   checkpoints/        checkpoint_<iteration>.json
///   history.json        every evaluated candidate, best first
///   best_policy.json    canonical policy of the best candidate
/// Returns kExitConfigError for unreadable/invalid configs and
/// kExitEvaluatorFailure when the evaluator could not start or the run
/// aborted (partial artifacts are still written).
int cmd_search(const SearchCommand& cmd, std::ostream& out, std::ostream& err);

struct SweepCommand {
  std::filesystem::path config_file;
  std::size_t runs = 1;
  std::uint64_t master_seed = 0;
  std::optional<std::filesystem::path> out_dir;
  /// The augsearch binary used to launch child runs.
  std::filesystem::path executable;
};

/// `runs` distinct seeds drawn uniformly from [0, 1000) by `master_seed`.
std::vector<std::uint64_t> sweep_seeds(std::uint64_t master_seed, std::size_t runs);

/// Launches one child `search` process per seed, then writes sweep.csv with
/// columns run_seed,status,best_reward,iterations. Failed runs are recorded
/// and the sweep continues.
int cmd_sweep(const SweepCommand& cmd, std::ostream& out, std::ostream& err);

struct FinalizeCommand {
  /// A run directory or any directory containing run directories.
  std::filesystem::path history_dir;
  std::size_t k = 5;
  std::optional<std::filesystem::path> out_file;
  std::optional<std::filesystem::path> report_file;
  std::string ranges_file;
};

/// Concatenates the k best distinct policies found in every history.json
/// below history_dir. Writes the canonical policy (default
/// <history_dir>/final_policy.json) and a text report with a probability
/// histogram. Returns kExitPartial when fewer than k distinct policies exist.
int cmd_finalize(const FinalizeCommand& cmd, std::ostream& out, std::ostream& err);

/// Probability histogram over ten equal bins of [0, 1].
std::array<std::size_t, 10> probability_histogram(const Policy& policy);
std::string finalize_report(const Policy& policy, std::size_t distinct_used, std::size_t k,
                            const std::vector<double>& rewards);

struct DecodeCommand {
  std::filesystem::path vector_file;  // "-" reads stdin
  bool pre_sigmoid = false;
  std::optional<std::filesystem::path> out_file;
  std::string ranges_file;
};

/// Reads a JSON array of 30 numbers (or {"vector": [...]}) and writes the
/// canonical policy. With pre_sigmoid the numbers are parameters and pass
/// through the sigmoid first.
int cmd_decode(const DecodeCommand& cmd, std::istream& in, std::ostream& out, std::ostream& err);

struct AugmentApplyCommand {
  std::filesystem::path policy_file;
  std::filesystem::path image_file;
  std::uint64_t seed = 0;
  std::filesystem::path out_file;
  std::optional<std::filesystem::path> pair_image;
};
int cmd_augment_apply(const AugmentApplyCommand& cmd, std::ostream& out, std::ostream& err);

struct AugmentSheetCommand {
  std::filesystem::path policy_file;
  std::filesystem::path image_file;
  int rows = 3;
  int cols = 4;
  std::uint64_t seed = 0;
  std::filesystem::path out_file;
  std::optional<std::filesystem::path> pair_image;
};
int cmd_augment_sheet(const AugmentSheetCommand& cmd, std::ostream& out, std::ostream& err);

}  // namespace augsearch
