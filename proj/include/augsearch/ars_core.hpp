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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "augsearch/evaluators.hpp"
#include "augsearch/noise_table.hpp"
#include "augsearch/policy_codec.hpp"
#include "augsearch/types.hpp"

namespace augsearch {

struct SearchConfig {
  double step_size = 0.02;          // alpha
  std::size_t num_directions = 8;   // N
  double noise_std = 0.03;          // nu
  std::size_t top_directions = 4;   // b
  std::size_t max_iterations = 300;
  std::uint64_t run_seed = 0;       // in [0, 1000)
  std::uint64_t table_seed = 0;
  std::size_t table_size = kDefaultTableSize;
  /// Stop when the best reward has not improved for this many iterations.
  /// Zero disables the check.
  std::size_t plateau_window = 0;
  /// Stop once the best reward reaches this value.
  std::optional<double> reward_threshold;

  /// Throws std::invalid_argument. `allow_zero_noise` admits nu = 0 for tests.
  void validate(bool allow_zero_noise = false) const;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

enum class Sign { kPlus, kMinus };

/// One evaluated candidate.
struct RewardRecord {
  std::size_t iteration = 0;
  std::size_t direction_index = 0;
  DirectionHandle direction;
  Sign sign = Sign::kPlus;
  ParameterVector normalized_vector{};
  double reward = 0.0;

  friend bool operator==(const RewardRecord&, const RewardRecord&) = default;
};

enum class EventKind {
  kSigmaZeroSkip,    // all 2b rewards equal, update skipped
  kRetry,            // evaluation failed once, retried with a fresh seed
  kDirectionDropped  // evaluation failed twice, direction pair left out
};

std::string_view event_name(EventKind kind);

struct RunEvent {
  std::size_t iteration = 0;
  EventKind kind = EventKind::kSigmaZeroSkip;
  std::size_t direction_index = 0;
  std::string detail;

  friend bool operator==(const RunEvent&, const RunEvent&) = default;
};

struct SearchState {
  ParameterVector params{};  // M_j, pre-sigmoid
  std::size_t iteration = 0; // completed update steps
  HandleSampler sampler;
  std::uint64_t handles_issued = 0;
  std::vector<RewardRecord> history;
  std::vector<RunEvent> events;
  double best_reward = -std::numeric_limits<double>::infinity();
  /// Running maximum of the reward after each iteration.
  std::vector<double> best_trajectory;

  friend bool operator==(const SearchState&, const SearchState&) = default;
};

/// M = 0, j = 0, empty history. Handle sampler seeded from the run seed.
SearchState init_state(const SearchConfig& config);

/// Element-wise 1 / (1 + exp(-x)). Throws std::invalid_argument for a
/// non-finite coordinate.
ParameterVector sigmoid(const ParameterVector& x);

struct Perturbation {
  DirectionHandle handle;
  ParameterVector plus{};   // sigmoid(M + nu delta)
  ParameterVector minus{};  // sigmoid(M - nu delta)
};

/// Draws N directions from the table and returns both normalized
/// perturbations of each. Advances the state's handle sampler.
std::vector<Perturbation> propose_perturbations(SearchState& state, const SearchConfig& config,
                                                const NoiseTable& table);

/// Rewards observed for one direction. Both signs must be present.
struct DirectionRewards {
  std::size_t direction_index = 0;
  DirectionHandle handle;
  std::optional<double> plus;
  std::optional<double> minus;
};

/// Direction indices sorted by max(r+, r-) descending; ties go to the lower
/// direction index. Throws ProtocolError when a reward is missing.
std::vector<std::size_t> rank_directions(std::span<const DirectionRewards> rewards);

struct RankedDirection {
  DirectionHandle handle;
  double plus = 0.0;
  double minus = 0.0;
};

/// One ARS step over the top-b directions:
///   M += alpha / (b sigma_R) * sum_k (r+_k - r-_k) delta_k,  j += 1
/// where sigma_R is the population standard deviation of the 2b rewards.
/// When all 2b rewards are equal the step is skipped (M unchanged, j still
/// advances) and a kSigmaZeroSkip event is appended.
/// Throws std::invalid_argument if top.size() != b and EvaluatorError for a
/// non-finite reward.
SearchState update_step(const SearchState& state, const SearchConfig& config,
                        std::span<const RankedDirection> top, const NoiseTable& table);

/// Seed handed to the evaluator for one candidate. `attempt` is 0 for the
/// first evaluation and 1 for the retry.
std::uint64_t derive_eval_seed(std::uint64_t run_seed, std::size_t iteration,
                               std::size_t direction, Sign sign, unsigned attempt);

enum class StopReason { kMaxIterations, kRewardThreshold, kPlateau, kAborted };
std::string_view stop_reason_name(StopReason reason);

struct RunOptions {
  /// Writes checkpoint_<iteration>.json here when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t checkpoint_stride = 1;
  /// Called after every completed iteration.
  std::function<void(const SearchState&)> on_iteration;
  /// Reused instead of building a new table when it matches the config.
  const NoiseTable* table = nullptr;
  /// Ranges used to decode candidates; the built-in table when null.
  const MagnitudeRangeTable* ranges = nullptr;
};

struct SearchResult {
  SearchState state;
  StopReason stop_reason = StopReason::kMaxIterations;
  std::string abort_reason;
  /// Every successful evaluation, highest reward first (stable).
  std::vector<RewardRecord> ranked_history;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the search loop until max_iterations, the reward threshold or a
/// plateau. A failed evaluation is retried once with a fresh seed; a pair
/// still failing is dropped for that iteration and b shrinks if fewer than b
/// pairs survive. An iteration with no surviving pair, or an evaluator that
/// throws, ends the run with StopReason::kAborted and partial results.
SearchResult run_search(const SearchConfig& config, RewardEvaluator& evaluator,
                        const RunOptions& options = {});

/// Shortest round-trip decimal text of a double, and its inverse.
std::string format_exact(double x);
double parse_exact(const std::string& text);

}  // namespace augsearch
