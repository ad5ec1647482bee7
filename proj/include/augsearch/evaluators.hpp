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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "augsearch/policy_codec.hpp"
#include "augsearch/types.hpp"

namespace augsearch {

/// One reward request: the normalized vector, its decoded policy and the
/// seed the evaluator must use for any randomness.
struct EvalTask {
  ParameterVector vector{};
  Policy policy;
  std::uint64_t seed = 0;
};

/// Either a reward or an error message.
struct EvalOutcome {
  std::optional<double> reward;
  std::string error;

  bool ok() const { return reward.has_value(); }
};

/// Scores candidate policies. Higher rewards are better.
class RewardEvaluator {
 public:
  virtual ~RewardEvaluator() = default;

  /// Throws EvaluatorError (or anything derived from std::exception) on failure.
  virtual double evaluate(const Policy& policy, const ParameterVector& vector,
                          std::uint64_t eval_seed) = 0;

  /// Scores a batch; outcome i belongs to task i. The default runs
  /// `evaluate` sequentially and turns exceptions into error outcomes.
  virtual std::vector<EvalOutcome> evaluate_batch(std::span<const EvalTask> tasks);

  virtual std::string describe() const = 0;
};

struct SyntheticTarget {
  ParameterVector target{};
};

/// Target with coordinates uniform on the open interval (0, 1).
SyntheticTarget make_random_target(std::uint64_t seed);

/// -sum |v_i - t_i|; the maximum 0 is reached at v = t.
double target_matching_reward(std::span<const double> v, const SyntheticTarget& target);

/// -sum (v_i - 0.5)^2; the maximum 0 is reached at v = 0.5.
double sphere_reward(std::span<const double> v);

class TargetMatchingEvaluator : public RewardEvaluator {
 public:
  explicit TargetMatchingEvaluator(SyntheticTarget target) : target_(target) {}

  double evaluate(const Policy& policy, const ParameterVector& vector,
                  std::uint64_t eval_seed) override;
  std::string describe() const override { return "synthetic:target"; }

  const SyntheticTarget& target() const { return target_; }

 private:
  SyntheticTarget target_;
};

class SphereEvaluator : public RewardEvaluator {
 public:
  double evaluate(const Policy& policy, const ParameterVector& vector,
                  std::uint64_t eval_seed) override;
  std::string describe() const override { return "synthetic:sphere"; }
};

struct EvaluatorSpec {
  enum class Kind { kTarget, kSphere, kExternal };
  Kind kind = Kind::kTarget;
  std::string command;  // external only
};

/// Parses "synthetic:target", "synthetic:sphere" or "external:<command>".
/// Throws ParseError.
EvaluatorSpec parse_evaluator_spec(const std::string& text);
std::string to_string(const EvaluatorSpec& spec);

/// Builds the evaluator named by `spec`. `target_seed` seeds the synthetic
/// target; `workers` sizes an external pool.
std::unique_ptr<RewardEvaluator> make_evaluator(const EvaluatorSpec& spec,
                                                std::uint64_t target_seed, std::size_t workers);

}  // namespace augsearch
