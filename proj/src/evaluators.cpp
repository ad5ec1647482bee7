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

#include "augsearch/evaluators.hpp"

#include <cmath>
#include <exception>
#include <stdexcept>

#include "augsearch/rng.hpp"
#include "augsearch/worker_pool.hpp"

namespace augsearch {
namespace {

void check_dim(std::span<const double> v) {
  if (v.size() != kVectorDim) {
    throw std::invalid_argument("reward input must have " + std::to_string(kVectorDim) +
                                " coordinates, got " + std::to_string(v.size()));
  }
}

}  // namespace

std::vector<EvalOutcome> RewardEvaluator::evaluate_batch(std::span<const EvalTask> tasks) {
  std::vector<EvalOutcome> outcomes(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      outcomes[i].reward = evaluate(tasks[i].policy, tasks[i].vector, tasks[i].seed);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  }
  return outcomes;
}

SyntheticTarget make_random_target(std::uint64_t seed) {
  Rng rng(seed);
  SyntheticTarget t;
  for (double& x : t.target) {
    do {
      x = rng.uniform01();
    } while (x == 0.0);
  }
  return t;
}

double target_matching_reward(std::span<const double> v, const SyntheticTarget& target) {
  check_dim(v);
  double sum = 0.0;
  for (std::size_t i = 0; i < kVectorDim; ++i) {
    sum += std::abs(v[i] - target.target[i]);
  }
  return -sum;
}

double sphere_reward(std::span<const double> v) {
  check_dim(v);
  double sum = 0.0;
  for (double x : v) {
    sum += (x - 0.5) * (x - 0.5);
  }
  return -sum;
}

double TargetMatchingEvaluator::evaluate(const Policy&, const ParameterVector& vector,
                                         std::uint64_t) {
  return target_matching_reward(vector, target_);
}

double SphereEvaluator::evaluate(const Policy&, const ParameterVector& vector, std::uint64_t) {
  return sphere_reward(vector);
}

EvaluatorSpec parse_evaluator_spec(const std::string& text) {
  if (text == "synthetic:target") {
    return {EvaluatorSpec::Kind::kTarget, {}};
  }
  if (text == "synthetic:sphere") {
    return {EvaluatorSpec::Kind::kSphere, {}};
  }
  constexpr std::string_view kExternal = "external:";
  if (text.starts_with(kExternal)) {
    std::string command = text.substr(kExternal.size());
    if (command.size() >= 2 && command.front() == '"' && command.back() == '"') {
      command = command.substr(1, command.size() - 2);
    }
    if (command.empty()) {
      throw ParseError("evaluator \"" + text + "\": empty external command");
    }
    return {EvaluatorSpec::Kind::kExternal, command};
  }
  throw ParseError("unknown evaluator \"" + text +
                   "\" (expected synthetic:target, synthetic:sphere or external:<cmd>)");
}

std::string to_string(const EvaluatorSpec& spec) {
  switch (spec.kind) {
    case EvaluatorSpec::Kind::kTarget:
      return "synthetic:target";
    case EvaluatorSpec::Kind::kSphere:
      return "synthetic:sphere";
    case EvaluatorSpec::Kind::kExternal:
      return "external:" + spec.command;
  }
  return {};
}

std::unique_ptr<RewardEvaluator> make_evaluator(const EvaluatorSpec& spec,
                                                std::uint64_t target_seed, std::size_t workers) {
  switch (spec.kind) {
    case EvaluatorSpec::Kind::kTarget:
      return std::make_unique<TargetMatchingEvaluator>(make_random_target(target_seed));
    case EvaluatorSpec::Kind::kSphere:
      return std::make_unique<SphereEvaluator>();
    case EvaluatorSpec::Kind::kExternal:
      return spawn_external(spec.command, workers);
  }
  throw std::invalid_argument("unknown evaluator kind");
}

}  // namespace augsearch
