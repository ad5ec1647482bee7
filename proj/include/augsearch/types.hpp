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

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace augsearch {

/// Length of the searched parameter vector: 5 sub-policies x 2 operations x
/// (kind, probability, magnitude).
inline constexpr std::size_t kVectorDim = 30;

using ParameterVector = std::array<double, kVectorDim>;

/// Malformed text input (policy files, configs, checkpoints). The message
/// carries the location of the problem.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A reward evaluator could not produce a reward.
class EvaluatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A worker broke the stdio wire protocol.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested image operation cannot run in the current context.
class UnsupportedOperation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace augsearch
