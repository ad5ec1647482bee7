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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "augsearch/types.hpp"

namespace augsearch {

/// The 16 operation kinds. The numeric value is the bucket a decoded
/// type coordinate falls into; the order is frozen.
enum class OperationKind : int {
  kShearX = 0,
  kShearY,
  kTranslateX,
  kTranslateY,
  kRotate,
  kAutoContrast,
  kInvert,
  kEqualize,
  kSolarize,
  kPosterize,
  kContrast,
  kColor,
  kBrightness,
  kSharpness,
  kCutout,
  kSamplePairing,
};

inline constexpr std::size_t kNumOperationKinds = 16;
inline constexpr std::size_t kSubPoliciesPerPolicy = 5;
inline constexpr std::size_t kFinalSubPolicies = 25;

std::string_view kind_name(OperationKind kind);
/// Inverse of kind_name; std::nullopt for unknown names.
std::optional<OperationKind> kind_from_name(std::string_view name);
OperationKind kind_from_index(int index);

struct MagnitudeRange {
  double min = 0.0;
  double max = 0.0;
  std::string unit;
  /// False for AutoContrast, Invert and Equalize (unit "none").
  bool has_magnitude = true;
};

/// Per-kind magnitude ranges.
class MagnitudeRangeTable {
 public:
  /// Ranges shipped in data/magnitude_ranges.json (compiled in).
  static const MagnitudeRangeTable& builtin();

  /// Parses the range file format: a JSON object keyed by kind name, keys in
  /// canonical kind order, each value {"min", "max", "unit"}. Unit "none"
  /// marks a kind without magnitude. Throws ParseError.
  static MagnitudeRangeTable from_json_text(std::string_view text);
  static MagnitudeRangeTable load(const std::filesystem::path& path);

  const MagnitudeRange& operator[](OperationKind kind) const {
    return ranges_[static_cast<std::size_t>(kind)];
  }

 private:
  std::array<MagnitudeRange, kNumOperationKinds> ranges_{};
};

struct OperationSpec {
  OperationKind kind = OperationKind::kShearX;
  double probability = 0.0;
  double magnitude = 0.0;

  friend bool operator==(const OperationSpec&, const OperationSpec&) = default;
};

/// Two operations applied in order: first, then second.
struct SubPolicy {
  OperationSpec first;
  OperationSpec second;

  friend bool operator==(const SubPolicy&, const SubPolicy&) = default;
};

/// Five sub-policies while searching, twenty-five after concatenation.
struct Policy {
  std::vector<SubPolicy> sub_policies;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Decodes one (type, probability, magnitude) triple, each in [0, 1]:
/// kind = min(floor(16 a0), 15), probability = a1,
/// magnitude = a2 (max - min) + min, or 0 for kinds without magnitude.
/// Throws std::invalid_argument for a coordinate outside [0, 1].
OperationSpec decode_triple(std::span<const double, 3> a,
                            const MagnitudeRangeTable& ranges = MagnitudeRangeTable::builtin());

/// Splits a normalized vector into ten triples; triples 2i and 2i+1 form
/// sub-policy i. Throws std::invalid_argument for a wrong length or a
/// coordinate outside [0, 1].
Policy decode_policy(std::span<const double> v,
                     const MagnitudeRangeTable& ranges = MagnitudeRangeTable::builtin());

/// Rounds probabilities and magnitudes to two decimals, the storage
/// precision of policy files.
Policy quantize(const Policy& policy);

/// Canonical policy file text. Field order is fixed, p and magnitude are
/// printed with exactly two decimals. Byte-stable for equal inputs.
std::string serialize_policy(const Policy& policy);

/// Parses a policy file. Accepts 5 or 25 sub-policies, plus multiples of five
/// below 25 written by a partial concatenation. Validates kind names,
/// probabilities and magnitude ranges. Throws ParseError naming the line and
/// column (syntax) or the JSON path (structure) of the problem.
Policy parse_policy(std::string_view text,
                    const MagnitudeRangeTable& ranges = MagnitudeRangeTable::builtin());

/// Structured form of the canonical file, for embedding in other documents.
nlohmann::ordered_json policy_to_json(const Policy& policy);

struct ScoredPolicy {
  double reward = 0.0;
  Policy policy;
};

struct ConcatResult {
  Policy policy;
  std::size_t distinct_used = 0;
  /// True when fewer than k distinct policies were available.
  bool partial = false;
};

/// Concatenates the sub-policies of the k best distinct policies in reward
/// order (highest first, ties keep input order). Policies whose canonical
/// serialization matches an earlier one are skipped.
ConcatResult concat_top_policies(std::span<const ScoredPolicy> history, std::size_t k = 5);

}  // namespace augsearch
