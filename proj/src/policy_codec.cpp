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

#include "augsearch/policy_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "builtin_ranges.inc"

namespace augsearch {
namespace {

constexpr std::array<std::string_view, kNumOperationKinds> kKindNames = {
    "ShearX",   "ShearY",   "TranslateX", "TranslateY", "Rotate",     "AutoContrast",
    "Invert",   "Equalize", "Solarize",   "Posterize",  "Contrast",   "Color",
    "Brightness", "Sharpness", "Cutout",  "SamplePairing",
};

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }  // false for NaN

std::string format_2dp(double x) {
  double q = std::round(x * 100.0) / 100.0;
  if (q == 0.0) {
    q = 0.0;  // drop the sign of -0
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", q);
  return buf;
}

std::string location_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

[[noreturn]] void structure_error(const std::string& path, const std::string& what) {
  throw ParseError("policy parse error at " + path + ": " + what);
}

double read_number(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    structure_error(path, std::string("missing field \"") + key + "\"");
  }
  if (!it->is_number()) {
    structure_error(path + "." + key, "expected a number");
  }
  return it->get<double>();
}

OperationSpec read_operation(const nlohmann::json& obj, const std::string& path,
                             const MagnitudeRangeTable& ranges) {
  if (!obj.is_object()) {
    structure_error(path, "expected an object");
  }
  const auto kind_it = obj.find("kind");
  if (kind_it == obj.end() || !kind_it->is_string()) {
    structure_error(path + ".kind", "expected an operation name");
  }
  const auto kind = kind_from_name(kind_it->get<std::string>());
  if (!kind) {
    structure_error(path + ".kind", "unknown operation \"" + kind_it->get<std::string>() + "\"");
  }
  OperationSpec op;
  op.kind = *kind;
  op.probability = read_number(obj, "p", path);
  op.magnitude = read_number(obj, "magnitude", path);
  if (!in_unit_interval(op.probability)) {
    structure_error(path + ".p", "probability outside [0, 1]");
  }
  const auto& range = ranges[op.kind];
  if (!(op.magnitude >= range.min && op.magnitude <= range.max)) {
    structure_error(path + ".magnitude", "magnitude " + format_2dp(op.magnitude) +
                                             " outside [" + format_2dp(range.min) + ", " +
                                             format_2dp(range.max) + "] for " +
                                             std::string(kind_name(op.kind)));
  }
  return op;
}

void append_operation(std::string& out, const char* key, const OperationSpec& op) {
  out += '"';
  out += key;
  out += "\": {\"kind\": \"";
  out += kind_name(op.kind);
  out += "\", \"p\": ";
  out += format_2dp(op.probability);
  out += ", \"magnitude\": ";
  out += format_2dp(op.magnitude);
  out += '}';
}

}  // namespace

std::string_view kind_name(OperationKind kind) {
  const auto index = static_cast<std::size_t>(kind);
  if (index >= kNumOperationKinds) {
    throw std::invalid_argument("invalid operation kind " + std::to_string(index));
  }
  return kKindNames[index];
}

std::optional<OperationKind> kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumOperationKinds; ++i) {
    if (kKindNames[i] == name) {
      return static_cast<OperationKind>(i);
    }
  }
  return std::nullopt;
}

OperationKind kind_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumOperationKinds)) {
    throw std::invalid_argument("operation kind index " + std::to_string(index) +
                                " outside [0, 16)");
  }
  return static_cast<OperationKind>(index);
}

const MagnitudeRangeTable& MagnitudeRangeTable::builtin() {
  static const MagnitudeRangeTable table = from_json_text(kBuiltinRangesJson);
  return table;
}

MagnitudeRangeTable MagnitudeRangeTable::from_json_text(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("magnitude range file: " + location_of(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object() || doc.size() != kNumOperationKinds) {
    throw ParseError("magnitude range file: expected an object with 16 operation kinds");
  }
  MagnitudeRangeTable table;
  std::size_t index = 0;
  for (const auto& [name, value] : doc.items()) {
    if (name != kKindNames[index]) {
      throw ParseError("magnitude range file: key " + std::to_string(index) + " is \"" + name +
                       "\", expected \"" + std::string(kKindNames[index]) + "\"");
    }
    if (!value.is_object() || !value.contains("min") || !value.contains("max") ||
        !value.contains("unit") || !value["min"].is_number() || !value["max"].is_number() ||
        !value["unit"].is_string()) {
      throw ParseError("magnitude range file: " + name + " needs numeric min, max and a unit");
    }
    MagnitudeRange& r = table.ranges_[index];
    r.min = value["min"].get<double>();
    r.max = value["max"].get<double>();
    r.unit = value["unit"].get<std::string>();
    r.has_magnitude = r.unit != "none";
    if (!(r.min <= r.max)) {
      throw ParseError("magnitude range file: " + name + " has min > max");
    }
    ++index;
  }
  return table;
}

MagnitudeRangeTable MagnitudeRangeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open magnitude range file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

OperationSpec decode_triple(std::span<const double, 3> a, const MagnitudeRangeTable& ranges) {
  for (double x : a) {
    if (!in_unit_interval(x)) {
      throw std::invalid_argument("decode_triple: coordinate outside [0, 1]");
    }
  }
  // a[0] == 1.0 lands in bucket 16; clamp into the last bucket.
  const int bucket = std::min(static_cast<int>(std::floor(a[0] * 16.0)), 15);
  OperationSpec op;
  op.kind = kind_from_index(bucket);
  op.probability = a[1];
  const auto& range = ranges[op.kind];
  op.magnitude = range.has_magnitude ? a[2] * (range.max - range.min) + range.min : 0.0;
  return op;
}

Policy decode_policy(std::span<const double> v, const MagnitudeRangeTable& ranges) {
  if (v.size() != kVectorDim) {
    throw std::invalid_argument("decode_policy: expected " + std::to_string(kVectorDim) +
                                " coordinates, got " + std::to_string(v.size()));
  }
  Policy policy;
  policy.sub_policies.reserve(kSubPoliciesPerPolicy);
  for (std::size_t i = 0; i < kSubPoliciesPerPolicy; ++i) {
    SubPolicy sp;
    sp.first = decode_triple(v.subspan(6 * i).first<3>(), ranges);
    sp.second = decode_triple(v.subspan(6 * i + 3).first<3>(), ranges);
    policy.sub_policies.push_back(sp);
  }
  return policy;
}

Policy quantize(const Policy& policy) {
  auto q = [](double x) {
    const double r = std::round(x * 100.0) / 100.0;
    return r == 0.0 ? 0.0 : r;
  };
  Policy out = policy;
  for (auto& sp : out.sub_policies) {
    for (OperationSpec* op : {&sp.first, &sp.second}) {
      op->probability = q(op->probability);
      op->magnitude = q(op->magnitude);
    }
  }
  return out;
}

std::string serialize_policy(const Policy& policy) {
  std::string out = "{\n  \"sub_policies\": [";
  for (std::size_t i = 0; i < policy.sub_policies.size(); ++i) {
    out += i == 0 ? "\n    {" : ",\n    {";
    append_operation(out, "op1", policy.sub_policies[i].first);
    out += ", ";
    append_operation(out, "op2", policy.sub_policies[i].second);
    out += '}';
  }
  out += policy.sub_policies.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

Policy parse_policy(std::string_view text, const MagnitudeRangeTable& ranges) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("policy parse error at " + location_of(text, e.byte) + ": malformed JSON");
  }
  if (!doc.is_object()) {
    structure_error("<root>", "expected an object");
  }
  const auto list_it = doc.find("sub_policies");
  if (list_it == doc.end() || !list_it->is_array()) {
    structure_error("sub_policies", "expected an array");
  }
  const std::size_t n = list_it->size();
  if (n == 0 || n > kFinalSubPolicies || n % kSubPoliciesPerPolicy != 0) {
    structure_error("sub_policies",
                    "expected 5 or 25 sub-policies, got " + std::to_string(n));
  }
  Policy policy;
  policy.sub_policies.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& entry = (*list_it)[i];
    const std::string path = "sub_policies[" + std::to_string(i) + "]";
    if (!entry.is_object()) {
      structure_error(path, "expected an object");
    }
    if (!entry.contains("op1") || !entry.contains("op2")) {
      structure_error(path, "expected fields \"op1\" and \"op2\"");
    }
    SubPolicy sp;
    sp.first = read_operation(entry["op1"], path + ".op1", ranges);
    sp.second = read_operation(entry["op2"], path + ".op2", ranges);
    policy.sub_policies.push_back(sp);
  }
  return policy;
}

nlohmann::ordered_json policy_to_json(const Policy& policy) {
  return nlohmann::ordered_json::parse(serialize_policy(policy));
}

ConcatResult concat_top_policies(std::span<const ScoredPolicy> history, std::size_t k) {
  std::vector<const ScoredPolicy*> order;
  order.reserve(history.size());
  for (const auto& entry : history) {
    order.push_back(&entry);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const ScoredPolicy* a, const ScoredPolicy* b) { return a->reward > b->reward; });

  ConcatResult result;
  std::unordered_set<std::string> seen;
  for (const ScoredPolicy* entry : order) {
    if (result.distinct_used == k) {
      break;
    }
    if (!seen.insert(serialize_policy(entry->policy)).second) {
      continue;
    }
    result.policy.sub_policies.insert(result.policy.sub_policies.end(),
                                      entry->policy.sub_policies.begin(),
                                      entry->policy.sub_policies.end());
    ++result.distinct_used;
  }
  result.partial = result.distinct_used < k;
  return result;
}

}  // namespace augsearch
