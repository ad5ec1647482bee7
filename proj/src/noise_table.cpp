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

#include "augsearch/noise_table.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace augsearch {

NoiseTable::NoiseTable(std::uint64_t seed, std::size_t size) : seed_(seed) {
  if (size == 0) {
    throw std::invalid_argument("noise table size must be positive");
  }
  auto entries = std::make_shared<std::vector<double>>(size);
  Rng rng(seed);
  auto& out = *entries;
  std::size_t i = 0;
  for (; i + 1 < size; i += 2) {
    rng.normal_pair(out[i], out[i + 1]);
  }
  if (i < size) {
    double spare = 0.0;
    rng.normal_pair(out[i], spare);
  }
  entries_ = std::move(entries);
}

NoiseTable NoiseTable::from_entries(std::vector<double> entries) {
  if (entries.empty()) {
    throw std::invalid_argument("noise table size must be positive");
  }
  NoiseTable table;
  table.entries_ = std::make_shared<const std::vector<double>>(std::move(entries));
  return table;
}

std::span<const double> NoiseTable::slice(const DirectionHandle& handle) const {
  if (handle.offset > size() || handle.dim > size() - handle.offset) {
    throw std::out_of_range("direction handle [" + std::to_string(handle.offset) + ", " +
                            std::to_string(handle.offset + handle.dim) +
                            ") exceeds noise table of size " + std::to_string(size()));
  }
  return entries().subspan(handle.offset, handle.dim);
}

NoiseTable build_table(std::uint64_t seed, std::size_t size) { return NoiseTable(seed, size); }

ParameterVector slice_direction(const NoiseTable& table, const DirectionHandle& handle) {
  if (handle.dim != kVectorDim) {
    throw std::invalid_argument("direction handle dim must be " + std::to_string(kVectorDim));
  }
  const auto view = table.slice(handle);
  ParameterVector out{};
  std::copy(view.begin(), view.end(), out.begin());
  return out;
}

HandleSampler::HandleSampler(std::uint64_t seed, std::size_t table_size, std::size_t dim)
    : rng_(seed), positions_(0), dim_(dim) {
  if (dim == 0 || table_size < dim) {
    throw std::invalid_argument("noise table of size " + std::to_string(table_size) +
                                " cannot hold a direction of dim " + std::to_string(dim));
  }
  positions_ = table_size - dim + 1;
}

DirectionHandle HandleSampler::next() { return {rng_.uniform_index(positions_), dim_}; }

}  // namespace augsearch
