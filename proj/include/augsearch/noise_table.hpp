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
#include <memory>
#include <span>
#include <vector>

#include "augsearch/rng.hpp"
#include "augsearch/types.hpp"

namespace augsearch {

inline constexpr std::size_t kDefaultTableSize = std::size_t{1} << 22;

/// Location of one perturbation direction inside a NoiseTable.
struct DirectionHandle {
  std::size_t offset = 0;
  std::size_t dim = kVectorDim;

  friend bool operator==(const DirectionHandle&, const DirectionHandle&) = default;
};

/// Shared pool of i.i.d. standard normal entries.
///
/// Entries come from std::mt19937_64 seeded with `seed`, turned into normals
/// pairwise with Box-Muller (see Rng::normal_pair). The generator and the
/// transform are part of the file-format contract: a run manifest stores only
/// (seed, size) and every reader rebuilds the identical table.
///
/// The table is immutable after construction. Copies share the same storage,
/// so handing a table to many workers costs nothing.
class NoiseTable {
 public:
  /// Throws std::invalid_argument when size is 0.
  NoiseTable(std::uint64_t seed, std::size_t size);

  /// Table holding exactly `entries`, for hand-built directions. seed() is 0.
  /// Throws std::invalid_argument when `entries` is empty.
  static NoiseTable from_entries(std::vector<double> entries);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return entries_->size(); }
  std::span<const double> entries() const noexcept { return *entries_; }

  /// Returns the `handle.dim` consecutive entries starting at `handle.offset`.
  /// Throws std::out_of_range if the slice does not fit.
  std::span<const double> slice(const DirectionHandle& handle) const;

 private:
  NoiseTable() = default;

  std::uint64_t seed_ = 0;
  std::shared_ptr<const std::vector<double>> entries_;
};

NoiseTable build_table(std::uint64_t seed, std::size_t size);

/// Copies the 30 entries addressed by `handle`. Throws std::out_of_range for
/// an out-of-bounds handle and std::invalid_argument if handle.dim != 30.
ParameterVector slice_direction(const NoiseTable& table, const DirectionHandle& handle);

/// Issues direction handles with offsets uniform over every valid start
/// position. Slices may overlap; entries are i.i.d. so overlap is harmless.
class HandleSampler {
 public:
  HandleSampler() : HandleSampler(0, kDefaultTableSize) {}
  HandleSampler(std::uint64_t seed, std::size_t table_size, std::size_t dim = kVectorDim);

  DirectionHandle next();

  friend bool operator==(const HandleSampler&, const HandleSampler&) = default;

 private:
  Rng rng_;
  std::size_t positions_;
  std::size_t dim_;
};

}  // namespace augsearch
