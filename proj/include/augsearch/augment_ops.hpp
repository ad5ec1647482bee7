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
#include <functional>
#include <optional>

#include "augsearch/image.hpp"
#include "augsearch/policy_codec.hpp"
#include "augsearch/rng.hpp"

namespace augsearch {

/// Fill color for pixels exposed by geometric ops and for cutout boxes.
inline constexpr std::uint8_t kFillGray = 128;

/// Seeds every random choice made while augmenting one image: which
/// sub-policy is picked, whether each operation fires, cutout placement.
struct ApplySeed {
  std::uint64_t value = 0;
};

struct AugmentContext {
  /// Second image for SamplePairing. Must match the input dimensions.
  const Image* pair_image = nullptr;
};

/// Runs the transform of `op.kind` at `op.magnitude` unconditionally.
///
/// Magnitude semantics:
///   ShearX/Y     shear factor about the image center
///   TranslateX/Y fraction of width/height, positive moves content right/down
///   Rotate       degrees, positive is counter-clockwise
///   Solarize     pixels >= threshold are inverted (256 is the identity)
///   Posterize    bits kept, rounded to an integer in [1, 8]
///   Contrast, Color, Brightness, Sharpness
///                enhancement factor; 1.0 is the identity
///   Cutout       side of a gray square as a fraction of the shorter side
///   SamplePairing blend weight of the pair image
/// Geometric ops resample bilinearly and fill exposed pixels with kFillGray.
/// `rng` is consumed only by Cutout (box center).
Image transform_image(const Image& img, const OperationSpec& op, Rng& rng,
                      const AugmentContext& ctx = {});

/// Draws u ~ U[0, 1) from `rng`; if u < op.probability runs the transform.
/// Throws UnsupportedOperation when SamplePairing fires with no pair image.
Image apply_operation(const Image& img, const OperationSpec& op, Rng& rng,
                      const AugmentContext& ctx = {});
Image apply_operation(const Image& img, const OperationSpec& op, ApplySeed seed,
                      const AugmentContext& ctx = {});

/// First operation, then second, sharing one random stream.
Image apply_subpolicy(const Image& img, const SubPolicy& sp, Rng& rng,
                      const AugmentContext& ctx = {});
Image apply_subpolicy(const Image& img, const SubPolicy& sp, ApplySeed seed,
                      const AugmentContext& ctx = {});

struct PolicyApplication {
  Image image;
  std::size_t sub_policy_index = 0;
};

/// Picks one sub-policy uniformly from the seeded stream, then applies it
/// with the same stream. The policy must hold 5 or 25 sub-policies.
PolicyApplication apply_policy_minibatch_style(const Image& img, const Policy& policy,
                                               ApplySeed seed, const AugmentContext& ctx = {});

/// Gray square of side round(fraction * min(w, h)) centered at a uniformly
/// drawn pixel, clipped to the image.
Image cutout(const Image& img, double fraction, Rng& rng);

/// Grid of rows x cols independent applications of `policy`. Cell i uses
/// seed mix_seed({base_seed, i}). Under each tile a strip shows the index of
/// the sub-policy that was drawn.
Image render_contact_sheet(const Image& img, const Policy& policy, int rows, int cols,
                           std::uint64_t base_seed, const AugmentContext& ctx = {});

/// Geometry of render_contact_sheet output, for callers that crop tiles.
struct ContactSheetLayout {
  static constexpr int kPad = 2;
  static constexpr int kLabelHeight = 14;
  int tile_x(int col, int tile_width) const { return kPad + col * (tile_width + kPad); }
  int tile_y(int row, int tile_height) const {
    return kPad + row * (tile_height + kLabelHeight + kPad);
  }
};

/// Three-stage training-time pipeline: caller-supplied baseline, then the
/// searched policy, then cutout. Stages that are unset are skipped.
struct AugmentPipeline {
  std::function<Image(const Image&, Rng&)> baseline;
  std::optional<Policy> policy;
  double cutout_fraction = 0.0;
  AugmentContext context;

  Image run(const Image& img, ApplySeed seed) const;
};

}  // namespace augsearch
