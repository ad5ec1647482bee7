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

#include "augsearch/augment_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace augsearch {
namespace {

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Resampling closer than this to a pixel center reads the pixel itself, so
// exact rotations by multiples of 90 degrees stay lossless.
constexpr double kSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

// Inverse-maps every output pixel through `source_of` and samples the input
// bilinearly. Pixels that map outside the input get kFillGray.
template <typename Map>
Image resample(const Image& img, Map source_of) {
  Image out(img.width, img.height);
  const double max_x = img.width - 1;
  const double max_y = img.height - 1;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      sx = snap(sx);
      sy = snap(sy);
      if (!(sx >= 0.0 && sx <= max_x && sy >= 0.0 && sy <= max_y)) {
        for (int c = 0; c < 3; ++c) {
          out.at(x, y, c) = kFillGray;
        }
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = clamp_round((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

template <typename Fn>
Image map_values(const Image& img, Fn fn) {
  Image out = img;
  for (auto& v : out.pixels) {
    v = fn(v);
  }
  return out;
}

// ITU-R 601-2 luma, integer form.
std::uint8_t luma(const Image& img, int x, int y) {
  const int r = img.at(x, y, 0);
  const int g = img.at(x, y, 1);
  const int b = img.at(x, y, 2);
  return static_cast<std::uint8_t>((r * 299 + g * 587 + b * 114 + 500) / 1000);
}

// out = degenerate + factor * (img - degenerate)
Image blend(const Image& degenerate, const Image& img, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double d = degenerate.pixels[i];
    out.pixels[i] = clamp_round(d + factor * (img.pixels[i] - d));
  }
  return out;
}

Image grayscale(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto l = luma(img, x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = l;
      }
    }
  }
  return out;
}

Image contrast(const Image& img, double factor) {
  double sum = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      sum += luma(img, x, y);
    }
  }
  const auto mean = static_cast<std::uint8_t>(
      std::floor(sum / (static_cast<double>(img.width) * img.height) + 0.5));
  return blend(Image(img.width, img.height, mean), img, factor);
}

// 3x3 smoothing kernel [1 1 1; 1 5 1; 1 1 1] / 13; border pixels unchanged.
Image sharpness(const Image& img, double factor) {
  Image smooth = img;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        int acc = 4 * img.at(x, y, c);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            acc += img.at(x + dx, y + dy, c);
          }
        }
        smooth.at(x, y, c) = static_cast<std::uint8_t>((acc + 6) / 13);
      }
    }
  }
  return blend(smooth, img, factor);
}

// Per-channel stretch of [min, max] to [0, 255].
Image autocontrast(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    int lo = 255;
    int hi = 0;
    for (std::size_t i = c; i < img.pixels.size(); i += 3) {
      lo = std::min<int>(lo, img.pixels[i]);
      hi = std::max<int>(hi, img.pixels[i]);
    }
    if (hi <= lo) {
      continue;
    }
    for (std::size_t i = c; i < img.pixels.size(); i += 3) {
      const long v = std::lround(255.0 * (img.pixels[i] - lo) / (hi - lo));
      out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
  return out;
}

// Per-channel histogram equalization with the same lookup-table
// construction as PIL's ImageOps.equalize.
Image equalize(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    std::array<long, 256> hist{};
    for (std::size_t i = c; i < img.pixels.size(); i += 3) {
      ++hist[img.pixels[i]];
    }
    long total = 0;
    long last_nonzero = 0;
    int nonzero_bins = 0;
    for (long h : hist) {
      if (h != 0) {
        total += h;
        last_nonzero = h;
        ++nonzero_bins;
      }
    }
    if (nonzero_bins <= 1) {
      continue;
    }
    const long step = (total - last_nonzero) / 255;
    if (step == 0) {
      continue;
    }
    std::array<std::uint8_t, 256> lut{};
    long n = step / 2;
    for (int i = 0; i < 256; ++i) {
      lut[i] = static_cast<std::uint8_t>(std::min(n / step, 255L));
      n += hist[i];
    }
    for (std::size_t i = c; i < img.pixels.size(); i += 3) {
      out.pixels[i] = lut[img.pixels[i]];
    }
  }
  return out;
}

Image sample_pairing(const Image& img, double weight, const AugmentContext& ctx) {
  if (ctx.pair_image == nullptr) {
    throw UnsupportedOperation("SamplePairing needs a pair image source");
  }
  const Image& pair = *ctx.pair_image;
  if (pair.width != img.width || pair.height != img.height) {
    throw std::invalid_argument("SamplePairing pair image has different dimensions");
  }
  Image out = img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = clamp_round((1.0 - weight) * img.pixels[i] + weight * pair.pixels[i]);
  }
  return out;
}

void validate(const OperationSpec& op) {
  if (!(op.probability >= 0.0 && op.probability <= 1.0)) {
    throw std::invalid_argument("operation probability outside [0, 1]");
  }
  if (!std::isfinite(op.magnitude)) {
    throw std::invalid_argument("operation magnitude is not finite");
  }
}

void check_policy_length(const Policy& policy) {
  const auto n = policy.sub_policies.size();
  if (n != kSubPoliciesPerPolicy && n != kFinalSubPolicies) {
    throw std::invalid_argument("policy must hold 5 or 25 sub-policies, got " +
                                std::to_string(n));
  }
}

}  // namespace

Image transform_image(const Image& img, const OperationSpec& op, Rng& rng,
                      const AugmentContext& ctx) {
  const double m = op.magnitude;
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  switch (op.kind) {
    case OperationKind::kShearX:
      return resample(img, [&](double x, double y) { return std::pair{x + m * (y - cy), y}; });
    case OperationKind::kShearY:
      return resample(img, [&](double x, double y) { return std::pair{x, y + m * (x - cx)}; });
    case OperationKind::kTranslateX: {
      const double shift = m * img.width;
      return resample(img, [&](double x, double y) { return std::pair{x - shift, y}; });
    }
    case OperationKind::kTranslateY: {
      const double shift = m * img.height;
      return resample(img, [&](double x, double y) { return std::pair{x, y - shift}; });
    }
    case OperationKind::kRotate: {
      const double theta = m * std::numbers::pi / 180.0;
      const double cos_t = std::cos(theta);
      const double sin_t = std::sin(theta);
      // Counter-clockwise on screen, where y grows downward.
      return resample(img, [&](double x, double y) {
        const double dx = x - cx;
        const double dy = y - cy;
        return std::pair{cx + dx * cos_t - dy * sin_t, cy + dx * sin_t + dy * cos_t};
      });
    }
    case OperationKind::kAutoContrast:
      return autocontrast(img);
    case OperationKind::kInvert:
      return map_values(img, [](std::uint8_t v) { return static_cast<std::uint8_t>(255 - v); });
    case OperationKind::kEqualize:
      return equalize(img);
    case OperationKind::kSolarize:
      return map_values(img, [m](std::uint8_t v) {
        return v >= m ? static_cast<std::uint8_t>(255 - v) : v;
      });
    case OperationKind::kPosterize: {
      const int bits = static_cast<int>(std::clamp(std::lround(m), 1L, 8L));
      const auto mask = static_cast<std::uint8_t>(0xFF << (8 - bits));
      return map_values(img, [mask](std::uint8_t v) { return static_cast<std::uint8_t>(v & mask); });
    }
    case OperationKind::kContrast:
      return contrast(img, m);
    case OperationKind::kColor:
      return blend(grayscale(img), img, m);
    case OperationKind::kBrightness:
      return blend(Image(img.width, img.height, 0), img, m);
    case OperationKind::kSharpness:
      return sharpness(img, m);
    case OperationKind::kCutout:
      return cutout(img, m, rng);
    case OperationKind::kSamplePairing:
      return sample_pairing(img, m, ctx);
  }
  throw std::invalid_argument("unknown operation kind");
}

Image cutout(const Image& img, double fraction, Rng& rng) {
  const int center_x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(img.width)));
  const int center_y = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(img.height)));
  const int side = static_cast<int>(std::lround(fraction * std::min(img.width, img.height)));
  Image out = img;
  if (side <= 0) {
    return out;
  }
  const int x_begin = std::max(center_x - side / 2, 0);
  const int y_begin = std::max(center_y - side / 2, 0);
  const int x_end = std::min(center_x - side / 2 + side, img.width);
  const int y_end = std::min(center_y - side / 2 + side, img.height);
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = x_begin; x < x_end; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = kFillGray;
      }
    }
  }
  return out;
}

Image apply_operation(const Image& img, const OperationSpec& op, Rng& rng,
                      const AugmentContext& ctx) {
  validate(op);
  const double u = rng.uniform01();
  if (u < op.probability) {
    return transform_image(img, op, rng, ctx);
  }
  return img;
}

Image apply_operation(const Image& img, const OperationSpec& op, ApplySeed seed,
                      const AugmentContext& ctx) {
  Rng rng(seed.value);
  return apply_operation(img, op, rng, ctx);
}

Image apply_subpolicy(const Image& img, const SubPolicy& sp, Rng& rng,
                      const AugmentContext& ctx) {
  Image once = apply_operation(img, sp.first, rng, ctx);
  return apply_operation(once, sp.second, rng, ctx);
}

Image apply_subpolicy(const Image& img, const SubPolicy& sp, ApplySeed seed,
                      const AugmentContext& ctx) {
  Rng rng(seed.value);
  return apply_subpolicy(img, sp, rng, ctx);
}

PolicyApplication apply_policy_minibatch_style(const Image& img, const Policy& policy,
                                               ApplySeed seed, const AugmentContext& ctx) {
  check_policy_length(policy);
  Rng rng(seed.value);
  PolicyApplication result;
  result.sub_policy_index = rng.uniform_index(policy.sub_policies.size());
  result.image = apply_subpolicy(img, policy.sub_policies[result.sub_policy_index], rng, ctx);
  return result;
}

namespace {

// 3x5 digit glyphs, one row per 3-bit group, most significant bit leftmost.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

void draw_number(Image& sheet, int left, int top, std::size_t value, int max_width) {
  const std::string text = std::to_string(value);
  constexpr int kScale = 2;
  int pen = left;
  for (char ch : text) {
    const auto& glyph = kDigits[static_cast<std::size_t>(ch - '0')];
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (((glyph[row] >> (2 - col)) & 1) == 0) {
          continue;
        }
        for (int sy = 0; sy < kScale; ++sy) {
          for (int sx = 0; sx < kScale; ++sx) {
            const int x = pen + col * kScale + sx;
            const int y = top + row * kScale + sy;
            if (x < left + max_width && x < sheet.width && y < sheet.height) {
              for (int c = 0; c < 3; ++c) {
                sheet.at(x, y, c) = 255;
              }
            }
          }
        }
      }
    }
    pen += 4 * kScale;
  }
}

}  // namespace

Image render_contact_sheet(const Image& img, const Policy& policy, int rows, int cols,
                           std::uint64_t base_seed, const AugmentContext& ctx) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("contact sheet needs at least one row and one column");
  }
  check_policy_length(policy);
  const ContactSheetLayout layout;
  constexpr int kPad = ContactSheetLayout::kPad;
  const int sheet_w = kPad + cols * (img.width + kPad);
  const int sheet_h = kPad + rows * (img.height + ContactSheetLayout::kLabelHeight + kPad);
  Image sheet(sheet_w, sheet_h, 32);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto cell = static_cast<std::uint64_t>(r * cols + c);
      const auto applied =
          apply_policy_minibatch_style(img, policy, ApplySeed{mix_seed({base_seed, cell})}, ctx);
      const int left = layout.tile_x(c, img.width);
      const int top = layout.tile_y(r, img.height);
      for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            sheet.at(left + x, top + y, ch) = applied.image.at(x, y, ch);
          }
        }
      }
      draw_number(sheet, left + 1, top + img.height + 2, applied.sub_policy_index, img.width);
    }
  }
  return sheet;
}

Image AugmentPipeline::run(const Image& img, ApplySeed seed) const {
  Image out = img;
  if (baseline) {
    Rng rng(mix_seed({seed.value, 0}));
    out = baseline(out, rng);
  }
  if (policy) {
    out = apply_policy_minibatch_style(out, *policy, ApplySeed{mix_seed({seed.value, 1})}, context)
              .image;
  }
  if (cutout_fraction > 0.0) {
    Rng rng(mix_seed({seed.value, 2}));
    out = cutout(out, cutout_fraction, rng);
  }
  return out;
}

}  // namespace augsearch
