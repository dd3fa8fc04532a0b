// Copyright 2026 The obbkit Authors
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

/// \file
/// Box-guided deformable sampling geometry.
///
/// A box is shrunk about its center, nine points are taken on the shrunk box
/// (center, corners, edge midpoints), each point is displaced by a normalized
/// offset scaled with the original box size, and the displaced points are
/// turned into per-tap offsets of a 3x3 deformable kernel anchored at a
/// feature cell. Offsets are inputs here; nothing is learned.

#ifndef OBBKIT__SAMPLING_HPP_
#define OBBKIT__SAMPLING_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"

namespace obbkit
{

inline constexpr std::size_t kPatternSize = 9;

using PatternPoints = std::array<Point2, kPatternSize>;

/// Local sign pattern (sx, sy) of each pattern point: the point sits at
/// (sx * w/2, sy * h/2) in the box frame. Order: center, corners CCW from
/// (+,+), edge midpoints CCW from the +w/2 edge.
inline constexpr std::array<std::array<int, 2>, kPatternSize> kPatternSigns{{
  {0, 0},
  {1, 1}, {-1, 1}, {-1, -1}, {1, -1},
  {1, 0}, {0, 1}, {-1, 0}, {0, -1},
}};

/// Row-major 3x3 kernel tap index for a local sign pattern.
constexpr std::size_t tap_index(int rx, int ry)
{
  return static_cast<std::size_t>((ry + 1) * 3 + (rx + 1));
}

/// Regular-grid offset of a row-major tap.
constexpr std::array<int, 2> tap_offset(std::size_t tap)
{
  return {static_cast<int>(tap % 3) - 1, static_cast<int>(tap / 3) - 1};
}

struct OffsetPair
{
  double dx{0.0};
  double dy{0.0};
};

struct SamplingPattern
{
  PatternPoints initial_points{};
  PatternPoints refined_points{};
  OrientedBox source_box;
};

/// Offsets in feature cells, indexed by row-major kernel tap.
struct DcnOffsetField
{
  std::array<Point2, kPatternSize> offsets{};
  Point2 anchor_cell;
  double stride{1.0};
};

/// Scales both edges by (1 - factor) about the center.
inline OrientedBox shrink_obb(const OrientedBox & box, double factor)
{
  if (!(factor >= 0.0 && factor < 1.0)) {
    throw InvalidConfig("shrink_obb: factor must lie in [0, 1)");
  }
  OrientedBox out = box;
  out.w = box.w * (1.0 - factor);
  out.h = box.h * (1.0 - factor);
  return out;
}

inline PatternPoints initial_sampling_positions(const OrientedBox & box)
{
  const double c = std::cos(box.theta);
  const double s = std::sin(box.theta);
  PatternPoints pts{};
  for (std::size_t i = 0; i < kPatternSize; ++i) {
    const double lx = kPatternSigns[i][0] * 0.5 * box.w;
    const double ly = kPatternSigns[i][1] * 0.5 * box.h;
    pts[i] = {box.cx + lx * c - ly * s, box.cy + lx * s + ly * c};
  }
  return pts;
}

/// p_r = (x + w * dx, y + h * dy) with w, h of the unshrunk box.
inline PatternPoints refine_positions(
  const PatternPoints & initial, const OrientedBox & box, std::span<const OffsetPair> offsets)
{
  if (offsets.size() != kPatternSize) {
    throw InvalidInput(
      "refine_positions: expected 9 offsets, got " + std::to_string(offsets.size()));
  }
  PatternPoints out{};
  for (std::size_t i = 0; i < kPatternSize; ++i) {
    if (!std::isfinite(offsets[i].dx) || !std::isfinite(offsets[i].dy)) {
      throw InvalidInput("refine_positions: non-finite offset");
    }
    out[i] = {initial[i].x + box.w * offsets[i].dx, initial[i].y + box.h * offsets[i].dy};
  }
  return out;
}

inline SamplingPattern make_sampling_pattern(
  const OrientedBox & box, double shrink_factor, std::span<const OffsetPair> offsets)
{
  SamplingPattern p;
  p.source_box = box;
  p.initial_points = initial_sampling_positions(shrink_obb(box, shrink_factor));
  p.refined_points = refine_positions(p.initial_points, box, offsets);
  return p;
}

/// o = p_r / stride - p0 - r for each pattern point and its kernel tap.
inline DcnOffsetField dcn_offset_field(
  const PatternPoints & refined, Point2 anchor_cell, double stride)
{
  if (!(stride > 0.0)) {
    throw InvalidConfig("dcn_offset_field: stride must be positive");
  }
  DcnOffsetField field;
  field.anchor_cell = anchor_cell;
  field.stride = stride;
  for (std::size_t i = 0; i < kPatternSize; ++i) {
    const int rx = kPatternSigns[i][0];
    const int ry = kPatternSigns[i][1];
    field.offsets[tap_index(rx, ry)] = {
      refined[i].x / stride - anchor_cell.x - rx,
      refined[i].y / stride - anchor_cell.y - ry};
  }
  return field;
}

/// Dense (y, x, channel) feature map, row-major.
class FeatureGrid
{
public:
  FeatureGrid() = default;

  FeatureGrid(std::size_t width, std::size_t height, std::size_t channels)
  : width_(width), height_(height), channels_(channels), values_(width * height * channels, 0.0)
  {}

  FeatureGrid(
    std::size_t width, std::size_t height, std::size_t channels, std::vector<double> values)
  : width_(width), height_(height), channels_(channels), values_(std::move(values))
  {
    if (values_.size() != width * height * channels) {
      throw InvalidInput(
        "FeatureGrid: expected " + std::to_string(width * height * channels) +
        " values, got " + std::to_string(values_.size()));
    }
    for (const double v : values_) {
      if (!std::isfinite(v)) {
        throw InvalidInput("FeatureGrid: non-finite value");
      }
    }
  }

  std::size_t width() const {return width_;}
  std::size_t height() const {return height_;}
  std::size_t channels() const {return channels_;}
  std::span<const double> values() const {return values_;}

  double at(std::size_t x, std::size_t y, std::size_t c) const
  {
    return values_[(y * width_ + x) * channels_ + c];
  }
  double & at(std::size_t x, std::size_t y, std::size_t c)
  {
    return values_[(y * width_ + x) * channels_ + c];
  }

  /// Zero outside the grid.
  double value_or_zero(long x, long y, std::size_t c) const
  {
    if (x < 0 || y < 0 || x >= static_cast<long>(width_) || y >= static_cast<long>(height_)) {
      return 0.0;
    }
    return at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c);
  }

private:
  std::size_t width_{0};
  std::size_t height_{0};
  std::size_t channels_{0};
  std::vector<double> values_;
};

/// Bilinear interpolation at fractional cell coordinates with zero padding.
inline double bilinear_sample(const FeatureGrid & grid, Point2 p, std::size_t channel)
{
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    return 0.0;
  }
  const double fx = std::floor(p.x);
  const double fy = std::floor(p.y);
  // Far outside: all four neighbours are padding.
  if (fx < -1.0 || fy < -1.0 || fx > static_cast<double>(grid.width()) ||
    fy > static_cast<double>(grid.height()))
  {
    return 0.0;
  }
  const long x0 = static_cast<long>(fx);
  const long y0 = static_cast<long>(fy);
  const double ax = p.x - fx;
  const double ay = p.y - fy;
  double v = 0.0;
  if (ax < 1.0 && ay < 1.0) {
    v += (1.0 - ax) * (1.0 - ay) * grid.value_or_zero(x0, y0, channel);
  }
  if (ax > 0.0) {
    v += ax * (1.0 - ay) * grid.value_or_zero(x0 + 1, y0, channel);
  }
  if (ay > 0.0) {
    v += (1.0 - ax) * ay * grid.value_or_zero(x0, y0 + 1, channel);
  }
  if (ax > 0.0 && ay > 0.0) {
    v += ax * ay * grid.value_or_zero(x0 + 1, y0 + 1, channel);
  }
  return v;
}

/// 3x3 kernel, indexed [tap][channel] with row-major taps.
class Kernel3x3
{
public:
  explicit Kernel3x3(std::size_t channels)
  : channels_(channels), weights_(kPatternSize * channels, 0.0) {}

  Kernel3x3(std::size_t channels, std::vector<double> weights)
  : channels_(channels), weights_(std::move(weights))
  {
    if (weights_.size() != kPatternSize * channels) {
      throw InvalidInput(
        "Kernel3x3: expected " + std::to_string(kPatternSize * channels) +
        " weights, got " + std::to_string(weights_.size()));
    }
  }

  /// Weight 1 at the center tap of every channel.
  static Kernel3x3 center_delta(std::size_t channels)
  {
    Kernel3x3 k(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      k.at(tap_index(0, 0), c) = 1.0;
    }
    return k;
  }

  std::size_t channels() const {return channels_;}
  double at(std::size_t tap, std::size_t c) const {return weights_[tap * channels_ + c];}
  double & at(std::size_t tap, std::size_t c) {return weights_[tap * channels_ + c];}

private:
  std::size_t channels_;
  std::vector<double> weights_;
};

/// Y(p0) = sum over taps r and channels c of W(r, c) * X(p0 + r + o_r, c).
inline double deformable_sample(
  const FeatureGrid & grid, const Kernel3x3 & weights, Point2 anchor_cell,
  const DcnOffsetField & field)
{
  if (weights.channels() != grid.channels()) {
    throw InvalidInput("deformable_sample: kernel/grid channel mismatch");
  }
  double acc = 0.0;
  for (std::size_t tap = 0; tap < kPatternSize; ++tap) {
    const auto r = tap_offset(tap);
    const Point2 p{
      anchor_cell.x + r[0] + field.offsets[tap].x,
      anchor_cell.y + r[1] + field.offsets[tap].y};
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      acc += weights.at(tap, c) * bilinear_sample(grid, p, c);
    }
  }
  return acc;
}

}  // namespace obbkit

#endif  // OBBKIT__SAMPLING_HPP_
