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
/// Label assignment for square anchors against oriented ground truths.
///
/// Three strategies share one anchor grid:
///  - fixed-threshold MaxIoU,
///  - adaptive mean+std thresholds over center-distance candidates (ATSS-style),
///  - the same adaptive threshold scaled by a shape weight that drops with
///    aspect ratio and with angular distance from 0 / pi/2 (metric-aligned).
///
/// Conflicts between ground truths resolve to the highest IoU, ties to the
/// lowest ground-truth index. Every ground truth with a candidate of IoU > 0
/// receives at least one positive through the low-quality fallback.

#ifndef OBBKIT__ASSIGNMENT_HPP_
#define OBBKIT__ASSIGNMENT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"

namespace obbkit
{

struct AnchorLevel
{
  double stride{0.0};
  std::size_t width{0};
  std::size_t height{0};
  double anchor_size{0.0};
  /// Index of this level's first anchor in AnchorGrid::anchors.
  std::size_t offset{0};

  std::size_t size() const {return width * height;}
};

/// One square, axis-aligned anchor per feature cell, level-major then
/// row-major within a level.
struct AnchorGrid
{
  std::vector<AnchorLevel> levels;
  std::vector<OrientedBox> anchors;

  std::size_t size() const {return anchors.size();}
};

inline AnchorGrid generate_anchors(
  double image_width, double image_height, std::span<const double> strides,
  double scale_multiplier)
{
  if (strides.empty()) {
    throw InvalidConfig("generate_anchors: no strides given");
  }
  if (!(image_width > 0.0) || !(image_height > 0.0)) {
    throw InvalidConfig("generate_anchors: image size must be positive");
  }
  if (!(scale_multiplier > 0.0)) {
    throw InvalidConfig("generate_anchors: scale multiplier must be positive");
  }
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (!(strides[i] > 0.0) || (i > 0 && strides[i] <= strides[i - 1])) {
      throw InvalidConfig("generate_anchors: strides must be positive and ascending");
    }
  }
  AnchorGrid grid;
  for (const double s : strides) {
    AnchorLevel level;
    level.stride = s;
    level.width = static_cast<std::size_t>(std::ceil(image_width / s));
    level.height = static_cast<std::size_t>(std::ceil(image_height / s));
    level.anchor_size = s * scale_multiplier;
    level.offset = grid.anchors.size();
    for (std::size_t y = 0; y < level.height; ++y) {
      for (std::size_t x = 0; x < level.width; ++x) {
        grid.anchors.push_back(
          {(static_cast<double>(x) + 0.5) * s, (static_cast<double>(y) + 0.5) * s,
            level.anchor_size, level.anchor_size, 0.0});
      }
    }
    grid.levels.push_back(level);
  }
  return grid;
}

/// Calls fn(anchor_index) for every anchor whose circumcircle reaches the
/// circumcircle of `box`, i.e. every anchor that can have IoU > 0 with it.
template<class Fn>
void for_each_anchor_near(const AnchorGrid & grid, const OrientedBox & box, Fn && fn)
{
  const double box_radius = 0.5 * std::hypot(box.w, box.h);
  for (const AnchorLevel & level : grid.levels) {
    const double reach = box_radius + level.anchor_size * std::numbers::sqrt2 / 2.0;
    const auto lo = [&](double c) {
        return static_cast<std::int64_t>(std::ceil((c - reach) / level.stride - 0.5));
      };
    const auto hi = [&](double c) {
        return static_cast<std::int64_t>(std::floor((c + reach) / level.stride - 0.5));
      };
    const std::int64_t x0 = std::max<std::int64_t>(0, lo(box.cx));
    const std::int64_t x1 =
      std::min<std::int64_t>(static_cast<std::int64_t>(level.width) - 1, hi(box.cx));
    const std::int64_t y0 = std::max<std::int64_t>(0, lo(box.cy));
    const std::int64_t y1 =
      std::min<std::int64_t>(static_cast<std::int64_t>(level.height) - 1, hi(box.cy));
    for (std::int64_t y = y0; y <= y1; ++y) {
      for (std::int64_t x = x0; x <= x1; ++x) {
        fn(level.offset + static_cast<std::size_t>(y) * level.width + static_cast<std::size_t>(x));
      }
    }
  }
}

struct GroundTruth
{
  OrientedBox box;
  int class_id{0};
  /// w / h of the normalized box.
  double aspect{1.0};
  /// theta of the normalized box.
  double angle{0.0};
};

inline GroundTruth make_ground_truth(const OrientedBox & box, int class_id = 0)
{
  GroundTruth gt;
  gt.box = normalize_obb(box);
  gt.class_id = class_id;
  gt.aspect = aspect_ratio(gt.box);
  gt.angle = gt.box.theta;
  return gt;
}

enum class LambdaMode
{
  angle_dependent,
  constant_one,
};

struct MasConfig
{
  double gamma{5.0};
  LambdaMode lambda_mode{LambdaMode::angle_dependent};
  std::size_t candidate_k{9};
  double clamp_min{0.05};
  double clamp_max{0.95};
  bool use_center_prior{true};
  /// Debug: use the signed angle weight instead of its magnitude.
  bool raw_lambda{false};

  void validate() const
  {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw InvalidConfig("mas: gamma must be a positive finite number");
    }
    if (candidate_k < 1) {
      throw InvalidConfig("mas: candidate_k must be >= 1");
    }
    if (!(clamp_min >= 0.0 && clamp_min < clamp_max && clamp_max <= 1.0)) {
      throw InvalidConfig("mas: threshold clamp must satisfy 0 <= min < max <= 1");
    }
  }
};

struct AtssConfig
{
  std::size_t candidate_k{9};
  double clamp_min{0.05};
  double clamp_max{0.95};
  bool use_center_prior{true};
};

struct MaxIouConfig
{
  double pos_thr{0.5};
  double neg_thr{0.4};

  void validate() const
  {
    if (!(0.0 <= neg_thr && neg_thr <= pos_thr && pos_thr <= 1.0)) {
      throw InvalidConfig("maxiou: require 0 <= neg_thr <= pos_thr <= 1");
    }
  }
};

enum class LabelKind : std::uint8_t
{
  negative,
  ignore,
  positive,
};

struct AnchorLabel
{
  LabelKind kind{LabelKind::negative};
  /// Matched ground truth for positives, -1 otherwise.
  int gt{-1};

  friend constexpr bool operator==(const AnchorLabel &, const AnchorLabel &) = default;
};

struct GtAssignment
{
  /// IoU threshold applied to this ground truth's candidates (after clamping).
  double threshold{0.0};
  std::size_t positive_count{0};
  /// True when no anchor passed the threshold and the best anchor was forced.
  bool fallback_used{false};
};

struct AssignmentResult
{
  std::vector<AnchorLabel> labels;
  std::vector<GtAssignment> per_gt;

  std::size_t count(LabelKind kind) const
  {
    return static_cast<std::size_t>(
      std::count_if(
        labels.begin(), labels.end(), [kind](const AnchorLabel & l) {return l.kind == kind;}));
  }
};

// ---------------------------------------------------------------------------
// Shape weighting

/// Signed angle weight, literal piecewise form:
///   -1/2 - sin^2(-theta)        on [-pi/4, pi/4)
///    1/2 + sin^2(theta - pi/2)  on [pi/4, 3pi/4)
/// theta is first reduced modulo pi into [-pi/4, 3pi/4).
inline double angle_weight(double theta)
{
  if (!std::isfinite(theta)) {
    throw InvalidInput("angle_weight: non-finite angle");
  }
  const double t = wrap_long_edge_angle(theta);
  if (t < kPi / 4.0) {
    const double s = std::sin(-t);
    return -0.5 - s * s;
  }
  const double s = std::sin(t - kPi / 2.0);
  return 0.5 + s * s;
}

/// f = Co * exp(-(aspect / gamma) * |lambda|) with Co = exp(1.5 / gamma),
/// evaluated as a single exponential so that f == 1 exactly when
/// aspect * |lambda| == 1.5.
inline double shape_weight(
  double aspect, double theta, double gamma,
  LambdaMode mode = LambdaMode::angle_dependent, bool raw_lambda = false)
{
  if (!(gamma > 0.0)) {
    throw InvalidInput("shape_weight: gamma must be positive");
  }
  double lambda = 1.0;
  if (mode == LambdaMode::angle_dependent) {
    const double signed_lambda = angle_weight(theta);
    lambda = raw_lambda ? signed_lambda : std::abs(signed_lambda);
  }
  return std::exp((1.5 - aspect * lambda) / gamma);
}

// ---------------------------------------------------------------------------
// Adaptive threshold pieces

/// Per level, the k anchors closest to the box center (ties to the lower
/// anchor index). Result is grouped by level, nearest first.
inline std::vector<std::size_t> select_candidates(
  const AnchorGrid & grid, const OrientedBox & box, std::size_t k)
{
  if (k < 1) {
    throw InvalidConfig("select_candidates: k must be >= 1");
  }
  std::vector<std::size_t> out;
  std::vector<std::pair<double, std::size_t>> dist;
  for (const AnchorLevel & level : grid.levels) {
    dist.clear();
    dist.reserve(level.size());
    for (std::size_t i = level.offset; i < level.offset + level.size(); ++i) {
      const OrientedBox & a = grid.anchors[i];
      const double dx = a.cx - box.cx;
      const double dy = a.cy - box.cy;
      dist.emplace_back(dx * dx + dy * dy, i);
    }
    const std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    for (std::size_t j = 0; j < take; ++j) {
      out.push_back(dist[j].second);
    }
  }
  return out;
}

struct IouStats
{
  double mean{0.0};
  /// Population standard deviation (divides by N).
  double stddev{0.0};
  /// mean + stddev
  double init_threshold{0.0};
};

inline IouStats iou_statistics(std::span<const double> ious)
{
  if (ious.empty()) {
    throw NoCandidates("iou_statistics: empty candidate list");
  }
  const double n = static_cast<double>(ious.size());
  const double mean = std::accumulate(ious.begin(), ious.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : ious) {
    ss += (v - mean) * (v - mean);
  }
  IouStats st;
  st.mean = mean;
  st.stddev = std::sqrt(ss / n);
  st.init_threshold = st.mean + st.stddev;
  return st;
}

struct ThresholdDetail
{
  double weight{1.0};
  double init{0.0};
  /// weight * init, before clamping.
  double raw{0.0};
  double clamped{0.0};
};

inline ThresholdDetail mas_threshold_detail(
  const GroundTruth & gt, std::span<const double> candidate_ious, const MasConfig & cfg)
{
  const IouStats st = iou_statistics(candidate_ious);
  ThresholdDetail d;
  d.weight = shape_weight(gt.aspect, gt.angle, cfg.gamma, cfg.lambda_mode, cfg.raw_lambda);
  d.init = st.init_threshold;
  d.raw = d.weight * d.init;
  d.clamped = std::clamp(d.raw, cfg.clamp_min, cfg.clamp_max);
  return d;
}

inline double mas_threshold(
  const GroundTruth & gt, std::span<const double> candidate_ious, const MasConfig & cfg)
{
  return mas_threshold_detail(gt, candidate_ious, cfg).clamped;
}

// ---------------------------------------------------------------------------
// Assigners

namespace detail
{

struct Claim
{
  int gt{-1};
  double iou{-1.0};
};

/// For each ground truth with zero positives, force its best candidate
/// (highest IoU > 0, ties to the lower anchor index). Anchors held by a
/// ground truth that would drop to zero positives are not taken.
inline void apply_fallback(
  std::span<const std::vector<std::size_t>> candidates,
  std::span<const std::vector<double>> candidate_ious,
  std::vector<Claim> & owner, std::vector<GtAssignment> & per_gt)
{
  for (std::size_t g = 0; g < per_gt.size(); ++g) {
    if (per_gt[g].positive_count > 0) {
      continue;
    }
    std::vector<std::size_t> order(candidates[g].size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(
      order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ia = candidate_ious[g][a];
        const double ib = candidate_ious[g][b];
        if (ia != ib) {
          return ia > ib;
        }
        return candidates[g][a] < candidates[g][b];
      });
    for (const std::size_t j : order) {
      const double iou = candidate_ious[g][j];
      if (!(iou > 0.0)) {
        break;
      }
      const std::size_t anchor = candidates[g][j];
      const int prev = owner[anchor].gt;
      if (prev >= 0 && per_gt[static_cast<std::size_t>(prev)].positive_count < 2) {
        continue;
      }
      if (prev >= 0) {
        --per_gt[static_cast<std::size_t>(prev)].positive_count;
      }
      owner[anchor] = {static_cast<int>(g), iou};
      per_gt[g].positive_count = 1;
      per_gt[g].fallback_used = true;
      break;
    }
  }
}

inline AssignmentResult labels_from_owner(
  const std::vector<Claim> & owner, std::vector<GtAssignment> per_gt)
{
  AssignmentResult res;
  res.labels.resize(owner.size());
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i].gt >= 0) {
      res.labels[i] = {LabelKind::positive, owner[i].gt};
    }
  }
  res.per_gt = std::move(per_gt);
  return res;
}

}  // namespace detail

struct AdaptiveParams
{
  std::size_t candidate_k{9};
  double clamp_min{0.05};
  double clamp_max{0.95};
  bool use_center_prior{true};
};

/// Adaptive-threshold assignment with a per-ground-truth weight on the
/// mean+std threshold. `weight(const GroundTruth&)` returns the factor.
/// Candidates need IoU > 0 and IoU >= threshold (and the anchor center
/// inside the ground truth when the center prior is on).
template<class WeightFn>
AssignmentResult assign_adaptive(
  const AnchorGrid & grid, std::span<const GroundTruth> gts, const AdaptiveParams & params,
  WeightFn && weight)
{
  const std::size_t n_gt = gts.size();
  std::vector<detail::Claim> owner(grid.size());
  std::vector<GtAssignment> per_gt(n_gt);
  std::vector<std::vector<std::size_t>> candidates(n_gt);
  std::vector<std::vector<double>> candidate_ious(n_gt);

  for (std::size_t g = 0; g < n_gt; ++g) {
    const GroundTruth & gt = gts[g];
    candidates[g] = select_candidates(grid, gt.box, params.candidate_k);
    candidate_ious[g].reserve(candidates[g].size());
    for (const std::size_t a : candidates[g]) {
      candidate_ious[g].push_back(rotated_iou(grid.anchors[a], gt.box));
    }
    const IouStats st = iou_statistics(candidate_ious[g]);
    const double thr =
      std::clamp(weight(gt) * st.init_threshold, params.clamp_min, params.clamp_max);
    per_gt[g].threshold = thr;

    const ConvexQuad poly = obb_to_polygon(gt.box);
    for (std::size_t j = 0; j < candidates[g].size(); ++j) {
      const double iou = candidate_ious[g][j];
      if (!(iou > 0.0) || iou < thr) {
        continue;
      }
      const std::size_t a = candidates[g][j];
      if (params.use_center_prior &&
        !point_in_convex(poly.vertices, {grid.anchors[a].cx, grid.anchors[a].cy}))
      {
        continue;
      }
      if (iou > owner[a].iou) {
        owner[a] = {static_cast<int>(g), iou};
      }
    }
  }
  for (const detail::Claim & c : owner) {
    if (c.gt >= 0) {
      ++per_gt[static_cast<std::size_t>(c.gt)].positive_count;
    }
  }
  detail::apply_fallback(candidates, candidate_ious, owner, per_gt);
  return detail::labels_from_owner(owner, std::move(per_gt));
}

inline AssignmentResult assign_mas(
  const AnchorGrid & grid, std::span<const GroundTruth> gts, const MasConfig & cfg)
{
  cfg.validate();
  const AdaptiveParams params{cfg.candidate_k, cfg.clamp_min, cfg.clamp_max, cfg.use_center_prior};
  return assign_adaptive(
    grid, gts, params, [&cfg](const GroundTruth & gt) {
      return shape_weight(gt.aspect, gt.angle, cfg.gamma, cfg.lambda_mode, cfg.raw_lambda);
    });
}

inline AssignmentResult assign_atss(
  const AnchorGrid & grid, std::span<const GroundTruth> gts, const AtssConfig & cfg = {})
{
  if (cfg.candidate_k < 1) {
    throw InvalidConfig("atss: candidate_k must be >= 1");
  }
  const AdaptiveParams params{cfg.candidate_k, cfg.clamp_min, cfg.clamp_max, cfg.use_center_prior};
  return assign_adaptive(grid, gts, params, [](const GroundTruth &) {return 1.0;});
}

/// Fixed-threshold assignment. The best anchor of each ground truth (IoU > 0)
/// is forced positive; an anchor that is the best of several ground truths
/// goes to the one with the highest IoU on it.
inline AssignmentResult assign_maxiou(
  const AnchorGrid & grid, std::span<const GroundTruth> gts, const MaxIouConfig & cfg = {})
{
  cfg.validate();
  const std::size_t n_gt = gts.size();
  std::vector<detail::Claim> best(grid.size());
  std::vector<detail::Claim> gt_best_anchor(n_gt);  // .gt holds the anchor index here
  std::vector<std::vector<std::size_t>> overlapping(n_gt);
  std::vector<std::vector<double>> overlap_ious(n_gt);
  for (std::size_t g = 0; g < n_gt; ++g) {
    const OrientedBox & box = gts[g].box;
    for_each_anchor_near(
      grid, box, [&](std::size_t a) {
        const double iou = rotated_iou(grid.anchors[a], box);
        if (iou > best[a].iou) {
          best[a] = {static_cast<int>(g), iou};
        }
        if (!(iou > 0.0)) {
          return;
        }
        overlapping[g].push_back(a);
        overlap_ious[g].push_back(iou);
        detail::Claim & gb = gt_best_anchor[g];
        if (iou > gb.iou || (iou == gb.iou && static_cast<int>(a) < gb.gt)) {
          gb = {static_cast<int>(a), iou};
        }
      });
  }

  std::vector<detail::Claim> owner(grid.size());
  std::vector<LabelKind> kind(grid.size(), LabelKind::negative);
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const double iou = std::max(0.0, best[a].iou);
    if (best[a].gt >= 0 && iou >= cfg.pos_thr && iou > 0.0) {
      owner[a] = best[a];
    } else if (iou >= cfg.neg_thr) {
      kind[a] = LabelKind::ignore;
    }
  }
  std::vector<std::size_t> qualified(n_gt, 0);
  for (const detail::Claim & c : owner) {
    if (c.gt >= 0) {
      ++qualified[static_cast<std::size_t>(c.gt)];
    }
  }

  // Forced claims are resolved per anchor before writing, so the outcome does
  // not depend on ground-truth order.
  std::vector<detail::Claim> forced(grid.size());
  for (std::size_t g = 0; g < n_gt; ++g) {
    const detail::Claim & gb = gt_best_anchor[g];
    if (!(gb.iou > 0.0)) {
      continue;
    }
    const auto a = static_cast<std::size_t>(gb.gt);
    if (gb.iou > forced[a].iou) {
      forced[a] = {static_cast<int>(g), gb.iou};
    }
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    if (forced[a].gt >= 0) {
      owner[a] = forced[a];
    }
  }

  std::vector<GtAssignment> per_gt(n_gt);
  for (const detail::Claim & c : owner) {
    if (c.gt >= 0) {
      ++per_gt[static_cast<std::size_t>(c.gt)].positive_count;
    }
  }
  // A gt whose best anchor went to a stronger claim falls back to its next
  // best overlapping anchor.
  detail::apply_fallback(overlapping, overlap_ious, owner, per_gt);
  for (std::size_t g = 0; g < n_gt; ++g) {
    per_gt[g].threshold = cfg.pos_thr;
    per_gt[g].fallback_used = qualified[g] == 0 && gt_best_anchor[g].iou > 0.0;
  }

  AssignmentResult res = detail::labels_from_owner(owner, std::move(per_gt));
  for (std::size_t a = 0; a < grid.size(); ++a) {
    if (res.labels[a].kind != LabelKind::positive) {
      res.labels[a].kind = kind[a];
    }
  }
  return res;
}

}  // namespace obbkit

#endif  // OBBKIT__ASSIGNMENT_HPP_
