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
/// Regression/classification loss numerics for a two-stage rotated head:
/// five-parameter delta coding, smooth L1 and focal loss with analytic
/// gradients, the scale-controlled beta update, and the two-head composition.

#ifndef OBBKIT__LOSSES_HPP_
#define OBBKIT__LOSSES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "obbkit/assignment.hpp"
#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"

namespace obbkit
{

/// Regression target between an anchor and a ground truth.
struct BoxDelta
{
  double dx{0.0};
  double dy{0.0};
  double dw{0.0};
  double dh{0.0};
  double dtheta{0.0};

  std::array<double, 5> as_array() const {return {dx, dy, dw, dh, dtheta};}
};

/// Wraps into (-pi/2, pi/2].
inline double wrap_half_pi(double a)
{
  double r = a - kPi * std::ceil((a - kPi / 2.0) / kPi);
  if (r <= -kPi / 2.0) {
    r += kPi;
  }
  return r;
}

inline BoxDelta box_deltas(const OrientedBox & anchor, const OrientedBox & gt)
{
  BoxDelta d;
  d.dx = (gt.cx - anchor.cx) / anchor.w;
  d.dy = (gt.cy - anchor.cy) / anchor.h;
  d.dw = std::log(gt.w / anchor.w);
  d.dh = std::log(gt.h / anchor.h);
  d.dtheta = wrap_half_pi(gt.theta - anchor.theta);
  return d;
}

/// Inverse of box_deltas; the result is normalized.
inline OrientedBox decode_deltas(const OrientedBox & anchor, const BoxDelta & d)
{
  return normalize_obb(
    {anchor.cx + d.dx * anchor.w, anchor.cy + d.dy * anchor.h, anchor.w * std::exp(d.dw),
      anchor.h * std::exp(d.dh), anchor.theta + d.dtheta});
}

// ---------------------------------------------------------------------------

inline double smooth_l1(double x, double beta)
{
  const double ax = std::abs(x);
  if (ax < beta) {
    return 0.5 * x * x / beta;
  }
  return ax - 0.5 * beta;
}

inline double smooth_l1_grad(double x, double beta)
{
  if (std::abs(x) < beta) {
    return x / beta;
  }
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

inline constexpr double kProbEps = 1e-12;

struct FocalParams
{
  double alpha{0.25};
  double gamma{2.0};
};

/// Binary focal loss on a probability; p is clamped to [eps, 1 - eps].
inline double focal_loss(double p, bool target, const FocalParams & fp = {})
{
  const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
  if (target) {
    return -fp.alpha * std::pow(1.0 - q, fp.gamma) * std::log(q);
  }
  return -(1.0 - fp.alpha) * std::pow(q, fp.gamma) * std::log(1.0 - q);
}

/// d focal_loss / dp inside the clamp range.
inline double focal_loss_grad(double p, bool target, const FocalParams & fp = {})
{
  const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
  const double g = fp.gamma;
  if (target) {
    const double dpow = g == 0.0 ? 0.0 : g * std::pow(1.0 - q, g - 1.0);
    return fp.alpha * (dpow * std::log(q) - std::pow(1.0 - q, g) / q);
  }
  const double dpow = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0);
  return -(1.0 - fp.alpha) * (dpow * std::log(1.0 - q) - std::pow(q, g) / (1.0 - q));
}

// ---------------------------------------------------------------------------
// Scale-controlled beta

/// min(sqrt(area_p / area_g), sqrt(area_g / area_p)), in (0, 1].
inline double scale_similarity(const OrientedBox & proposal, const OrientedBox & gt)
{
  const double ap = proposal.area();
  const double ag = gt.area();
  if (!(ap > 0.0) || !(ag > 0.0)) {
    throw InvalidInput("scale_similarity: boxes must have positive area");
  }
  return std::sqrt(std::min(ap, ag) / std::max(ap, ag));
}

enum class BetaTargetMode
{
  median,
  kth_smallest,
};

struct BetaState
{
  double beta{1.0};
  double momentum{0.9};
  double beta_min{0.02};
  double beta_max{1.0};
  BetaTargetMode mode{BetaTargetMode::median};
  /// 1-based rank for kth_smallest mode.
  std::size_t k{1};
  /// Last raw (pre-smoothing, pre-clamp) target.
  double last_target{0.0};
  std::size_t updates{0};
  /// Updates skipped because no similarities were supplied.
  std::size_t skipped{0};

  void validate() const
  {
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw InvalidConfig("beta: momentum must lie in [0, 1)");
    }
    if (!(beta_min > 0.0 && beta_min <= beta_max)) {
      throw InvalidConfig("beta: require 0 < beta_min <= beta_max");
    }
    if (!(beta >= beta_min && beta <= beta_max)) {
      throw InvalidConfig("beta: initial beta outside [beta_min, beta_max]");
    }
    if (k < 1) {
      throw InvalidConfig("beta: k must be >= 1");
    }
  }
};

inline double median(std::vector<double> v)
{
  if (v.empty()) {
    throw InvalidInput("median: empty input");
  }
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Raw target: median of (1 - s), or 1 - (k-th smallest s).
inline double beta_target(std::span<const double> similarities, const BetaState & state)
{
  std::vector<double> v(similarities.begin(), similarities.end());
  if (state.mode == BetaTargetMode::median) {
    for (double & s : v) {
      s = 1.0 - s;
    }
    return median(std::move(v));
  }
  const std::size_t k = std::min(state.k, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return 1.0 - v[k];
}

/// EMA step toward the raw target, clamped to [beta_min, beta_max]. An empty
/// similarity list leaves beta untouched and counts as skipped.
inline BetaState update_beta(BetaState state, std::span<const double> similarities)
{
  if (similarities.empty()) {
    ++state.skipped;
    return state;
  }
  const double target = beta_target(similarities, state);
  state.last_target = target;
  state.beta = std::clamp(
    state.momentum * state.beta + (1.0 - state.momentum) * target, state.beta_min,
    state.beta_max);
  ++state.updates;
  return state;
}

// ---------------------------------------------------------------------------
// Multi-task composition

struct LossConfig
{
  double lambda_reg{1.0};
  double lambda_cls{1.0};
  double alpha_init{1.0};
  double alpha_refine{1.0};
  double beta{1.0};
  FocalParams focal;
};

/// Predictions and targets of one detection head over the anchor grid.
struct HeadInputs
{
  const AssignmentResult * assignment{nullptr};
  std::span<const BoxDelta> pred_deltas;
  std::span<const BoxDelta> target_deltas;
  /// anchors x num_classes sigmoid probabilities, row-major.
  std::span<const double> cls_probs;
  std::size_t num_classes{1};
  /// Class id of each ground truth.
  std::span<const int> gt_classes;
};

struct HeadLoss
{
  double reg_loss{0.0};
  double cls_loss{0.0};
  double total{0.0};
  std::size_t normalizer{1};
  std::size_t positives{0};
};

struct LossBreakdown
{
  HeadLoss init;
  HeadLoss refine;
  double total{0.0};
  LossConfig config;
};

/// Regression targets for every anchor (zeros where not positive).
inline std::vector<BoxDelta> regression_targets(
  const AnchorGrid & grid, std::span<const GroundTruth> gts, const AssignmentResult & res)
{
  std::vector<BoxDelta> out(grid.size());
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const AnchorLabel & l = res.labels[a];
    if (l.kind == LabelKind::positive) {
      out[a] = box_deltas(grid.anchors[a], gts[static_cast<std::size_t>(l.gt)].box);
    }
  }
  return out;
}

/// (lambda_reg / N) * sum over positives of smooth L1 on the five deltas
/// + (lambda_cls / N) * focal loss over non-ignored anchors and all classes,
/// with N the positive count (at least 1).
inline HeadLoss head_loss(const HeadInputs & in, const LossConfig & cfg)
{
  if (in.assignment == nullptr) {
    throw InvalidInput("head_loss: missing assignment");
  }
  const std::size_t n = in.assignment->labels.size();
  if (in.pred_deltas.size() != n || in.target_deltas.size() != n ||
    in.cls_probs.size() != n * in.num_classes || in.num_classes == 0)
  {
    throw InvalidInput("head_loss: prediction/target shapes do not match the anchor count");
  }
  HeadLoss out;
  double reg = 0.0;
  double cls = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const AnchorLabel & l = in.assignment->labels[a];
    if (l.kind == LabelKind::ignore) {
      continue;
    }
    int cls_target = -1;
    if (l.kind == LabelKind::positive) {
      ++out.positives;
      const auto gt = static_cast<std::size_t>(l.gt);
      if (gt >= in.gt_classes.size()) {
        throw InvalidInput("head_loss: ground-truth class list too short");
      }
      cls_target = in.gt_classes[gt];
      const auto p = in.pred_deltas[a].as_array();
      const auto t = in.target_deltas[a].as_array();
      for (std::size_t j = 0; j < 5; ++j) {
        reg += smooth_l1(p[j] - t[j], cfg.beta);
      }
    }
    for (std::size_t c = 0; c < in.num_classes; ++c) {
      cls += focal_loss(
        in.cls_probs[a * in.num_classes + c], static_cast<int>(c) == cls_target, cfg.focal);
    }
  }
  out.normalizer = std::max<std::size_t>(1, out.positives);
  const double norm = static_cast<double>(out.normalizer);
  out.reg_loss = cfg.lambda_reg * reg / norm;
  out.cls_loss = cfg.lambda_cls * cls / norm;
  out.total = out.reg_loss + out.cls_loss;
  return out;
}

/// alpha_init * L_init + alpha_refine * L_refine.
inline LossBreakdown multi_task_loss(
  const HeadInputs & init, const HeadInputs & refine, const LossConfig & cfg)
{
  if (!(cfg.beta > 0.0)) {
    throw InvalidConfig("multi_task_loss: beta must be positive");
  }
  LossBreakdown b;
  b.config = cfg;
  b.init = head_loss(init, cfg);
  b.refine = head_loss(refine, cfg);
  b.total = cfg.alpha_init * b.init.total + cfg.alpha_refine * b.refine.total;
  return b;
}

}  // namespace obbkit

#endif  // OBBKIT__LOSSES_HPP_
