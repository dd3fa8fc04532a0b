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
/// JSON documents emitted by the command-line tool, plus the plain-text
/// readers for feature maps, offsets and kernels used by `cfs-demo`.

#ifndef OBBKIT__JSON_REPORTS_HPP_
#define OBBKIT__JSON_REPORTS_HPP_

#include <cmath>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "obbkit/config.hpp"
#include "obbkit/reports.hpp"
#include "obbkit/sampling.hpp"
#include "obbkit/scene.hpp"

namespace obbkit
{

using Json = nlohmann::ordered_json;

inline Json box_json(const OrientedBox & b)
{
  return Json::array({b.cx, b.cy, b.w, b.h, b.theta});
}

inline Json point_json(Point2 p)
{
  return Json::array({p.x, p.y});
}

inline Json binned_json(const BinnedStats & b)
{
  Json rows = Json::array();
  for (std::size_t i = 0; i < b.bins(); ++i) {
    rows.push_back(
      {{"bin", i}, {"lo", b.edges[i]}, {"hi", b.edges[i + 1]}, {"gt_count", b.gt_count[i]},
        {"mean_positives", b.mean_positives[i]}, {"zero_positive_gts", b.zero_positive_gts[i]}});
  }
  return rows;
}

/// Spearman rho, or null when undefined (constant means).
inline Json trend_json(const BinnedStats & b)
{
  const double rho = bin_trend(b);
  return std::isfinite(rho) ? Json(rho) : Json(nullptr);
}

inline Json stats_json(const StatsConfig & cfg, const StatsResult & r)
{
  const AnglePeriodicity p = angle_periodicity(r.by_angle);
  return {
    {"schema_version", kSchemaVersion},
    {"strategy", to_string(cfg.strategy)},
    {"seed", cfg.seed},
    {"scenes", cfg.scenes},
    {"total_gts", r.total_gts},
    {"zero_positive_gts", r.zero_positive_gts},
    {"mean_positives", r.mean_positives},
    {"aspect_trend_spearman", trend_json(r.by_aspect)},
    {"angle_periodicity",
      {{"argmax_bin", p.argmax_bin}, {"argmin_bin", p.argmin_bin},
        {"max_at_equilibrium", p.max_at_equilibrium}, {"min_at_diagonal", p.min_at_diagonal}}},
    {"by_aspect", binned_json(r.by_aspect)},
    {"by_angle", binned_json(r.by_angle)},
  };
}

inline Json threshold_json(const ThresholdConfig & cfg, const ThresholdSurface & s)
{
  return {
    {"schema_version", kSchemaVersion},
    {"gammas", cfg.gammas},
    {"aspect_count", cfg.aspects.size()},
    {"angle_count", cfg.angles.size()},
    {"candidate_ious", cfg.candidate_ious},
    {"rows", s.rows.size()},
    {"decreasing_in_aspect", s.decreasing_in_aspect},
    {"peak_at_equilibrium", s.peak_at_equilibrium},
  };
}

inline Json gradient_json(const GradientCheck & c, double tol)
{
  return {
    {"name", c.name}, {"points", c.points}, {"max_relative_error", c.max_rel_error},
    {"tolerance", tol}, {"pass", c.max_rel_error < tol}, {"offenders", c.offenders}};
}

// ---------------------------------------------------------------------------
// Scene serialization

inline Json scene_spec_json(const SceneSpec & s)
{
  return {
    {"schema_version", kSchemaVersion},
    {"image_width", s.image_width},
    {"image_height", s.image_height},
    {"object_count", s.object_count},
    {"aspect_min", s.aspect_min},
    {"aspect_max", s.aspect_max},
    {"angle_min", s.angle_min},
    {"angle_max", s.angle_max},
    {"scale_min", s.scale_min},
    {"scale_max", s.scale_max},
    {"seed", s.seed},
    {"placement", s.placement == Placement::uniform ? "uniform" : "grid_sweep"},
    {"sweep_aspect_bins", s.sweep_aspect_bins},
    {"sweep_angle_bins", s.sweep_angle_bins},
    {"class_id", s.class_id},
  };
}

/// Writes `<base>.txt` (DOTA annotations) and `<base>.json` (its SceneSpec).
inline void write_scene(
  const std::string & base, const Scene & scene, const CategoryTable & table)
{
  std::ofstream txt(base + ".txt");
  std::ofstream js(base + ".json");
  if (!txt || !js) {
    throw InvalidInput("write_scene: cannot open '" + base + ".txt/.json' for writing");
  }
  write_dota(txt, scene, table);
  js << scene_spec_json(scene.spec).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// assign-file

struct AssignFileReport
{
  Json json;
  std::vector<LineError> errors;
};

/// Runs every strategy on the annotations of one file. Parse errors are
/// returned instead of a report.
inline AssignFileReport assign_file_report(
  const std::string & source, std::istream & in, const RunConfig & cfg,
  const CategoryTable & table)
{
  AssignFileReport out;
  const DotaFile file = parse_dota(in);
  if (!file.errors.empty()) {
    out.errors = file.errors;
    return out;
  }
  const ConvertedGts conv = records_to_gts(
    file.records, cfg.assign_file.include_difficult, table, cfg.assign_file.unknown_category);
  const AnchorGrid grid = generate_anchors(
    cfg.assign_file.image_width, cfg.assign_file.image_height, cfg.anchors.strides,
    cfg.anchors.scale_multiplier);
  const Strategy all[] = {Strategy::maxiou, Strategy::atss, Strategy::mas};
  std::vector<AssignmentResult> results;
  for (const Strategy s : all) {
    results.push_back(run_assigner(s, grid, conv.gts, cfg.assigners));
  }

  Json gts = Json::array();
  for (std::size_t g = 0; g < conv.gts.size(); ++g) {
    const GroundTruth & gt = conv.gts[g];
    const AnnotationRecord & rec = file.records[conv.source[g]];
    const auto cands = select_candidates(grid, gt.box, cfg.assigners.mas.candidate_k);
    std::vector<double> ious;
    for (const std::size_t a : cands) {
      ious.push_back(rotated_iou(grid.anchors[a], gt.box));
    }
    const ThresholdDetail d = mas_threshold_detail(gt, ious, cfg.assigners.mas);
    Json per = Json::object();
    for (std::size_t s = 0; s < results.size(); ++s) {
      const GtAssignment & ga = results[s].per_gt[g];
      per[to_string(all[s])] = {
        {"threshold", ga.threshold}, {"positives", ga.positive_count},
        {"fallback", ga.fallback_used}};
    }
    gts.push_back(
      {{"index", g}, {"line", file.record_lines[conv.source[g]]}, {"category", rec.category},
        {"class_id", gt.class_id}, {"difficult", rec.difficult}, {"box", box_json(gt.box)},
        {"aspect", gt.aspect},
        {"mas_threshold",
          {{"f", d.weight}, {"mean_plus_std", d.init}, {"raw", d.raw}, {"clamped", d.clamped}}},
        {"strategies", per}});
  }
  Json summary = Json::object();
  for (std::size_t s = 0; s < results.size(); ++s) {
    std::size_t pos = 0;
    std::size_t zero = 0;
    for (const GtAssignment & ga : results[s].per_gt) {
      pos += ga.positive_count;
      zero += ga.fallback_used ? 1 : 0;
    }
    summary[to_string(all[s])] = {
      {"positives", pos}, {"zero_positive_gts", zero},
      {"mean_positives",
        conv.gts.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(conv.gts.size())}};
  }
  out.json = {
    {"schema_version", kSchemaVersion},
    {"source", source},
    {"image_size", {cfg.assign_file.image_width, cfg.assign_file.image_height}},
    {"records", file.records.size()},
    {"metadata_lines", file.metadata_lines},
    {"difficult_skipped", conv.difficult_skipped},
    {"degenerate_skipped", conv.degenerate_skipped},
    {"anchors", grid.size()},
    {"gts", gts},
    {"summary", summary},
  };
  return out;
}

// ---------------------------------------------------------------------------
// cfs-demo inputs

namespace detail
{

/// Whitespace-separated numbers; `#` starts a comment to end of line.
inline std::vector<double> read_numbers(std::istream & in, const std::string & what)
{
  std::vector<double> v;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    for (const auto tok : split_ws(line)) {
      const auto x = parse_number<double>(tok);
      if (!x || !std::isfinite(*x)) {
        throw ParseError(no, what + ": not a finite number '" + std::string(tok) + "'");
      }
      v.push_back(*x);
    }
  }
  return v;
}

inline std::size_t as_count(double v, const std::string & what)
{
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
    throw InvalidInput(what + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Header `W H C`, then W*H*C values in (y, x, channel) order.
inline FeatureGrid read_feature_grid(std::istream & in)
{
  const std::vector<double> v = detail::read_numbers(in, "feature file");
  if (v.size() < 3) {
    throw InvalidInput("feature file: missing 'W H C' header");
  }
  const std::size_t w = detail::as_count(v[0], "feature width");
  const std::size_t h = detail::as_count(v[1], "feature height");
  const std::size_t c = detail::as_count(v[2], "feature channels");
  return FeatureGrid(w, h, c, std::vector<double>(v.begin() + 3, v.end()));
}

/// Nine `dx dy` pairs in pattern-point order.
inline std::vector<OffsetPair> read_offsets(std::istream & in)
{
  const std::vector<double> v = detail::read_numbers(in, "offsets file");
  if (v.size() != 2 * kPatternSize) {
    throw InvalidInput(
      "offsets file: expected 18 numbers (9 dx dy pairs), got " + std::to_string(v.size()));
  }
  std::vector<OffsetPair> out(kPatternSize);
  for (std::size_t i = 0; i < kPatternSize; ++i) {
    out[i] = {v[2 * i], v[2 * i + 1]};
  }
  return out;
}

/// 9 * channels weights, tap-major (row-major taps), channel-minor.
inline Kernel3x3 read_kernel(std::istream & in, std::size_t channels)
{
  return Kernel3x3(channels, detail::read_numbers(in, "weights file"));
}

struct CfsDemoInputs
{
  FeatureGrid features;
  OrientedBox box;
  std::vector<OffsetPair> offsets;
  Kernel3x3 kernel{1};
  double shrink{0.3};
  double stride{8.0};
  Point2 anchor_cell;
};

inline Json cfs_demo_json(const CfsDemoInputs & in)
{
  const SamplingPattern pat = make_sampling_pattern(in.box, in.shrink, in.offsets);
  const DcnOffsetField field = dcn_offset_field(pat.refined_points, in.anchor_cell, in.stride);
  Json initial = Json::array();
  Json refined = Json::array();
  for (std::size_t i = 0; i < kPatternSize; ++i) {
    initial.push_back(point_json(pat.initial_points[i]));
    refined.push_back(point_json(pat.refined_points[i]));
  }
  Json taps = Json::array();
  for (std::size_t t = 0; t < kPatternSize; ++t) {
    const auto r = tap_offset(t);
    const Point2 o = field.offsets[t];
    const Point2 at{in.anchor_cell.x + r[0] + o.x, in.anchor_cell.y + r[1] + o.y};
    Json samples = Json::array();
    for (std::size_t c = 0; c < in.features.channels(); ++c) {
      samples.push_back(bilinear_sample(in.features, at, c));
    }
    taps.push_back(
      {{"tap", t}, {"r", {r[0], r[1]}}, {"offset", point_json(o)},
        {"sample_at", point_json(at)}, {"samples", samples}});
  }
  return {
    {"schema_version", kSchemaVersion},
    {"box", box_json(in.box)},
    {"shrink", in.shrink},
    {"shrunk_box", box_json(shrink_obb(in.box, in.shrink))},
    {"stride", in.stride},
    {"anchor_cell", point_json(in.anchor_cell)},
    {"feature_shape", {in.features.width(), in.features.height(), in.features.channels()}},
    {"initial_points", initial},
    {"refined_points", refined},
    {"offset_field", taps},
    {"output", deformable_sample(in.features, in.kernel, in.anchor_cell, field)},
  };
}

}  // namespace obbkit

#endif  // OBBKIT__JSON_REPORTS_HPP_
