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
/// Synthetic scenes with controlled shape distributions, and DOTA-format
/// annotation text (one object per line:
/// `x1 y1 x2 y2 x3 y3 x4 y4 category [difficult]`, optional `imagesource:` and
/// `gsd:` header lines).

#ifndef OBBKIT__SCENE_HPP_
#define OBBKIT__SCENE_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "obbkit/assignment.hpp"
#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"
#include "obbkit/random.hpp"

namespace obbkit
{

enum class Placement
{
  uniform,
  grid_sweep,
};

struct SceneSpec
{
  double image_width{1024.0};
  double image_height{1024.0};
  std::size_t object_count{32};
  double aspect_min{1.0};
  double aspect_max{12.0};
  double angle_min{-kPi / 4.0};
  double angle_max{3.0 * kPi / 4.0};
  /// Long-edge length range in pixels.
  double scale_min{48.0};
  double scale_max{240.0};
  std::uint64_t seed{0};
  Placement placement{Placement::uniform};
  /// Grid-sweep cell counts; object_count is ignored in that mode.
  std::size_t sweep_aspect_bins{12};
  std::size_t sweep_angle_bins{16};
  int class_id{0};

  void validate() const
  {
    if (!(image_width > 0.0) || !(image_height > 0.0)) {
      throw InvalidConfig("scene: image size must be positive");
    }
    if (!(aspect_min >= 1.0) || !(aspect_max >= aspect_min) || !std::isfinite(aspect_max)) {
      throw InvalidConfig("scene: aspect range must satisfy 1 <= min <= max");
    }
    if (!std::isfinite(angle_min) || !std::isfinite(angle_max) || angle_max < angle_min) {
      throw InvalidConfig("scene: angle range must be finite with min <= max");
    }
    if (!(scale_min > 0.0) || !(scale_max >= scale_min) || !std::isfinite(scale_max)) {
      throw InvalidConfig("scene: scale range must satisfy 0 < min <= max");
    }
    if (placement == Placement::grid_sweep && (sweep_aspect_bins < 1 || sweep_angle_bins < 1)) {
      throw InvalidConfig("scene: grid sweep needs at least one bin per axis");
    }
  }
};

struct Scene
{
  SceneSpec spec;
  std::vector<GroundTruth> gts;
};

namespace detail
{

struct Extent
{
  double x;
  double y;
};

/// Half extents of the axis-aligned bounding box of a rotated rectangle.
inline Extent half_extent(double w, double h, double theta)
{
  const double c = std::abs(std::cos(theta));
  const double s = std::abs(std::sin(theta));
  return {0.5 * (w * c + h * s), 0.5 * (w * s + h * c)};
}

inline void require_fit(const SceneSpec & spec, const Extent & e)
{
  if (2.0 * e.x > spec.image_width || 2.0 * e.y > spec.image_height) {
    throw GenerationError("generate_scene: object does not fit inside the image");
  }
}

}  // namespace detail

/// Deterministic for a fixed SceneSpec, seed included.
inline Scene generate_scene(const SceneSpec & spec)
{
  spec.validate();
  if (spec.scale_min > std::min(spec.image_width, spec.image_height)) {
    throw GenerationError("generate_scene: scale range exceeds the image size");
  }
  Scene scene;
  scene.spec = spec;
  Rng rng(spec.seed);

  if (spec.placement == Placement::uniform) {
    const double la = std::log(spec.aspect_min);
    const double lb = std::log(spec.aspect_max);
    for (std::size_t i = 0; i < spec.object_count; ++i) {
      const double aspect = std::exp(rng.uniform(la, lb));
      const double theta = rng.uniform(spec.angle_min, spec.angle_max);
      const double length = rng.uniform(spec.scale_min, spec.scale_max);
      const double w = length;
      const double h = length / aspect;
      const detail::Extent e = detail::half_extent(w, h, theta);
      detail::require_fit(spec, e);
      const double cx = rng.uniform(e.x, spec.image_width - e.x);
      const double cy = rng.uniform(e.y, spec.image_height - e.y);
      scene.gts.push_back(make_ground_truth({cx, cy, w, h, theta}, spec.class_id));
    }
    return scene;
  }

  const std::size_t na = spec.sweep_aspect_bins;
  const std::size_t nt = spec.sweep_angle_bins;
  const double da = (spec.aspect_max - spec.aspect_min) / static_cast<double>(na);
  const double dt = (spec.angle_max - spec.angle_min) / static_cast<double>(nt);
  const double cell_w = spec.image_width / static_cast<double>(nt);
  const double cell_h = spec.image_height / static_cast<double>(na);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const double a0 = spec.aspect_min + da * static_cast<double>(i);
      const double aspect = rng.uniform(a0, a0 + da);
      const double t0 = spec.angle_min + dt * static_cast<double>(j);
      const double theta = rng.uniform(t0, t0 + dt);
      const double length = rng.uniform(spec.scale_min, spec.scale_max);
      const double jx = rng.uniform(-0.25, 0.25);
      const double jy = rng.uniform(-0.25, 0.25);
      const double w = length;
      const double h = length / aspect;
      const detail::Extent e = detail::half_extent(w, h, theta);
      detail::require_fit(spec, e);
      const double cx = std::clamp(
        (static_cast<double>(j) + 0.5 + jx) * cell_w, e.x, spec.image_width - e.x);
      const double cy = std::clamp(
        (static_cast<double>(i) + 0.5 + jy) * cell_h, e.y, spec.image_height - e.y);
      scene.gts.push_back(make_ground_truth({cx, cy, w, h, theta}, spec.class_id));
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// DOTA annotations

struct AnnotationRecord
{
  std::array<double, 8> quad{};
  std::string category;
  int difficult{0};
};

inline ConvexQuad record_quad(const AnnotationRecord & r)
{
  ConvexQuad q;
  for (std::size_t i = 0; i < 4; ++i) {
    q.vertices[i] = {r.quad[2 * i], r.quad[2 * i + 1]};
  }
  return q;
}

namespace detail
{

inline std::vector<std::string_view> split_ws(std::string_view s)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) {
      ++i;
    }
    if (i > start) {
      out.push_back(s.substr(start, i - start));
    }
  }
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix)
{
  if (s.size() < prefix.size()) {
    return false;
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) {
      return false;
    }
  }
  return true;
}

template<class T>
std::optional<T> parse_number(std::string_view tok)
{
  T v{};
  const char * first = tok.data();
  const char * last = tok.data() + tok.size();
  if (first != last && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

/// True for lines carrying no object: blank, `#` comments, and the
/// `imagesource:` / `gsd:` headers.
inline bool is_dota_metadata(std::string_view line)
{
  const auto toks = detail::split_ws(line);
  if (toks.empty()) {
    return true;
  }
  const std::string_view t = toks.front();
  return t.front() == '#' || detail::starts_with_ci(t, "imagesource") ||
         detail::starts_with_ci(t, "gsd");
}

/// Parses one annotation line; metadata lines yield std::nullopt.
inline std::optional<AnnotationRecord> parse_dota_line(std::string_view line, std::size_t line_no)
{
  if (is_dota_metadata(line)) {
    return std::nullopt;
  }
  const auto toks = detail::split_ws(line);
  if (toks.size() < 9) {
    throw ParseError(
      line_no, "expected 8 coordinates and a category, got " + std::to_string(toks.size()) +
      " tokens");
  }
  if (toks.size() > 10) {
    throw ParseError(line_no, "unexpected trailing tokens after the difficult flag");
  }
  AnnotationRecord rec;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto v = detail::parse_number<double>(toks[i]);
    if (!v || !std::isfinite(*v)) {
      throw ParseError(line_no, "non-numeric coordinate '" + std::string(toks[i]) + "'");
    }
    rec.quad[i] = *v;
  }
  rec.category = std::string(toks[8]);
  if (toks.size() == 10) {
    const auto d = detail::parse_number<int>(toks[9]);
    if (!d) {
      throw ParseError(line_no, "difficult flag must be an integer, got '" +
              std::string(toks[9]) + "'");
    }
    rec.difficult = *d;
  }
  return rec;
}

struct LineError
{
  std::size_t line{0};
  std::string message;
};

struct DotaFile
{
  std::vector<AnnotationRecord> records;
  /// 1-based source line of each record.
  std::vector<std::size_t> record_lines;
  std::vector<LineError> errors;
  std::size_t metadata_lines{0};
};

/// Parses a whole file, collecting per-line errors instead of stopping.
inline DotaFile parse_dota(std::istream & in)
{
  DotaFile out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    try {
      auto rec = parse_dota_line(line, no);
      if (rec) {
        out.records.push_back(std::move(*rec));
        out.record_lines.push_back(no);
      } else {
        ++out.metadata_lines;
      }
    } catch (const ParseError & e) {
      out.errors.push_back({e.line(), e.what()});
    }
  }
  return out;
}

inline DotaFile parse_dota_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open annotation file '" + path + "'");
  }
  return parse_dota(in);
}

/// Name table mapping category strings to class ids (index order).
class CategoryTable
{
public:
  CategoryTable() = default;
  explicit CategoryTable(std::vector<std::string> names) : names_(std::move(names)) {}

  /// The 15 DOTA v1.0 categories.
  static CategoryTable dota_v1()
  {
    return CategoryTable(
      {"plane", "baseball-diamond", "bridge", "ground-track-field", "small-vehicle",
        "large-vehicle", "ship", "tennis-court", "basketball-court", "storage-tank",
        "soccer-ball-field", "roundabout", "harbor", "swimming-pool", "helicopter"});
  }

  /// One name per line; blank lines and `#` comments ignored.
  static CategoryTable load(std::istream & in)
  {
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
      const auto toks = detail::split_ws(line);
      if (toks.empty() || toks.front().front() == '#') {
        continue;
      }
      names.emplace_back(toks.front());
    }
    return CategoryTable(std::move(names));
  }

  std::optional<int> find(std::string_view name) const
  {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
      return std::nullopt;
    }
    return static_cast<int>(it - names_.begin());
  }

  int add(const std::string & name)
  {
    names_.push_back(name);
    return static_cast<int>(names_.size()) - 1;
  }

  const std::string & name(int id) const {return names_.at(static_cast<std::size_t>(id));}
  std::size_t size() const {return names_.size();}

private:
  std::vector<std::string> names_;
};

enum class UnknownCategory
{
  error,
  pass_through,
};

struct ConvertedGts
{
  std::vector<GroundTruth> gts;
  /// Index into the input records of each ground truth.
  std::vector<std::size_t> source;
  std::size_t degenerate_skipped{0};
  std::size_t difficult_skipped{0};
  /// Table after conversion (grows in pass-through mode).
  CategoryTable table;
};

inline ConvertedGts records_to_gts(
  std::span<const AnnotationRecord> records, bool include_difficult,
  CategoryTable table = CategoryTable::dota_v1(),
  UnknownCategory policy = UnknownCategory::error)
{
  ConvertedGts out;
  std::vector<std::string> unknown;
  for (const AnnotationRecord & r : records) {
    if (!table.find(r.category)) {
      if (policy == UnknownCategory::error) {
        if (std::find(unknown.begin(), unknown.end(), r.category) == unknown.end()) {
          unknown.push_back(r.category);
        }
      } else {
        table.add(r.category);
      }
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown categories:";
    for (const auto & u : unknown) {
      msg += " " + u;
    }
    throw InvalidInput(msg);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AnnotationRecord & r = records[i];
    if (r.difficult != 0 && !include_difficult) {
      ++out.difficult_skipped;
      continue;
    }
    try {
      const OrientedBox box = quad_to_obb(record_quad(r));
      out.gts.push_back(make_ground_truth(box, *table.find(r.category)));
      out.source.push_back(i);
    } catch (const DegenerateInput &) {
      ++out.degenerate_skipped;
    }
  }
  out.table = std::move(table);
  return out;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v)
{
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// One DOTA line per ground truth, difficult flag 0.
inline void write_dota(std::ostream & out, const Scene & scene, const CategoryTable & table)
{
  for (const GroundTruth & gt : scene.gts) {
    const ConvexQuad q = obb_to_polygon(gt.box);
    for (const Point2 & p : q.vertices) {
      out << format_double(p.x) << ' ' << format_double(p.y) << ' ';
    }
    out << table.name(gt.class_id) << " 0\n";
  }
}

}  // namespace obbkit

#endif  // OBBKIT__SCENE_HPP_
