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

#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "obbkit/scene.hpp"
#include "test_util.hpp"

namespace obbkit
{
namespace
{

bool inside_image(const SceneSpec & spec, const OrientedBox & b)
{
  for (const Point2 & v : obb_to_polygon(b).vertices) {
    if (v.x < -1e-9 || v.y < -1e-9 || v.x > spec.image_width + 1e-9 ||
      v.y > spec.image_height + 1e-9)
    {
      return false;
    }
  }
  return true;
}

TEST(GenerateScene, Deterministic)
{
  SceneSpec spec;
  spec.seed = 42;
  const Scene a = generate_scene(spec);
  const Scene b = generate_scene(spec);
  ASSERT_EQ(a.gts.size(), spec.object_count);
  for (std::size_t i = 0; i < a.gts.size(); ++i) {
    EXPECT_EQ(a.gts[i].box, b.gts[i].box);
  }
}

TEST(GenerateScene, UnitAspectRangeGivesSquares)
{
  SceneSpec spec;
  spec.aspect_min = 1.0;
  spec.aspect_max = 1.0;
  for (const GroundTruth & g : generate_scene(spec).gts) {
    EXPECT_DOUBLE_EQ(g.box.w, g.box.h);
    EXPECT_GE(g.box.theta, -kPi / 4);
    EXPECT_LT(g.box.theta, kPi / 4);
  }
}

TEST(GenerateScene, GridSweepOnePerCell)
{
  SceneSpec spec;
  spec.placement = Placement::grid_sweep;
  spec.image_width = 2048;
  spec.image_height = 1536;
  spec.sweep_aspect_bins = 10;
  spec.sweep_angle_bins = 16;
  const Scene s = generate_scene(spec);
  ASSERT_EQ(s.gts.size(), 160u);
  const double da = (spec.aspect_max - spec.aspect_min) / 10.0;
  const double dt = kPi / 16.0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      const GroundTruth & g = s.gts[i * 16 + j];
      EXPECT_GE(g.aspect, spec.aspect_min + da * static_cast<double>(i) - 1e-9);
      EXPECT_LE(g.aspect, spec.aspect_min + da * static_cast<double>(i + 1) + 1e-9);
      if (g.box.w > g.box.h) {
        EXPECT_GE(g.box.theta, -kPi / 4 + dt * static_cast<double>(j) - 1e-9);
        EXPECT_LE(g.box.theta, -kPi / 4 + dt * static_cast<double>(j + 1) + 1e-9);
      }
      EXPECT_TRUE(inside_image(spec, g.box));
    }
  }
}

TEST(GenerateScene, MarginalsWithinRanges)
{
  SceneSpec spec;
  spec.object_count = 500;
  spec.aspect_min = 2.0;
  spec.aspect_max = 9.0;
  spec.angle_min = 0.0;
  spec.angle_max = 1.0;
  spec.scale_min = 50;
  spec.scale_max = 150;
  spec.seed = 3;
  for (const GroundTruth & g : generate_scene(spec).gts) {
    EXPECT_GE(g.aspect, 2.0 - 1e-9);
    EXPECT_LE(g.aspect, 9.0 + 1e-9);
    EXPECT_GE(g.box.theta, 0.0);
    EXPECT_LE(g.box.theta, 1.0);
    EXPECT_GE(g.box.w, 50.0);
    EXPECT_LE(g.box.w, 150.0);
    EXPECT_TRUE(inside_image(spec, g.box));
  }
}

TEST(GenerateScene, LogUniformAspectPopulatesTail)
{
  SceneSpec spec;
  spec.object_count = 4000;
  spec.seed = 8;
  std::size_t above_sqrt = 0;
  const double mid = std::sqrt(spec.aspect_min * spec.aspect_max);
  for (const GroundTruth & g : generate_scene(spec).gts) {
    above_sqrt += g.aspect > mid ? 1 : 0;
  }
  // The geometric midpoint splits a log-uniform draw in half.
  EXPECT_NEAR(static_cast<double>(above_sqrt) / 4000.0, 0.5, 0.04);
}

TEST(GenerateScene, SeedSensitivity)
{
  SceneSpec spec;
  std::set<std::pair<double, double>> centers;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    for (const GroundTruth & g : generate_scene(spec).gts) {
      centers.insert({g.box.cx, g.box.cy});
    }
  }
  EXPECT_EQ(centers.size(), 10 * spec.object_count);
}

TEST(GenerateScene, Errors)
{
  SceneSpec spec;
  spec.scale_min = 2000;
  spec.scale_max = 3000;
  EXPECT_THROW(generate_scene(spec), GenerationError);
  spec = SceneSpec{};
  spec.aspect_min = 0.5;
  EXPECT_THROW(generate_scene(spec), InvalidConfig);
  spec = SceneSpec{};
  spec.image_width = 0;
  EXPECT_THROW(generate_scene(spec), InvalidConfig);
  spec = SceneSpec{};
  spec.placement = Placement::grid_sweep;
  spec.sweep_angle_bins = 0;
  EXPECT_THROW(generate_scene(spec), InvalidConfig);
}

TEST(DotaRoundTrip, ReproducesGroundTruths)
{
  SceneSpec spec;
  spec.object_count = 100;
  spec.seed = 19;
  spec.class_id = 6;
  const Scene s = generate_scene(spec);
  std::stringstream ss;
  write_dota(ss, s, CategoryTable::dota_v1());
  const DotaFile f = parse_dota(ss);
  ASSERT_TRUE(f.errors.empty());
  ASSERT_EQ(f.records.size(), s.gts.size());
  const ConvertedGts c = records_to_gts(f.records, false);
  ASSERT_EQ(c.gts.size(), s.gts.size());
  for (std::size_t i = 0; i < s.gts.size(); ++i) {
    EXPECT_EQ(f.records[i].category, "ship");
    EXPECT_EQ(c.gts[i].class_id, 6);
    EXPECT_LT(
      test::vertex_set_distance(obb_to_polygon(c.gts[i].box), obb_to_polygon(s.gts[i].box)),
      1e-6);
    EXPECT_NEAR(c.gts[i].box.w, s.gts[i].box.w, 1e-6);
    EXPECT_NEAR(c.gts[i].box.h, s.gts[i].box.h, 1e-6);
  }
}

TEST(ParseDotaLine, WellFormed)
{
  const auto r = parse_dota_line("100.0 100.0 200.0 100.0 200.0 150.0 100.0 150.0 plane 0", 1);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->category, "plane");
  EXPECT_EQ(r->difficult, 0);
  const std::array<double, 8> q{100, 100, 200, 100, 200, 150, 100, 150};
  EXPECT_EQ(r->quad, q);
  const auto no_flag = parse_dota_line("0 0 1 0 1 1 0 1 ship", 2);
  ASSERT_TRUE(no_flag.has_value());
  EXPECT_EQ(no_flag->difficult, 0);
  const auto hard = parse_dota_line("0 0 1 0 1 1 0 1 ship 1", 3);
  EXPECT_EQ(hard->difficult, 1);
}

TEST(ParseDotaLine, MetadataSkipped)
{
  EXPECT_FALSE(parse_dota_line("gsd:0.146343590398", 2).has_value());
  EXPECT_FALSE(parse_dota_line("imagesource:GoogleEarth", 1).has_value());
  EXPECT_FALSE(parse_dota_line("   ", 3).has_value());
  EXPECT_FALSE(parse_dota_line("# comment", 4).has_value());
}

TEST(ParseDotaLine, MalformedReportsLine)
{
  try {
    parse_dota_line("1 2 3 plane", 7);
    FAIL() << "expected ParseError";
  } catch (const ParseError & e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
  }
  EXPECT_THROW(parse_dota_line("1 2 3 4 x 6 7 8 plane 0", 1), ParseError);
  EXPECT_THROW(parse_dota_line("1 2 3 4 5 6 7 8 plane hard", 1), ParseError);
  EXPECT_THROW(parse_dota_line("1 2 3 4 5 6 7 8 plane 0 extra", 1), ParseError);
  EXPECT_THROW(parse_dota_line("1 2 3 4 5 6 7 nan plane 0", 1), ParseError);
}

TEST(ParseDota, CollectsErrorsAndLines)
{
  std::istringstream in(
    "imagesource:GoogleEarth\r\n"
    "gsd:0.1\n"
    "100 100 200 100 200 150 100 150 plane 0\n"
    "1 2 3 plane\n"
    "\n"
    "0 0 10 0 10 5 0 5 ship 1\n");
  const DotaFile f = parse_dota(in);
  EXPECT_EQ(f.records.size(), 2u);
  EXPECT_EQ(f.metadata_lines, 3u);
  ASSERT_EQ(f.errors.size(), 1u);
  EXPECT_EQ(f.errors[0].line, 4u);
  EXPECT_EQ(f.record_lines, (std::vector<std::size_t>{3, 6}));
}

TEST(RecordsToGts, AxisAlignedPlane)
{
  const auto r = parse_dota_line("100.0 100.0 200.0 100.0 200.0 150.0 100.0 150.0 plane 0", 1);
  const std::vector<AnnotationRecord> recs{*r};
  const ConvertedGts c = records_to_gts(recs, false);
  ASSERT_EQ(c.gts.size(), 1u);
  const OrientedBox & b = c.gts[0].box;
  EXPECT_DOUBLE_EQ(b.cx, 150);
  EXPECT_DOUBLE_EQ(b.cy, 125);
  EXPECT_DOUBLE_EQ(b.w, 100);
  EXPECT_DOUBLE_EQ(b.h, 50);
  EXPECT_DOUBLE_EQ(b.theta, 0);
  EXPECT_DOUBLE_EQ(c.gts[0].aspect, 2.0);
  EXPECT_EQ(c.gts[0].class_id, 0);
}

TEST(RecordsToGts, DifficultFilter)
{
  std::vector<AnnotationRecord> recs{
    *parse_dota_line("0 0 10 0 10 5 0 5 ship 1", 1),
    *parse_dota_line("0 0 10 0 10 5 0 5 harbor 0", 2)};
  const ConvertedGts skip = records_to_gts(recs, false);
  EXPECT_EQ(skip.gts.size(), 1u);
  EXPECT_EQ(skip.difficult_skipped, 1u);
  EXPECT_EQ(skip.source, (std::vector<std::size_t>{1}));
  EXPECT_EQ(skip.gts[0].class_id, 12);
  EXPECT_EQ(records_to_gts(recs, true).gts.size(), 2u);
}

TEST(RecordsToGts, UnknownCategory)
{
  std::vector<AnnotationRecord> recs{
    *parse_dota_line("0 0 10 0 10 5 0 5 submarine 0", 1),
    *parse_dota_line("0 0 10 0 10 5 0 5 ufo 0", 2)};
  try {
    records_to_gts(recs, false);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput & e) {
    EXPECT_NE(std::string(e.what()).find("submarine"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("ufo"), std::string::npos);
  }
  const ConvertedGts c =
    records_to_gts(recs, false, CategoryTable::dota_v1(), UnknownCategory::pass_through);
  ASSERT_EQ(c.gts.size(), 2u);
  EXPECT_EQ(c.gts[0].class_id, 15);
  EXPECT_EQ(c.gts[1].class_id, 16);
  EXPECT_EQ(c.table.name(16), "ufo");
}

TEST(RecordsToGts, DegenerateQuadCounted)
{
  std::vector<AnnotationRecord> recs{*parse_dota_line("0 0 5 5 10 10 15 15 plane 0", 1)};
  const ConvertedGts c = records_to_gts(recs, false);
  EXPECT_TRUE(c.gts.empty());
  EXPECT_EQ(c.degenerate_skipped, 1u);
}

TEST(CategoryTable, DotaV1AndLoad)
{
  const CategoryTable t = CategoryTable::dota_v1();
  EXPECT_EQ(t.size(), 15u);
  EXPECT_EQ(t.name(0), "plane");
  EXPECT_EQ(t.name(14), "helicopter");
  EXPECT_EQ(t.find("storage-tank"), 9);
  EXPECT_FALSE(t.find("Plane").has_value());
  std::istringstream in("# classes\nplane\n\ncar  \n");
  const CategoryTable u = CategoryTable::load(in);
  EXPECT_EQ(u.size(), 2u);
  EXPECT_EQ(u.find("car"), 1);
}

TEST(FormatDouble, ShortestRoundTrip)
{
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(150), "150");
  EXPECT_EQ(format_double(-2.5e-7), "-2.5e-07");
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1e6, 1e6);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

}  // namespace
}  // namespace obbkit
