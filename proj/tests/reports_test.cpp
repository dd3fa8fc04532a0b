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

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "obbkit/config.hpp"
#include "obbkit/json_reports.hpp"
#include "obbkit/reports.hpp"

namespace obbkit
{
namespace
{

const std::string kDataDir = OBBKIT_DATA_DIR;

StatsConfig small_stats(Strategy s)
{
  StatsConfig c = StatsConfig::defaults();
  c.strategy = s;
  c.scenes = 2;
  return c;
}

TEST(Spearman, KnownValues)
{
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(spearman_rho(x, std::vector<double>{5, 6, 7, 8, 7.5}), 0.9);
  EXPECT_DOUBLE_EQ(spearman_rho(x, std::vector<double>{10, 8, 6, 4, 2}), -1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(x, std::vector<double>{1, 4, 9, 16, 25}), 1.0);
  EXPECT_TRUE(std::isnan(spearman_rho(x, std::vector<double>{3, 3, 3, 3, 3})));
  EXPECT_THROW(spearman_rho(x, std::vector<double>{1, 2}), InvalidInput);
}

TEST(Spearman, TiesUseAverageRanks)
{
  const std::vector<double> r = average_ranks(std::vector<double>{10, 20, 20, 5});
  EXPECT_EQ(r, (std::vector<double>{2, 3.5, 3.5, 1}));
  // Pearson on ranks (1, 2, 3, 4) vs (1, 2.5, 2.5, 4).
  const double rho = spearman_rho(
    std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 2, 3});
  EXPECT_NEAR(rho, 4.5 / std::sqrt(5.0 * 4.5), 1e-15);
}

TEST(Binning, EdgesAndLookup)
{
  const std::vector<double> e = linspace_edges(1, 12, 11);
  ASSERT_EQ(e.size(), 12u);
  EXPECT_EQ(e.front(), 1.0);
  EXPECT_EQ(e.back(), 12.0);
  EXPECT_EQ(bin_of(e, 1.0), 0u);
  EXPECT_EQ(bin_of(e, 1.999), 0u);
  EXPECT_EQ(bin_of(e, 2.0), 1u);
  EXPECT_EQ(bin_of(e, 12.0), 10u);
  EXPECT_EQ(bin_of(e, 0.5), 11u);
  EXPECT_EQ(bin_of(e, 12.5), 11u);
}

TEST(Binning, RecordsAccumulate)
{
  const std::vector<GtRecord> recs{
    {1.2, 0.0, 4, false}, {1.8, 0.0, 2, false}, {3.5, 0.0, 1, true}, {20.0, 0.0, 1, true}};
  const BinnedStats b = bin_records(recs, "aspect", "mas", linspace_edges(1, 4, 3));
  EXPECT_EQ(b.gt_count, (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(b.mean_positives, (std::vector<double>{3, 0, 1}));
  EXPECT_EQ(b.zero_positive_gts, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(Stats, BinsCoverEveryGroundTruth)
{
  const StatsConfig c = small_stats(Strategy::mas);
  const StatsResult r = run_stats(c);
  const std::size_t per_scene = c.scene.sweep_aspect_bins * c.scene.sweep_angle_bins;
  EXPECT_EQ(r.total_gts, 2 * 2 * per_scene);
  std::size_t a = 0;
  std::size_t t = 0;
  for (std::size_t i = 0; i < r.by_aspect.bins(); ++i) {
    a += r.by_aspect.gt_count[i];
  }
  for (std::size_t i = 0; i < r.by_angle.bins(); ++i) {
    t += r.by_angle.gt_count[i];
  }
  EXPECT_EQ(a, r.aspect_records.size());
  EXPECT_EQ(t, r.angle_records.size());
  EXPECT_EQ(r.by_aspect.edges.front(), 1.0);
  EXPECT_EQ(r.by_aspect.edges.back(), 12.0);
  EXPECT_DOUBLE_EQ(r.by_angle.edges.front(), -kPi / 4);
  EXPECT_DOUBLE_EQ(r.by_angle.edges.back(), 3 * kPi / 4);
}

TEST(Stats, DeterministicAndSeedDependent)
{
  StatsConfig c = small_stats(Strategy::atss);
  const StatsResult a = run_stats(c);
  const StatsResult b = run_stats(c);
  EXPECT_EQ(a.by_aspect.mean_positives, b.by_aspect.mean_positives);
  c.seed = 99;
  const StatsResult d = run_stats(c);
  EXPECT_NE(a.by_aspect.mean_positives, d.by_aspect.mean_positives);
}

TEST(Stats, MasRescuesElongatedObjects)
{
  const StatsConfig cm = small_stats(Strategy::maxiou);
  const StatsConfig cs = small_stats(Strategy::mas);
  const StatsScenes scenes = sweep_scenes(cm);
  const StatsResult m = run_stats(cm, scenes);
  const StatsResult s = run_stats(cs, scenes);
  EXPECT_LE(s.zero_positive_gts, m.zero_positive_gts);
  for (std::size_t i = 0; i < m.by_aspect.bins(); ++i) {
    if (m.by_aspect.edges[i] >= 5.0) {
      EXPECT_GT(s.by_aspect.mean_positives[i], m.by_aspect.mean_positives[i]) << i;
    }
  }
}

TEST(Stats, AnglePeriodicityDetection)
{
  BinnedStats b;
  b.edges = linspace_edges(-kPi / 4, 3 * kPi / 4, 4);
  b.gt_count = {1, 1, 1, 1};
  b.zero_positive_gts = {0, 0, 0, 0};
  b.mean_positives = {2, 5, 1, 3};
  const AnglePeriodicity p = angle_periodicity(b);
  EXPECT_EQ(p.argmax_bin, 1u);
  EXPECT_EQ(p.argmin_bin, 2u);
  EXPECT_TRUE(p.max_at_equilibrium);
  EXPECT_TRUE(p.min_at_diagonal);
  b.mean_positives = {5, 1, 1, 1};
  const AnglePeriodicity q = angle_periodicity(b);
  EXPECT_TRUE(q.max_at_equilibrium);
  EXPECT_TRUE(q.min_at_diagonal);
}

TEST(ThresholdSurface, DefaultGridsPassChecks)
{
  const ThresholdConfig c = ThresholdConfig::defaults();
  const ThresholdSurface s = threshold_surface(c);
  EXPECT_EQ(s.rows.size(), 5u * 23u * 16u);
  EXPECT_TRUE(s.decreasing_in_aspect);
  EXPECT_TRUE(s.peak_at_equilibrium);
  std::size_t gammas = 0;
  for (const ThresholdRow & r : s.rows) {
    gammas += (r.aspect == 1.0 && r.angle == c.angles.front()) ? 1 : 0;
    EXPECT_GE(r.clamped, 0.05);
    EXPECT_LE(r.clamped, 0.95);
  }
  EXPECT_EQ(gammas, 5u);
}

TEST(ThresholdSurface, CancellationRow)
{
  ThresholdConfig c;
  c.gammas = {5};
  c.aspects = {1.5};
  c.angles = {kPi / 4};
  const ThresholdSurface s = threshold_surface(c);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].weight, 1.0);
}

TEST(ThresholdSurface, SignedWeightBreaksMonotonicity)
{
  ThresholdConfig c = ThresholdConfig::defaults();
  c.mas.raw_lambda = true;
  EXPECT_FALSE(threshold_surface(c).decreasing_in_aspect);
}

TEST(Csv, RoundTrip)
{
  const StatsResult r = run_stats(small_stats(Strategy::maxiou));
  std::stringstream ss;
  write_binned_csv(ss, r.by_aspect);
  const CsvTable t = read_csv(ss);
  EXPECT_EQ(t.schema_version, kSchemaVersion);
  ASSERT_EQ(t.header.size(), 8u);
  EXPECT_EQ(t.header[6], "mean_positives");
  ASSERT_EQ(t.rows.size(), r.by_aspect.bins());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ASSERT_EQ(t.rows[i].size(), 8u);
    EXPECT_EQ(t.rows[i][0], "maxiou");
    EXPECT_EQ(std::stoul(t.rows[i][2]), i);
    EXPECT_EQ(std::stod(t.rows[i][3]), r.by_aspect.edges[i]);
    EXPECT_EQ(std::stoul(t.rows[i][5]), r.by_aspect.gt_count[i]);
    EXPECT_EQ(std::stod(t.rows[i][6]), r.by_aspect.mean_positives[i]);
  }

  std::stringstream th;
  ThresholdConfig tc = ThresholdConfig::defaults();
  tc.gammas = {5};
  const ThresholdSurface s = threshold_surface(tc);
  write_threshold_csv(th, s);
  const CsvTable tt = read_csv(th);
  ASSERT_EQ(tt.rows.size(), s.rows.size());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    EXPECT_EQ(std::stod(tt.rows[i][3]), s.rows[i].weight);
    EXPECT_EQ(std::stod(tt.rows[i][5]), s.rows[i].clamped);
  }

  std::stringstream bt;
  const auto rows = beta_trajectory(BetaTrajectoryConfig{});
  write_beta_csv(bt, rows);
  const CsvTable tb = read_csv(bt);
  ASSERT_EQ(tb.rows.size(), rows.size());
  EXPECT_EQ(tb.header, (std::vector<std::string>{"iteration", "quality", "raw_target", "beta"}));
  EXPECT_EQ(std::stod(tb.rows.back()[3]), rows.back().beta);
}

TEST(RunConfigParse, DefaultsAndOverrides)
{
  const RunConfig d = parse_run_config_text("{}");
  EXPECT_EQ(d.seed, 0u);
  EXPECT_EQ(d.assigners.mas.gamma, 5.0);
  const RunConfig c = parse_run_config_text(
    R"({"seed": 9, "strategy": "maxiou", "mas": {"gamma": 3, "lambda_mode": "constant_one"},
        "anchors": {"strides": [16, 32]}, "stats": {"scenes": 3, "scene": {"image_width": 900}},
        "loss_check": {"schedule": "constant", "beta": {"mode": "kth_smallest", "k": 2}}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.strategy, Strategy::maxiou);
  EXPECT_EQ(c.assigners.mas.lambda_mode, LambdaMode::constant_one);
  EXPECT_EQ(c.stats.assigners.mas.gamma, 3.0);
  EXPECT_EQ(c.stats.seed, 9u);
  EXPECT_EQ(c.stats.strategy, Strategy::maxiou);
  EXPECT_EQ(c.stats.anchors.strides, (std::vector<double>{16, 32}));
  EXPECT_EQ(c.stats.scene.image_width, 900.0);
  EXPECT_EQ(c.stats.scene.image_height, 1536.0);
  EXPECT_EQ(c.loss_check.trajectory.schedule, QualitySchedule::constant);
  EXPECT_EQ(c.loss_check.trajectory.initial.mode, BetaTargetMode::kth_smallest);
  EXPECT_EQ(c.loss_check.trajectory.seed, 9u);
}

TEST(RunConfigParse, RejectsUnknownKeysAndBadValues)
{
  const char * bad[] = {
    R"({"sed": 1})",
    R"({"mas": {"gama": 5}})",
    R"({"stats": {"scene": {"placement": "uniform"}}})",
    R"({"seed": -3})",
    R"({"seed": 1.5})",
    R"({"strategy": "best"})",
    R"({"mas": {"gamma": 0}})",
    R"({"mas": {"use_center_prior": 1}})",
    R"({"maxiou": {"pos_thr": 0.3, "neg_thr": 0.4}})",
    R"({"anchors": {"strides": []}})",
    R"({"loss_check": {"beta": {"momentum": 1.0}}})",
    R"({"cfs": {"shrink": 1.0}})",
    R"([1, 2])",
    R"({"seed": )",
  };
  for (const char * text : bad) {
    EXPECT_THROW(parse_run_config_text(text), InvalidConfig) << text;
  }
}

TEST(RunConfigParse, ShippedConfigsLoad)
{
  EXPECT_NO_THROW(load_run_config(kDataDir + "/../../configs/default.json"));
  EXPECT_NO_THROW(load_run_config(kDataDir + "/quick_config.json"));
  EXPECT_THROW(load_run_config(kDataDir + "/missing.json"), InvalidConfig);
}

TEST(ShippedConfig, MatchesBuiltInDefaults)
{
  const RunConfig f = load_run_config(kDataDir + "/../../configs/default.json");
  RunConfig d;
  sync_run_config(d);
  EXPECT_EQ(f.anchors.strides, d.anchors.strides);
  EXPECT_EQ(f.stats.scenes, d.stats.scenes);
  EXPECT_EQ(f.stats.scene.image_width, d.stats.scene.image_width);
  EXPECT_EQ(f.thresholds.gammas, d.thresholds.gammas);
  EXPECT_EQ(f.loss_check.trajectory.tau, d.loss_check.trajectory.tau);
  EXPECT_EQ(f.assigners.mas.gamma, d.assigners.mas.gamma);
}

TEST(SceneFiles, AnnotationsAndSpecSidecar)
{
  SceneSpec spec;
  spec.object_count = 10;
  spec.seed = 21;
  const Scene scene = generate_scene(spec);
  const std::string base = ::testing::TempDir() + "obbkit_scene";
  write_scene(base, scene, CategoryTable::dota_v1());

  const DotaFile f = parse_dota_file(base + ".txt");
  ASSERT_TRUE(f.errors.empty());
  const ConvertedGts back = records_to_gts(f.records, false);
  ASSERT_EQ(back.gts.size(), scene.gts.size());
  for (std::size_t i = 0; i < back.gts.size(); ++i) {
    EXPECT_NEAR(back.gts[i].box.cx, scene.gts[i].box.cx, 1e-6);
    EXPECT_NEAR(back.gts[i].box.w, scene.gts[i].box.w, 1e-6);
  }
  std::ifstream js(base + ".json");
  const nlohmann::json j = nlohmann::json::parse(js);
  EXPECT_EQ(j["seed"], 21);
  EXPECT_EQ(j["object_count"], 10);
  EXPECT_EQ(j["placement"], "uniform");
}

TEST(AssignFileReport, OnePlane)
{
  std::istringstream in("100.0 100.0 200.0 100.0 200.0 150.0 100.0 150.0 plane 0\n");
  RunConfig cfg;
  const AssignFileReport r = assign_file_report("x.txt", in, cfg, CategoryTable::dota_v1());
  ASSERT_TRUE(r.errors.empty());
  ASSERT_EQ(r.json["gts"].size(), 1u);
  const Json & g = r.json["gts"][0];
  EXPECT_EQ(g["box"], Json::array({150.0, 125.0, 100.0, 50.0, 0.0}));
  EXPECT_EQ(g["aspect"], 2.0);
  for (const char * s : {"maxiou", "atss", "mas"}) {
    EXPECT_GE(g["strategies"][s]["positives"].get<int>(), 1) << s;
  }
  EXPECT_EQ(r.json["schema_version"], kSchemaVersion);
}

TEST(AssignFileReport, EmptyAndMalformed)
{
  std::istringstream empty("");
  const AssignFileReport e = assign_file_report("e", empty, RunConfig{}, CategoryTable::dota_v1());
  EXPECT_TRUE(e.errors.empty());
  EXPECT_EQ(e.json["gts"].size(), 0u);
  std::istringstream bad("gsd:0.1\n1 2 3 plane\n");
  const AssignFileReport b = assign_file_report("b", bad, RunConfig{}, CategoryTable::dota_v1());
  ASSERT_EQ(b.errors.size(), 1u);
  EXPECT_EQ(b.errors[0].line, 2u);
}

TEST(AssignFileReport, Fixture)
{
  std::ifstream in(kDataDir + "/dota_fixture.txt");
  const DotaFile f = parse_dota(in);
  EXPECT_EQ(f.records.size(), 47u);
  EXPECT_EQ(f.metadata_lines, 2u);
  ASSERT_EQ(f.errors.size(), 1u);
  EXPECT_EQ(f.errors[0].line, 21u);
}

TEST(CfsInputs, Readers)
{
  std::ifstream ff(kDataDir + "/features_4x4.txt");
  const FeatureGrid g = read_feature_grid(ff);
  EXPECT_EQ(g.width(), 4u);
  EXPECT_EQ(g.at(3, 2, 0), 11.0);
  std::ifstream fo(kDataDir + "/offsets_sample.txt");
  const auto off = read_offsets(fo);
  EXPECT_EQ(off[0].dx, 0.05);
  EXPECT_EQ(off[8].dy, -0.03);
  std::istringstream bad_header("4 4\n");
  EXPECT_THROW(read_feature_grid(bad_header), InvalidInput);
  std::istringstream short_grid("2 2 1\n1 2 3\n");
  EXPECT_THROW(read_feature_grid(short_grid), InvalidInput);
  std::istringstream word("2 2 1\n1 2 x 4\n");
  EXPECT_THROW(read_feature_grid(word), ParseError);
  std::istringstream eight("0 0\n0 0\n0 0\n0 0\n0 0\n0 0\n0 0\n0 0\n");
  EXPECT_THROW(read_offsets(eight), InvalidInput);
}

TEST(CfsDemo, ZeroOffsetsAndCenterDelta)
{
  std::ifstream ff(kDataDir + "/features_4x4.txt");
  CfsDemoInputs in;
  in.features = read_feature_grid(ff);
  in.box = {12, 12, 10, 4, 0};
  in.offsets.assign(9, {});
  in.kernel = Kernel3x3::center_delta(1);
  in.anchor_cell = {1, 1};
  const Json j = cfs_demo_json(in);
  EXPECT_EQ(j["initial_points"], j["refined_points"]);
  EXPECT_NEAR(j["initial_points"][1][0].get<double>(), 15.5, 1e-12);
  EXPECT_NEAR(j["initial_points"][1][1].get<double>(), 13.4, 1e-12);
  EXPECT_NEAR(j["shrunk_box"][2].get<double>(), 7.0, 1e-12);
  // Center point (12, 12) is cell (1.5, 1.5): mean of 5, 6, 9, 10.
  EXPECT_DOUBLE_EQ(j["output"].get<double>(), 7.5);
  EXPECT_EQ(j["offset_field"].size(), 9u);
}

}  // namespace
}  // namespace obbkit
