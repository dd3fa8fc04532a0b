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

// obbkit command-line tool.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 self-check failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "obbkit/config.hpp"
#include "obbkit/json_reports.hpp"
#include "obbkit/reports.hpp"

namespace fs = std::filesystem;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitSelfCheck = 4;

struct DataError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct GlobalOptions
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string strategy;
  std::optional<double> gamma;
  bool raw_lambda{false};
};

obbkit::RunConfig resolve_config(const GlobalOptions & g)
{
  obbkit::RunConfig cfg =
    g.config.empty() ? obbkit::RunConfig{} : obbkit::load_run_config(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
  }
  if (!g.strategy.empty()) {
    if (g.strategy == "maxiou") {
      cfg.strategy = obbkit::Strategy::maxiou;
    } else if (g.strategy == "atss") {
      cfg.strategy = obbkit::Strategy::atss;
    } else {
      cfg.strategy = obbkit::Strategy::mas;
    }
  }
  if (g.gamma) {
    cfg.assigners.mas.gamma = *g.gamma;
    cfg.thresholds.gammas = {*g.gamma};
  }
  if (g.raw_lambda) {
    cfg.assigners.mas.raw_lambda = true;
  }
  obbkit::sync_run_config(cfg);
  cfg.validate();
  return cfg;
}

fs::path out_dir(const GlobalOptions & g)
{
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

void write_file(const fs::path & path, const std::string & text)
{
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
}

std::string dump(const obbkit::Json & j)
{
  return j.dump(2) + "\n";
}

/// JSON to stdout, or to <out>/<name> when --out was given.
void emit_json(const GlobalOptions & g, const std::string & name, const obbkit::Json & j)
{
  if (g.out.empty()) {
    std::cout << dump(j);
  } else {
    write_file(out_dir(g) / name, dump(j));
  }
}

std::ifstream open_input(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  return in;
}

// ---------------------------------------------------------------------------

int cmd_stats(const GlobalOptions & g, bool compare)
{
  const obbkit::RunConfig cfg = resolve_config(g);
  const fs::path dir = out_dir(g);
  std::vector<obbkit::Strategy> strategies{cfg.strategy};
  if (compare) {
    strategies = {obbkit::Strategy::maxiou, obbkit::Strategy::atss, obbkit::Strategy::mas};
  }
  const obbkit::StatsScenes scenes = obbkit::sweep_scenes(cfg.stats);
  obbkit::Json summary = obbkit::Json::object();
  for (const obbkit::Strategy s : strategies) {
    obbkit::StatsConfig sc = cfg.stats;
    sc.strategy = s;
    const obbkit::StatsResult r = obbkit::run_stats(sc, scenes);
    const std::string tag = obbkit::to_string(s);
    std::ostringstream aspect_csv;
    obbkit::write_binned_csv(aspect_csv, r.by_aspect);
    write_file(dir / ("stats_" + tag + "_aspect.csv"), aspect_csv.str());
    std::ostringstream angle_csv;
    obbkit::write_binned_csv(angle_csv, r.by_angle);
    write_file(dir / ("stats_" + tag + "_angle.csv"), angle_csv.str());
    const obbkit::Json j = obbkit::stats_json(sc, r);
    write_file(dir / ("stats_" + tag + ".json"), dump(j));
    summary[tag] = {
      {"total_gts", r.total_gts}, {"zero_positive_gts", r.zero_positive_gts},
      {"mean_positives", r.mean_positives},
      {"aspect_trend_spearman", j["aspect_trend_spearman"]}};
    std::printf(
      "%-6s gts=%zu zero_positive=%zu mean_positives=%.4f\n", tag.c_str(), r.total_gts,
      r.zero_positive_gts, r.mean_positives);
  }
  if (compare) {
    write_file(
      dir / "stats_compare.json",
      dump({{"schema_version", obbkit::kSchemaVersion}, {"seed", cfg.seed},
          {"strategies", summary}}));
  }
  return kExitOk;
}

int cmd_thresholds(const GlobalOptions & g)
{
  const obbkit::RunConfig cfg = resolve_config(g);
  const fs::path dir = out_dir(g);
  const obbkit::ThresholdSurface s = obbkit::threshold_surface(cfg.thresholds);
  std::ostringstream csv;
  obbkit::write_threshold_csv(csv, s);
  write_file(dir / "thresholds.csv", csv.str());
  write_file(dir / "thresholds.json", dump(obbkit::threshold_json(cfg.thresholds, s)));
  std::printf(
    "rows=%zu decreasing_in_aspect=%s peak_at_equilibrium=%s\n", s.rows.size(),
    s.decreasing_in_aspect ? "yes" : "no", s.peak_at_equilibrium ? "yes" : "no");
  if (!s.decreasing_in_aspect || !s.peak_at_equilibrium) {
    std::cerr << "thresholds: surface violates the expected monotonicity\n";
    return kExitSelfCheck;
  }
  return kExitOk;
}

int cmd_loss_check(const GlobalOptions & g)
{
  const obbkit::RunConfig cfg = resolve_config(g);
  const fs::path dir = out_dir(g);
  const auto & lc = cfg.loss_check;
  const obbkit::GradientCheck checks[] = {
    obbkit::check_smooth_l1_gradient(lc.gradient_points, cfg.seed, lc.step, lc.tolerance),
    obbkit::check_focal_gradient(lc.gradient_points, cfg.seed + 1, lc.step, lc.tolerance)};
  const auto rows = obbkit::beta_trajectory(lc.trajectory);
  std::ostringstream csv;
  obbkit::write_beta_csv(csv, rows);
  write_file(dir / "beta_trajectory.csv", csv.str());

  bool ok = true;
  obbkit::Json grads = obbkit::Json::array();
  for (const auto & c : checks) {
    grads.push_back(obbkit::gradient_json(c, lc.tolerance));
    std::printf("%-9s points=%zu max_rel_error=%.3e\n", c.name.c_str(), c.points, c.max_rel_error);
    if (!(c.max_rel_error < lc.tolerance)) {
      ok = false;
      std::cerr << c.name << ": gradient mismatch at";
      for (const double x : c.offenders) {
        std::cerr << ' ' << obbkit::format_double(x);
      }
      std::cerr << '\n';
    }
  }
  const double final_beta = rows.empty() ? lc.trajectory.initial.beta : rows.back().beta;
  write_file(
    dir / "loss_check.json",
    dump({{"schema_version", obbkit::kSchemaVersion}, {"seed", cfg.seed},
        {"gradients", grads}, {"beta_iterations", rows.size()}, {"final_beta", final_beta}}));
  std::printf("beta: iterations=%zu final=%.6f\n", rows.size(), final_beta);
  return ok ? kExitOk : kExitSelfCheck;
}

int cmd_iou(const std::vector<double> & v, std::size_t oracle, const GlobalOptions & g)
{
  const obbkit::RunConfig cfg = resolve_config(g);
  for (const double x : v) {
    if (!std::isfinite(x)) {
      throw obbkit::InvalidInput("iou: arguments must be finite numbers");
    }
  }
  const obbkit::OrientedBox a = obbkit::normalize_obb({v[0], v[1], v[2], v[3], v[4]});
  const obbkit::OrientedBox b = obbkit::normalize_obb({v[5], v[6], v[7], v[8], v[9]});
  std::printf("%.6f\n", obbkit::rotated_iou(a, b));
  if (oracle > 0) {
    std::printf("%.6f\n", obbkit::mc_iou_oracle(a, b, oracle, cfg.seed));
  }
  return kExitOk;
}

int cmd_assign_file(
  const std::string & path, const std::string & categories, bool include_difficult,
  const std::vector<double> & image_size, const GlobalOptions & g)
{
  obbkit::RunConfig cfg = resolve_config(g);
  if (include_difficult) {
    cfg.assign_file.include_difficult = true;
  }
  if (!image_size.empty()) {
    cfg.assign_file.image_width = image_size[0];
    cfg.assign_file.image_height = image_size[1];
    cfg.validate();
  }
  if (!categories.empty()) {
    cfg.assign_file.categories = categories;
  }
  obbkit::CategoryTable table = obbkit::CategoryTable::dota_v1();
  if (!cfg.assign_file.categories.empty()) {
    auto in = open_input(cfg.assign_file.categories);
    table = obbkit::CategoryTable::load(in);
  }
  auto in = open_input(path);
  const obbkit::AssignFileReport r = obbkit::assign_file_report(path, in, cfg, table);
  if (!r.errors.empty()) {
    for (const auto & e : r.errors) {
      std::cerr << path << ": " << e.message << '\n';
    }
    return kExitData;
  }
  emit_json(g, "assign_report.json", r.json);
  return kExitOk;
}

struct CfsArgs
{
  std::string features;
  std::string offsets;
  std::string weights;
  std::vector<double> box;
  std::vector<double> p0;
  std::optional<double> stride;
  std::optional<double> shrink;
};

int cmd_cfs_demo(const CfsArgs & a, const GlobalOptions & g)
{
  const obbkit::RunConfig cfg = resolve_config(g);
  obbkit::CfsDemoInputs in;
  {
    auto f = open_input(a.features);
    in.features = obbkit::read_feature_grid(f);
  }
  if (a.offsets.empty()) {
    in.offsets.assign(obbkit::kPatternSize, {});
  } else {
    auto f = open_input(a.offsets);
    in.offsets = obbkit::read_offsets(f);
  }
  if (a.weights.empty()) {
    in.kernel = obbkit::Kernel3x3::center_delta(in.features.channels());
  } else {
    auto f = open_input(a.weights);
    in.kernel = obbkit::read_kernel(f, in.features.channels());
  }
  for (const double x : a.box) {
    if (!std::isfinite(x)) {
      throw obbkit::InvalidInput("cfs-demo: box values must be finite");
    }
  }
  in.box = obbkit::normalize_obb({a.box[0], a.box[1], a.box[2], a.box[3], a.box[4]});
  in.stride = a.stride.value_or(cfg.cfs.stride);
  in.shrink = a.shrink.value_or(cfg.cfs.shrink);
  if (!(in.stride > 0.0)) {
    throw obbkit::InvalidConfig("cfs-demo: stride must be positive");
  }
  in.anchor_cell = a.p0.empty() ?
    obbkit::Point2{std::floor(in.box.cx / in.stride), std::floor(in.box.cy / in.stride)} :
    obbkit::Point2{a.p0[0], a.p0[1]};
  emit_json(g, "cfs_demo.json", obbkit::cfs_demo_json(in));
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Oriented-box label assignment, sampling and loss toolkit"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--strategy", g.strategy, "Assignment strategy")
  ->check(CLI::IsMember({"maxiou", "atss", "mas"}));
  app.add_option("--gamma", g.gamma, "MAS gamma");
  app.add_flag("--raw-lambda", g.raw_lambda, "Use the signed angle weight (debug)");

  bool compare = false;
  auto * stats = app.add_subcommand("stats", "Positive-sample statistics over shape sweeps");
  stats->add_flag("--compare", compare, "Run maxiou, atss and mas on the same scenes");

  auto * thresholds = app.add_subcommand("thresholds", "Threshold surfaces over aspect x angle");
  auto * loss_check = app.add_subcommand("loss-check", "Gradient checks and a beta trajectory");

  std::vector<double> iou_args;
  std::size_t oracle = 0;
  auto * iou = app.add_subcommand("iou", "IoU of two boxes given as cx cy w h theta");
  iou->add_option("boxes", iou_args, "cx1 cy1 w1 h1 theta1 cx2 cy2 w2 h2 theta2")
  ->expected(10)->required();
  iou->add_option("--oracle", oracle, "Also print a Monte-Carlo estimate with N samples");

  std::string annotation;
  std::string categories;
  bool include_difficult = false;
  std::vector<double> image_size;
  auto * assign = app.add_subcommand("assign-file", "Assign anchors for a DOTA annotation file");
  assign->add_option("file", annotation, "Annotation file")->required();
  assign->add_option("--categories", categories, "Category list, one name per line");
  assign->add_flag("--include-difficult", include_difficult, "Keep difficult objects");
  assign->add_option("--image-size", image_size, "Image width and height")->expected(2);

  CfsArgs cfs;
  auto * cfs_demo = app.add_subcommand("cfs-demo", "Sampling pattern and deformable sample dump");
  cfs_demo->add_option("--features", cfs.features, "Feature file (W H C header, values)")
  ->required();
  cfs_demo->add_option("--box", cfs.box, "cx cy w h theta in image pixels")->expected(5)
  ->required();
  cfs_demo->add_option("--offsets", cfs.offsets, "Nine 'dx dy' lines (default zeros)");
  cfs_demo->add_option("--weights", cfs.weights, "9 x C kernel weights (default center delta)");
  cfs_demo->add_option("--p0", cfs.p0, "Anchor cell x y")->expected(2);
  cfs_demo->add_option("--stride", cfs.stride, "Feature stride in pixels");
  cfs_demo->add_option("--shrink", cfs.shrink, "Shrink factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (stats->parsed()) {
      return cmd_stats(g, compare);
    }
    if (thresholds->parsed()) {
      return cmd_thresholds(g);
    }
    if (loss_check->parsed()) {
      return cmd_loss_check(g);
    }
    if (iou->parsed()) {
      return cmd_iou(iou_args, oracle, g);
    }
    if (assign->parsed()) {
      return cmd_assign_file(annotation, categories, include_difficult, image_size, g);
    }
    if (cfs_demo->parsed()) {
      return cmd_cfs_demo(cfs, g);
    }
  } catch (const obbkit::InvalidConfig & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const obbkit::Error & e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError & e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
