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
/// Report builders behind the command-line tool: positive-sample statistics
/// over shape sweeps, threshold surfaces, loss self-checks with a beta
/// trajectory, and the CSV emitters they share. Everything here is
/// deterministic for a fixed configuration.

#ifndef OBBKIT__REPORTS_HPP_
#define OBBKIT__REPORTS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "obbkit/assignment.hpp"
#include "obbkit/geometry.hpp"
#include "obbkit/losses.hpp"
#include "obbkit/random.hpp"
#include "obbkit/scene.hpp"

namespace obbkit
{

inline constexpr int kSchemaVersion = 1;

enum class Strategy
{
  maxiou,
  atss,
  mas,
};

inline const char * to_string(Strategy s)
{
  switch (s) {
    case Strategy::maxiou: return "maxiou";
    case Strategy::atss: return "atss";
    case Strategy::mas: return "mas";
  }
  return "?";
}

struct AnchorConfig
{
  std::vector<double> strides{8, 16, 32, 64, 128};
  double scale_multiplier{4.0};
};

struct AssignerConfig
{
  MasConfig mas;
  AtssConfig atss;
  MaxIouConfig maxiou;
};

inline AssignmentResult run_assigner(
  Strategy s, const AnchorGrid & grid, std::span<const GroundTruth> gts,
  const AssignerConfig & cfg)
{
  switch (s) {
    case Strategy::maxiou: return assign_maxiou(grid, gts, cfg.maxiou);
    case Strategy::atss: return assign_atss(grid, gts, cfg.atss);
    case Strategy::mas: return assign_mas(grid, gts, cfg.mas);
  }
  throw InvalidConfig("unknown strategy");
}

// ---------------------------------------------------------------------------
// Statistics helpers

/// Ranks with ties averaged, 1-based.
inline std::vector<double> average_ranks(std::span<const double> v)
{
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {return v[a] < v[b];});
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size(); ) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
      ++j;
    }
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[idx[k]] = r;
    }
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson on average ranks). NaN if either side
/// is constant.
inline double spearman_rho(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("spearman_rho: need two equally sized samples of length >= 2");
  }
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Positive-sample statistics

struct BinnedStats
{
  std::string axis;
  std::string strategy;
  /// bins + 1 ascending edges; bins are [edge_i, edge_{i+1}), the last one closed.
  std::vector<double> edges;
  std::vector<std::size_t> gt_count;
  std::vector<double> mean_positives;
  /// Ground truths without a threshold-qualified positive (fallback only).
  std::vector<std::size_t> zero_positive_gts;

  std::size_t bins() const {return gt_count.size();}
};

inline std::vector<double> linspace_edges(double lo, double hi, std::size_t bins)
{
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  e.back() = hi;
  return e;
}

/// Bin index for v, or bins() if v lies outside the edges.
inline std::size_t bin_of(std::span<const double> edges, double v)
{
  const std::size_t bins = edges.size() - 1;
  if (v < edges.front() || v > edges.back()) {
    return bins;
  }
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  const auto i = static_cast<std::size_t>(it - edges.begin());
  return std::min(i == 0 ? 0 : i - 1, bins - 1);
}

struct GtRecord
{
  double aspect{1.0};
  double angle{0.0};
  std::size_t positives{0};
  bool fallback_used{false};
};

inline BinnedStats bin_records(
  std::span<const GtRecord> recs, const std::string & axis, const std::string & strategy,
  std::vector<double> edges)
{
  BinnedStats b;
  b.axis = axis;
  b.strategy = strategy;
  const std::size_t n = edges.size() - 1;
  b.edges = std::move(edges);
  b.gt_count.assign(n, 0);
  b.mean_positives.assign(n, 0.0);
  b.zero_positive_gts.assign(n, 0);
  for (const GtRecord & r : recs) {
    const std::size_t i = bin_of(b.edges, axis == "aspect" ? r.aspect : r.angle);
    if (i >= n) {
      continue;
    }
    ++b.gt_count[i];
    b.mean_positives[i] += static_cast<double>(r.positives);
    b.zero_positive_gts[i] += r.fallback_used ? 1 : 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (b.gt_count[i] > 0) {
      b.mean_positives[i] /= static_cast<double>(b.gt_count[i]);
    }
  }
  return b;
}

struct StatsConfig
{
  Strategy strategy{Strategy::mas};
  std::size_t scenes{64};
  std::uint64_t seed{0};
  /// Aspect sweep; its aspect range also defines the aspect bins.
  SceneSpec scene;
  /// The angle table comes from a second sweep restricted to near-square
  /// objects, since elongated ones rarely clear a fixed IoU bar at any angle.
  double angle_aspect_min{1.0};
  double angle_aspect_max{1.5};
  AnchorConfig anchors;
  AssignerConfig assigners;
  std::size_t aspect_bins{12};
  std::size_t angle_bins{16};

  /// One object per (aspect, angle) cell on a 2048 x 1536 canvas.
  static StatsConfig defaults()
  {
    StatsConfig c;
    c.scene.placement = Placement::grid_sweep;
    c.scene.image_width = 2048;
    c.scene.image_height = 1536;
    c.scene.aspect_min = 1.0;
    c.scene.aspect_max = 12.0;
    c.scene.sweep_aspect_bins = 12;
    c.scene.sweep_angle_bins = 16;
    return c;
  }

  void validate() const
  {
    scene.validate();
    if (scenes == 0 || aspect_bins == 0 || angle_bins == 0) {
      throw InvalidConfig("stats: scenes and bin counts must be positive");
    }
    if (!(angle_aspect_min >= 1.0) || !(angle_aspect_max >= angle_aspect_min)) {
      throw InvalidConfig("stats: angle sweep aspect range must satisfy 1 <= min <= max");
    }
    assigners.mas.validate();
    assigners.maxiou.validate();
  }
};

struct StatsScenes
{
  std::vector<Scene> aspect_sweep;
  std::vector<Scene> angle_sweep;
};

struct StatsResult
{
  BinnedStats by_aspect;
  BinnedStats by_angle;
  std::vector<GtRecord> aspect_records;
  std::vector<GtRecord> angle_records;
  std::size_t total_gts{0};
  std::size_t zero_positive_gts{0};
  double mean_positives{0.0};
};

/// Scene i of the aspect sweep uses seed + 2i, of the angle sweep seed + 2i + 1.
inline StatsScenes sweep_scenes(const StatsConfig & cfg)
{
  cfg.validate();
  StatsScenes out;
  for (std::size_t i = 0; i < cfg.scenes; ++i) {
    SceneSpec spec = cfg.scene;
    spec.seed = cfg.seed + 2 * i;
    out.aspect_sweep.push_back(generate_scene(spec));
    spec.seed = cfg.seed + 2 * i + 1;
    spec.aspect_min = cfg.angle_aspect_min;
    spec.aspect_max = cfg.angle_aspect_max;
    out.angle_sweep.push_back(generate_scene(spec));
  }
  return out;
}

inline std::vector<GtRecord> assignment_records(
  const StatsConfig & cfg, const std::vector<Scene> & scenes)
{
  std::vector<GtRecord> recs;
  for (const Scene & scene : scenes) {
    const AnchorGrid grid = generate_anchors(
      scene.spec.image_width, scene.spec.image_height, cfg.anchors.strides,
      cfg.anchors.scale_multiplier);
    const AssignmentResult a = run_assigner(cfg.strategy, grid, scene.gts, cfg.assigners);
    for (std::size_t g = 0; g < scene.gts.size(); ++g) {
      recs.push_back(
        {scene.gts[g].aspect, scene.gts[g].angle, a.per_gt[g].positive_count,
          a.per_gt[g].fallback_used});
    }
  }
  return recs;
}

inline StatsResult run_stats(const StatsConfig & cfg, const StatsScenes & scenes)
{
  StatsResult res;
  res.aspect_records = assignment_records(cfg, scenes.aspect_sweep);
  res.angle_records = assignment_records(cfg, scenes.angle_sweep);
  const std::string tag = to_string(cfg.strategy);
  res.by_aspect = bin_records(
    res.aspect_records, "aspect", tag,
    linspace_edges(cfg.scene.aspect_min, cfg.scene.aspect_max, cfg.aspect_bins));
  res.by_angle = bin_records(
    res.angle_records, "angle", tag, linspace_edges(-kPi / 4, 3 * kPi / 4, cfg.angle_bins));
  double sum = 0.0;
  for (const auto * recs : {&res.aspect_records, &res.angle_records}) {
    for (const GtRecord & r : *recs) {
      res.zero_positive_gts += r.fallback_used ? 1 : 0;
      sum += static_cast<double>(r.positives);
      ++res.total_gts;
    }
  }
  res.mean_positives = res.total_gts ? sum / static_cast<double>(res.total_gts) : 0.0;
  return res;
}

inline StatsResult run_stats(const StatsConfig & cfg)
{
  return run_stats(cfg, sweep_scenes(cfg));
}

/// Spearman rho between bin index and per-bin mean over non-empty bins.
inline double bin_trend(const BinnedStats & b)
{
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < b.bins(); ++i) {
    if (b.gt_count[i] > 0) {
      x.push_back(static_cast<double>(i));
      y.push_back(b.mean_positives[i]);
    }
  }
  return spearman_rho(x, y);
}

inline double bin_center(const BinnedStats & b, std::size_t i)
{
  return 0.5 * (b.edges[i] + b.edges[i + 1]);
}

/// Angular distance from the nearest equilibrium angle {0, pi/2}.
inline double equilibrium_distance(double theta)
{
  const double t = wrap_long_edge_angle(theta);
  return std::min(std::abs(t), std::abs(t - kPi / 2));
}

struct AnglePeriodicity
{
  std::size_t argmax_bin{0};
  std::size_t argmin_bin{0};
  /// argmax bin touches 0 or pi/2.
  bool max_at_equilibrium{false};
  /// argmin bin touches -pi/4, pi/4 or 3pi/4.
  bool min_at_diagonal{false};
};

inline AnglePeriodicity angle_periodicity(const BinnedStats & b)
{
  AnglePeriodicity p;
  double best = -1.0;
  double worst = 1e300;
  for (std::size_t i = 0; i < b.bins(); ++i) {
    if (b.gt_count[i] == 0) {
      continue;
    }
    if (b.mean_positives[i] > best) {
      best = b.mean_positives[i];
      p.argmax_bin = i;
    }
    if (b.mean_positives[i] < worst) {
      worst = b.mean_positives[i];
      p.argmin_bin = i;
    }
  }
  const auto touches = [&](std::size_t i, std::initializer_list<double> marks) {
      const double lo = b.edges[i] - 1e-12;
      const double hi = b.edges[i + 1] + 1e-12;
      for (const double m : marks) {
        if (m >= lo && m <= hi) {
          return true;
        }
      }
      return false;
    };
  p.max_at_equilibrium = touches(p.argmax_bin, {0.0, kPi / 2});
  p.min_at_diagonal = touches(p.argmin_bin, {-kPi / 4, kPi / 4, 3 * kPi / 4});
  return p;
}

// ---------------------------------------------------------------------------
// Threshold surfaces

struct ThresholdRow
{
  double gamma{0.0};
  double aspect{0.0};
  double angle{0.0};
  double weight{0.0};
  double raw{0.0};
  double clamped{0.0};
};

struct ThresholdConfig
{
  std::vector<double> gammas{3, 4, 5, 6, 7};
  std::vector<double> aspects;
  std::vector<double> angles;
  std::vector<double> candidate_ious{0.3, 0.5, 0.7};
  MasConfig mas;

  /// Aspect 1..12 in steps of 0.5, angle [-pi/4, 3pi/4) in steps of pi/16.
  static ThresholdConfig defaults()
  {
    ThresholdConfig c;
    for (int i = 0; i <= 22; ++i) {
      c.aspects.push_back(1.0 + 0.5 * i);
    }
    for (int j = 0; j < 16; ++j) {
      c.angles.push_back(-kPi / 4 + kPi * j / 16.0);
    }
    return c;
  }
};

struct ThresholdSurface
{
  std::vector<ThresholdRow> rows;
  /// Every fixed (gamma, angle) column strictly decreasing in aspect.
  bool decreasing_in_aspect{true};
  /// Every fixed (gamma, aspect) row peaks at the grid angle nearest 0 or pi/2.
  bool peak_at_equilibrium{true};
};

/// Rows ordered gamma-major, then aspect, then angle. Checks use the
/// pre-clamp threshold.
inline ThresholdSurface threshold_surface(const ThresholdConfig & cfg)
{
  ThresholdSurface s;
  const IouStats st = iou_statistics(cfg.candidate_ious);
  double nearest = 1e300;
  for (const double t : cfg.angles) {
    nearest = std::min(nearest, equilibrium_distance(t));
  }
  for (const double gamma : cfg.gammas) {
    MasConfig mc = cfg.mas;
    mc.gamma = gamma;
    mc.validate();
    std::vector<double> prev_col(cfg.angles.size(), 1e300);
    for (const double a : cfg.aspects) {
      double row_max = -1.0;
      double row_max_dist = 0.0;
      for (std::size_t j = 0; j < cfg.angles.size(); ++j) {
        const double t = cfg.angles[j];
        ThresholdRow r;
        r.gamma = gamma;
        r.aspect = a;
        r.angle = t;
        r.weight = shape_weight(a, t, gamma, mc.lambda_mode, mc.raw_lambda);
        r.raw = r.weight * st.init_threshold;
        r.clamped = std::clamp(r.raw, mc.clamp_min, mc.clamp_max);
        s.rows.push_back(r);
        if (!(r.raw < prev_col[j])) {
          s.decreasing_in_aspect = false;
        }
        prev_col[j] = r.raw;
        if (r.raw > row_max) {
          row_max = r.raw;
          row_max_dist = equilibrium_distance(t);
        }
      }
      if (std::abs(row_max_dist - nearest) > 1e-12) {
        s.peak_at_equilibrium = false;
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Loss self-checks

struct GradientCheck
{
  std::string name;
  std::size_t points{0};
  double max_rel_error{0.0};
  /// Offending inputs (x or p), at most ten.
  std::vector<double> offenders;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12), central
/// differences with the given step.
inline double relative_error(double analytic, double numeric)
{
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-12});
}

inline GradientCheck check_smooth_l1_gradient(
  std::size_t points, std::uint64_t seed, double step = 1e-6, double tol = 1e-5)
{
  GradientCheck c;
  c.name = "smooth_l1";
  Rng rng(seed);
  while (c.points < points) {
    const double beta = rng.uniform(0.02, 2.0);
    const double x = rng.uniform(-3.0, 3.0);
    if (std::abs(std::abs(x) - beta) < 1e-4) {
      continue;
    }
    const double numeric = (smooth_l1(x + step, beta) - smooth_l1(x - step, beta)) / (2 * step);
    const double err = relative_error(smooth_l1_grad(x, beta), numeric);
    c.max_rel_error = std::max(c.max_rel_error, err);
    if (err >= tol && c.offenders.size() < 10) {
      c.offenders.push_back(x);
    }
    ++c.points;
  }
  return c;
}

inline GradientCheck check_focal_gradient(
  std::size_t points, std::uint64_t seed, double step = 1e-6, double tol = 1e-5)
{
  GradientCheck c;
  c.name = "focal";
  Rng rng(seed);
  for (; c.points < points; ++c.points) {
    const FocalParams fp{rng.uniform(0.05, 0.95), rng.uniform(0.0, 3.0)};
    const double p = rng.uniform(0.01, 0.99);
    const bool t = rng.uniform01() < 0.5;
    const double numeric = (focal_loss(p + step, t, fp) - focal_loss(p - step, t, fp)) /
      (2 * step);
    const double err = relative_error(focal_loss_grad(p, t, fp), numeric);
    c.max_rel_error = std::max(c.max_rel_error, err);
    if (err >= tol && c.offenders.size() < 10) {
      c.offenders.push_back(p);
    }
  }
  return c;
}

enum class QualitySchedule
{
  improving,
  constant,
};

struct BetaTrajectoryConfig
{
  std::size_t iterations{200};
  /// Time constant of s(t) = 1 - 0.5 exp(-t / tau).
  double tau{30.0};
  std::size_t proposals{64};
  QualitySchedule schedule{QualitySchedule::improving};
  /// Quality level for the constant schedule.
  double constant_quality{1.0};
  BetaState initial;
  std::uint64_t seed{0};
};

struct BetaRow
{
  std::size_t iteration{0};
  double quality{0.0};
  double raw_target{0.0};
  double beta{0.0};
};

/// Emulated training run: at iteration t the proposals have similarity
/// 1 - (1 - s(t)) * q_i with spreads q_i in (0, 2) drawn once from the seed,
/// so the median mismatch tracks 1 - s(t).
inline std::vector<BetaRow> beta_trajectory(const BetaTrajectoryConfig & cfg)
{
  cfg.initial.validate();
  if (cfg.proposals == 0 || !(cfg.tau > 0.0)) {
    throw InvalidConfig("beta trajectory: proposals and tau must be positive");
  }
  Rng rng(cfg.seed);
  std::vector<double> spread(cfg.proposals);
  for (double & q : spread) {
    q = rng.uniform(0.0, 2.0);
  }
  std::vector<BetaRow> rows;
  BetaState state = cfg.initial;
  std::vector<double> sims(cfg.proposals);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const double s = cfg.schedule == QualitySchedule::improving ?
      1.0 - 0.5 * std::exp(-static_cast<double>(t) / cfg.tau) : cfg.constant_quality;
    for (std::size_t i = 0; i < cfg.proposals; ++i) {
      sims[i] = std::clamp(1.0 - (1.0 - s) * spread[i], 1e-6, 1.0);
    }
    state = update_beta(state, sims);
    rows.push_back({t, s, state.last_target, state.beta});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

/// Writes a `# schema_version=N` line, the header, then rows.
class CsvWriter
{
public:
  CsvWriter(std::ostream & out, std::span<const std::string> header)
  : out_(out)
  {
    out_ << "# schema_version=" << kSchemaVersion << '\n';
    write_row(header);
  }

  void write_row(std::span<const std::string> cells)
  {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i ? "," : "") << cells[i];
    }
    out_ << '\n';
  }

private:
  std::ostream & out_;
};

inline void write_binned_csv(std::ostream & out, const BinnedStats & b)
{
  const std::vector<std::string> header{
    "strategy", "axis", "bin", "lo", "hi", "gt_count", "mean_positives", "zero_positive_gts"};
  CsvWriter w(out, header);
  for (std::size_t i = 0; i < b.bins(); ++i) {
    w.write_row(
      std::vector<std::string>{
        b.strategy, b.axis, std::to_string(i), format_double(b.edges[i]),
        format_double(b.edges[i + 1]), std::to_string(b.gt_count[i]),
        format_double(b.mean_positives[i]), std::to_string(b.zero_positive_gts[i])});
  }
}

inline void write_threshold_csv(std::ostream & out, const ThresholdSurface & s)
{
  const std::vector<std::string> header{
    "gamma", "aspect", "angle", "f", "threshold_raw", "threshold"};
  CsvWriter w(out, header);
  for (const ThresholdRow & r : s.rows) {
    w.write_row(
      std::vector<std::string>{
        format_double(r.gamma), format_double(r.aspect), format_double(r.angle),
        format_double(r.weight), format_double(r.raw), format_double(r.clamped)});
  }
}

inline void write_beta_csv(std::ostream & out, std::span<const BetaRow> rows)
{
  const std::vector<std::string> header{"iteration", "quality", "raw_target", "beta"};
  CsvWriter w(out, header);
  for (const BetaRow & r : rows) {
    w.write_row(
      std::vector<std::string>{
        std::to_string(r.iteration), format_double(r.quality), format_double(r.raw_target),
        format_double(r.beta)});
  }
}

struct CsvTable
{
  int schema_version{0};
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads what CsvWriter produces (no quoting).
inline CsvTable read_csv(std::istream & in)
{
  CsvTable t;
  std::string line;
  const auto split = [](const std::string & s) {
      std::vector<std::string> cells;
      std::size_t start = 0;
      for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ',') {
          cells.push_back(s.substr(start, i - start));
          start = i + 1;
        }
      }
      return cells;
    };
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (line.rfind("# schema_version=", 0) == 0) {
      t.schema_version = std::stoi(line.substr(17));
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

}  // namespace obbkit

#endif  // OBBKIT__REPORTS_HPP_
