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
/// JSON run configuration for the command-line tool. Parsing is strict:
/// unknown keys and mistyped values raise InvalidConfig naming the path.

#ifndef OBBKIT__CONFIG_HPP_
#define OBBKIT__CONFIG_HPP_

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <type_traits>
#include <utility>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "obbkit/reports.hpp"

namespace obbkit
{

struct AssignFileConfig
{
  bool include_difficult{false};
  double image_width{1024.0};
  double image_height{1024.0};
  /// Optional category list file; empty means the built-in DOTA v1.0 table.
  std::string categories;
  UnknownCategory unknown_category{UnknownCategory::error};
};

struct CfsConfig
{
  double shrink{0.3};
  double stride{8.0};
};

struct LossCheckConfig
{
  std::size_t gradient_points{1000};
  double step{1e-6};
  double tolerance{1e-5};
  BetaTrajectoryConfig trajectory;
};

struct RunConfig
{
  std::uint64_t seed{0};
  Strategy strategy{Strategy::mas};
  AnchorConfig anchors;
  AssignerConfig assigners;
  StatsConfig stats{StatsConfig::defaults()};
  ThresholdConfig thresholds{ThresholdConfig::defaults()};
  LossCheckConfig loss_check;
  AssignFileConfig assign_file;
  CfsConfig cfs;

  void validate() const
  {
    if (anchors.strides.empty()) {
      throw InvalidConfig("anchors.strides must not be empty");
    }
    assigners.mas.validate();
    assigners.maxiou.validate();
    if (assigners.atss.candidate_k < 1) {
      throw InvalidConfig("atss.candidate_k must be >= 1");
    }
    stats.validate();
    if (thresholds.gammas.empty() || thresholds.aspects.empty() || thresholds.angles.empty() ||
      thresholds.candidate_ious.empty())
    {
      throw InvalidConfig("thresholds: grids and candidate_ious must be non-empty");
    }
    for (const double a : thresholds.aspects) {
      if (!(a >= 1.0)) {
        throw InvalidConfig("thresholds.aspects must be >= 1");
      }
    }
    loss_check.trajectory.initial.validate();
    if (!(loss_check.step > 0.0) || !(loss_check.tolerance > 0.0) ||
      loss_check.gradient_points == 0)
    {
      throw InvalidConfig("loss_check: step, tolerance and gradient_points must be positive");
    }
    if (!(loss_check.trajectory.tau > 0.0) || loss_check.trajectory.proposals == 0) {
      throw InvalidConfig("loss_check: tau and proposals must be positive");
    }
    if (!(assign_file.image_width > 0.0) || !(assign_file.image_height > 0.0)) {
      throw InvalidConfig("assign_file: image size must be positive");
    }
    if (!(cfs.shrink >= 0.0 && cfs.shrink < 1.0) || !(cfs.stride > 0.0)) {
      throw InvalidConfig("cfs: shrink must lie in [0, 1) and stride be positive");
    }
  }
};

namespace detail
{

/// Reads members of one JSON object and remembers which were consumed.
class ObjectReader
{
public:
  ObjectReader(const nlohmann::json & j, std::string path)
  : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) {
      throw InvalidConfig(where() + " must be an object");
    }
  }

  template<class T>
  void read(const char * key, T & out)
  {
    const auto it = j_.find(key);
    if (it == j_.end()) {
      return;
    }
    seen_.emplace_back(key);
    if (!type_ok(*it, out)) {
      throw InvalidConfig(child(key) + ": wrong type");
    }
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception &) {
      throw InvalidConfig(child(key) + ": wrong type");
    }
  }

  /// Nested object, or nullptr when absent.
  const nlohmann::json * object(const char * key)
  {
    const auto it = j_.find(key);
    if (it == j_.end()) {
      return nullptr;
    }
    seen_.emplace_back(key);
    return &*it;
  }

  template<class E>
  void read_enum(const char * key, E & out, std::initializer_list<std::pair<const char *, E>> names)
  {
    std::string s;
    read(key, s);
    if (s.empty()) {
      return;
    }
    for (const auto & [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
    }
    std::string allowed;
    for (const auto & n : names) {
      allowed += (allowed.empty() ? "" : ", ") + std::string(n.first);
    }
    throw InvalidConfig(child(key) + ": '" + s + "' is not one of " + allowed);
  }

  void finish() const
  {
    for (const auto & [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw InvalidConfig(child(key) + ": unknown key");
      }
    }
  }

  std::string child(const std::string & key) const
  {
    return path_.empty() ? key : path_ + "." + key;
  }

private:
  std::string where() const {return path_.empty() ? "config" : path_;}

  template<class T>
  static bool type_ok(const nlohmann::json & v, const T &)
  {
    if constexpr (std::is_same_v<T, bool>) {
      return v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      return v.is_number_integer() && !(std::is_unsigned_v<T> && v.get<long long>() < 0);
    } else if constexpr (std::is_floating_point_v<T>) {
      return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v.is_string();
    } else {
      return true;
    }
  }

  const nlohmann::json & j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline void read_mas(const nlohmann::json & j, const std::string & path, MasConfig & c)
{
  ObjectReader r(j, path);
  r.read("gamma", c.gamma);
  r.read_enum(
    "lambda_mode", c.lambda_mode,
    {{"angle_dependent", LambdaMode::angle_dependent},
      {"constant_one", LambdaMode::constant_one}});
  r.read("candidate_k", c.candidate_k);
  r.read("clamp_min", c.clamp_min);
  r.read("clamp_max", c.clamp_max);
  r.read("use_center_prior", c.use_center_prior);
  r.read("raw_lambda", c.raw_lambda);
  r.finish();
}

inline void read_scene(const nlohmann::json & j, const std::string & path, SceneSpec & s)
{
  ObjectReader r(j, path);
  r.read("image_width", s.image_width);
  r.read("image_height", s.image_height);
  r.read("aspect_min", s.aspect_min);
  r.read("aspect_max", s.aspect_max);
  r.read("scale_min", s.scale_min);
  r.read("scale_max", s.scale_max);
  r.read("sweep_aspect_bins", s.sweep_aspect_bins);
  r.read("sweep_angle_bins", s.sweep_angle_bins);
  r.finish();
}

inline void read_beta(const nlohmann::json & j, const std::string & path, BetaState & b)
{
  ObjectReader r(j, path);
  r.read("initial", b.beta);
  r.read("momentum", b.momentum);
  r.read("beta_min", b.beta_min);
  r.read("beta_max", b.beta_max);
  r.read_enum(
    "mode", b.mode,
    {{"median", BetaTargetMode::median}, {"kth_smallest", BetaTargetMode::kth_smallest}});
  r.read("k", b.k);
  r.finish();
}

}  // namespace detail

/// Propagates shared settings (seed, strategy, anchors, assigners) into the
/// per-command sections. Call again after command-line overrides.
inline void sync_run_config(RunConfig & c)
{
  c.stats.seed = c.seed;
  c.stats.strategy = c.strategy;
  c.stats.anchors = c.anchors;
  c.stats.assigners = c.assigners;
  c.thresholds.mas = c.assigners.mas;
  c.loss_check.trajectory.seed = c.seed;
}

/// Applies a JSON document on top of `base`, then validates.
inline RunConfig parse_run_config(const nlohmann::json & j, RunConfig base = {})
{
  using detail::ObjectReader;
  RunConfig c = std::move(base);
  ObjectReader root(j, "");
  root.read("seed", c.seed);
  root.read_enum(
    "strategy", c.strategy,
    {{"maxiou", Strategy::maxiou}, {"atss", Strategy::atss}, {"mas", Strategy::mas}});
  if (const auto * a = root.object("anchors")) {
    ObjectReader r(*a, "anchors");
    r.read("strides", c.anchors.strides);
    r.read("scale_multiplier", c.anchors.scale_multiplier);
    r.finish();
  }
  if (const auto * m = root.object("mas")) {
    detail::read_mas(*m, "mas", c.assigners.mas);
  }
  if (const auto * a = root.object("atss")) {
    ObjectReader r(*a, "atss");
    r.read("candidate_k", c.assigners.atss.candidate_k);
    r.read("clamp_min", c.assigners.atss.clamp_min);
    r.read("clamp_max", c.assigners.atss.clamp_max);
    r.read("use_center_prior", c.assigners.atss.use_center_prior);
    r.finish();
  }
  if (const auto * m = root.object("maxiou")) {
    ObjectReader r(*m, "maxiou");
    r.read("pos_thr", c.assigners.maxiou.pos_thr);
    r.read("neg_thr", c.assigners.maxiou.neg_thr);
    r.finish();
  }
  if (const auto * s = root.object("stats")) {
    ObjectReader r(*s, "stats");
    r.read("scenes", c.stats.scenes);
    r.read("aspect_bins", c.stats.aspect_bins);
    r.read("angle_bins", c.stats.angle_bins);
    r.read("angle_aspect_min", c.stats.angle_aspect_min);
    r.read("angle_aspect_max", c.stats.angle_aspect_max);
    if (const auto * sc = r.object("scene")) {
      detail::read_scene(*sc, "stats.scene", c.stats.scene);
    }
    r.finish();
  }
  if (const auto * t = root.object("thresholds")) {
    ObjectReader r(*t, "thresholds");
    r.read("gammas", c.thresholds.gammas);
    r.read("aspects", c.thresholds.aspects);
    r.read("angles", c.thresholds.angles);
    r.read("candidate_ious", c.thresholds.candidate_ious);
    r.finish();
  }
  if (const auto * l = root.object("loss_check")) {
    ObjectReader r(*l, "loss_check");
    auto & tr = c.loss_check.trajectory;
    r.read("gradient_points", c.loss_check.gradient_points);
    r.read("step", c.loss_check.step);
    r.read("tolerance", c.loss_check.tolerance);
    r.read("iterations", tr.iterations);
    r.read("tau", tr.tau);
    r.read("proposals", tr.proposals);
    r.read_enum(
      "schedule", tr.schedule,
      {{"improving", QualitySchedule::improving}, {"constant", QualitySchedule::constant}});
    r.read("constant_quality", tr.constant_quality);
    if (const auto * b = r.object("beta")) {
      detail::read_beta(*b, "loss_check.beta", tr.initial);
    }
    r.finish();
  }
  if (const auto * a = root.object("assign_file")) {
    ObjectReader r(*a, "assign_file");
    r.read("include_difficult", c.assign_file.include_difficult);
    r.read("image_width", c.assign_file.image_width);
    r.read("image_height", c.assign_file.image_height);
    r.read("categories", c.assign_file.categories);
    r.read_enum(
      "unknown_category", c.assign_file.unknown_category,
      {{"error", UnknownCategory::error}, {"pass_through", UnknownCategory::pass_through}});
    r.finish();
  }
  if (const auto * f = root.object("cfs")) {
    ObjectReader r(*f, "cfs");
    r.read("shrink", c.cfs.shrink);
    r.read("stride", c.cfs.stride);
    r.finish();
  }
  root.finish();
  sync_run_config(c);
  c.validate();
  return c;
}

inline RunConfig parse_run_config_text(const std::string & text, RunConfig base = {})
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error & e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j, std::move(base));
}

inline RunConfig load_run_config(const std::string & path, RunConfig base = {})
{
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfig("cannot open config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), std::move(base));
}

}  // namespace obbkit

#endif  // OBBKIT__CONFIG_HPP_
