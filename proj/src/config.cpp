// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "blocksplat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace blocksplat {
namespace {

namespace fs = std::filesystem;

// Typed access to one TOML table that remembers which keys were consumed.
class Section {
 public:
  Section(const toml::table* table, std::string name)
      : table_(table), name_(std::move(name)) {}

  template <typename T>
  void Read(const char* key, T& out) {
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    used_.insert(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value_exact<bool>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node->value_exact<int64_t>()) {
        out = static_cast<T>(*v);
        return;
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
    } else {
      if (auto v = node->value_exact<std::string>()) {
        out = *v;
        return;
      }
    }
    Fail(key, "has the wrong type");
  }

  const toml::node* Raw(const char* key) {
    if (!table_) return nullptr;
    const toml::node* node = table_->get(key);
    if (node) used_.insert(key);
    return node;
  }

  [[noreturn]] void Fail(const std::string& key, const std::string& why) const {
    throw Error(ErrorCode::kConfig, "[" + name_ + "] " + key + " " + why);
  }

  void RejectUnknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) Fail(std::string(k.str()), "is not a known key");
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

fs::path Resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string FormatName(SfmFormat f) {
  switch (f) {
    case SfmFormat::kText: return "text";
    case SfmFormat::kBinary: return "binary";
    default: return "auto";
  }
}

}  // namespace

void PipelineConfig::Validate() const {
  partition.Validate();
  train.Validate();
  loss.Validate();
  if (holdout_every < 0) throw Error(ErrorCode::kConfig, "holdout_every < 0");
  if (parallel_workers < 1) {
    throw Error(ErrorCode::kConfig, "parallel_workers must be >= 1");
  }
  if (image_downsample < 1) {
    throw Error(ErrorCode::kConfig, "image_downsample must be >= 1");
  }
}

PipelineConfig ParsePipelineConfig(const std::string& text,
                                   const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " at line "
        << e.source().begin.line;
    throw Error(ErrorCode::kConfig, msg.str());
  }
  static const std::set<std::string> kSections = {
      "paths", "partition", "train", "loss", "eval", "pipeline", "synth"};
  for (const auto& [k, v] : root) {
    if (!kSections.count(std::string(k.str())) || !v.is_table()) {
      throw Error(ErrorCode::kConfig,
                  "unknown config section '" + std::string(k.str()) + "'");
    }
  }

  PipelineConfig cfg;
  {
    Section s(root["paths"].as_table(), "paths");
    std::string sfm, images, depth, output;
    s.Read("sfm_dir", sfm);
    s.Read("image_dir", images);
    s.Read("depth_dir", depth);
    s.Read("output_dir", output);
    s.RejectUnknown();
    cfg.paths = {Resolve(sfm, base_dir), Resolve(images, base_dir),
                 Resolve(depth, base_dir), Resolve(output, base_dir)};
  }
  {
    Section s(root["partition"].as_table(), "partition");
    PartitionConfig& p = cfg.partition;
    s.Read("max_depth", p.max_depth);
    s.Read("block_point_threshold", p.block_point_threshold);
    s.Read("assign_ratio_threshold", p.assign_ratio_threshold);
    std::string up = UpAxisName(p.up_axis);
    s.Read("up_axis", up);
    p.up_axis = ParseUpAxis(up);
    if (const toml::node* roi = s.Raw("roi")) {
      if (const auto* str = roi->as_string()) {
        if (str->get() != "auto") s.Fail("roi", "must be \"auto\" or an array");
      } else if (const auto* arr = roi->as_array()) {
        double v[4];
        if (arr->size() != 4) s.Fail("roi", "needs [x0, z0, x1, z1]");
        for (size_t i = 0; i < 4; ++i) {
          const auto d = arr->get(i)->value<double>();
          if (!d) s.Fail("roi", "entries must be numbers");
          v[i] = *d;
        }
        if (!(v[2] > v[0] && v[3] > v[1])) s.Fail("roi", "has no area");
        p.roi = Rect{v[0], v[1], v[2], v[3]};
      } else {
        s.Fail("roi", "must be \"auto\" or an array");
      }
    }
    s.RejectUnknown();
  }
  {
    Section s(root["train"].as_table(), "train");
    TrainConfig& t = cfg.train;
    s.Read("iterations", t.iterations);
    s.Read("batch_size", t.batch_size);
    s.Read("densify_interval", t.densify_interval);
    s.Read("densify_start", t.densify_start);
    s.Read("densify_stop", t.densify_stop);
    s.Read("densify_grad_threshold", t.densify_grad_threshold);
    s.Read("split_scale_threshold", t.split_scale_threshold);
    s.Read("prune_opacity_threshold", t.prune_opacity_threshold);
    s.Read("opacity_reset_interval", t.opacity_reset_interval);
    s.Read("pseudo_start_fraction", t.pseudo_start_fraction);
    s.Read("lr_position_init", t.lr.position_init);
    s.Read("lr_position_final", t.lr.position_final);
    s.Read("lr_color", t.lr.color);
    s.Read("lr_opacity", t.lr.opacity);
    s.Read("lr_scale", t.lr.scale);
    s.Read("lr_rotation", t.lr.rotation);
    int64_t seed = static_cast<int64_t>(t.rng_seed);
    s.Read("seed", seed);
    t.rng_seed = static_cast<uint64_t>(seed);
    s.Read("use_aux", t.use_aux);
    s.Read("use_pseudo", t.use_pseudo);
    s.Read("use_depth", t.use_depth);
    if (const toml::node* bg = s.Raw("background")) {
      const auto* arr = bg->as_array();
      if (!arr || arr->size() != 3) s.Fail("background", "needs [r, g, b]");
      for (size_t i = 0; i < 3; ++i) {
        const auto d = arr->get(i)->value<double>();
        if (!d) s.Fail("background", "entries must be numbers");
        t.background[static_cast<int>(i)] = *d;
      }
    }
    s.RejectUnknown();
  }
  {
    Section s(root["loss"].as_table(), "loss");
    s.Read("lambda_ssim", cfg.loss.lambda_ssim);
    s.Read("ssim_window", cfg.loss.ssim_window);
    s.Read("ssim_sigma", cfg.loss.ssim_sigma);
    s.Read("pseudo_disparity", cfg.loss.pseudo_disparity);
    s.Read("alpha_mask_threshold", cfg.loss.alpha_mask_threshold);
    s.RejectUnknown();
  }
  {
    Section s(root["eval"].as_table(), "eval");
    s.Read("holdout_every", cfg.holdout_every);
    s.RejectUnknown();
  }
  {
    Section s(root["pipeline"].as_table(), "pipeline");
    s.Read("parallel_workers", cfg.parallel_workers);
    s.Read("image_downsample", cfg.image_downsample);
    std::string fmt = "auto";
    s.Read("sfm_format", fmt);
    if (fmt == "auto") {
      cfg.sfm_format = SfmFormat::kAuto;
    } else if (fmt == "text") {
      cfg.sfm_format = SfmFormat::kText;
    } else if (fmt == "binary") {
      cfg.sfm_format = SfmFormat::kBinary;
    } else {
      s.Fail("sfm_format", "must be auto, text or binary");
    }
    s.RejectUnknown();
  }
  {
    Section s(root["synth"].as_table(), "synth");
    SyntheticConfig& y = cfg.synth;
    s.Read("n_gaussians", y.n_gaussians);
    s.Read("n_views", y.n_views);
    s.Read("width", y.width);
    s.Read("height", y.height);
    int64_t seed = static_cast<int64_t>(y.seed);
    s.Read("seed", seed);
    y.seed = static_cast<uint64_t>(seed);
    s.Read("dense_fraction", y.dense_fraction);
    s.Read("ring_radius", y.ring_radius);
    s.Read("camera_height", y.camera_height);
    s.Read("focal", y.focal);
    s.Read("target_offset", y.target_offset);
    s.Read("prior_scale", y.prior_scale);
    s.RejectUnknown();
  }
  cfg.Validate();
  return cfg;
}

PipelineConfig LoadPipelineConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParsePipelineConfig(ss.str(), fs::absolute(path).parent_path());
}

std::string PipelineConfigToToml(const PipelineConfig& cfg) {
  auto arr3 = [](const Vec3& v) { return toml::array{v[0], v[1], v[2]}; };
  toml::table paths{{"sfm_dir", cfg.paths.sfm_dir.string()},
                    {"image_dir", cfg.paths.image_dir.string()},
                    {"depth_dir", cfg.paths.depth_dir.string()},
                    {"output_dir", cfg.paths.output_dir.string()}};
  const PartitionConfig& p = cfg.partition;
  toml::table partition{{"max_depth", p.max_depth},
                        {"block_point_threshold", p.block_point_threshold},
                        {"assign_ratio_threshold", p.assign_ratio_threshold},
                        {"up_axis", UpAxisName(p.up_axis)}};
  if (p.roi) {
    partition.insert("roi", toml::array{p.roi->x0, p.roi->z0, p.roi->x1, p.roi->z1});
  } else {
    partition.insert("roi", "auto");
  }
  const TrainConfig& t = cfg.train;
  toml::table train{
      {"iterations", t.iterations},
      {"batch_size", t.batch_size},
      {"densify_interval", t.densify_interval},
      {"densify_start", t.densify_start},
      {"densify_stop", t.densify_stop},
      {"densify_grad_threshold", t.densify_grad_threshold},
      {"split_scale_threshold", t.split_scale_threshold},
      {"prune_opacity_threshold", t.prune_opacity_threshold},
      {"opacity_reset_interval", t.opacity_reset_interval},
      {"pseudo_start_fraction", t.pseudo_start_fraction},
      {"lr_position_init", t.lr.position_init},
      {"lr_position_final", t.lr.position_final},
      {"lr_color", t.lr.color},
      {"lr_opacity", t.lr.opacity},
      {"lr_scale", t.lr.scale},
      {"lr_rotation", t.lr.rotation},
      {"seed", static_cast<int64_t>(t.rng_seed)},
      {"use_aux", t.use_aux},
      {"use_pseudo", t.use_pseudo},
      {"use_depth", t.use_depth},
      {"background", arr3(t.background)}};
  toml::table loss{{"lambda_ssim", cfg.loss.lambda_ssim},
                   {"ssim_window", cfg.loss.ssim_window},
                   {"ssim_sigma", cfg.loss.ssim_sigma},
                   {"pseudo_disparity", cfg.loss.pseudo_disparity},
                   {"alpha_mask_threshold", cfg.loss.alpha_mask_threshold}};
  toml::table eval{{"holdout_every", cfg.holdout_every}};
  toml::table pipeline{{"parallel_workers", cfg.parallel_workers},
                       {"image_downsample", cfg.image_downsample},
                       {"sfm_format", FormatName(cfg.sfm_format)}};
  const SyntheticConfig& y = cfg.synth;
  toml::table synth{{"n_gaussians", y.n_gaussians},
                    {"n_views", y.n_views},
                    {"width", y.width},
                    {"height", y.height},
                    {"seed", static_cast<int64_t>(y.seed)},
                    {"dense_fraction", y.dense_fraction},
                    {"ring_radius", y.ring_radius},
                    {"camera_height", y.camera_height},
                    {"focal", y.focal},
                    {"target_offset", y.target_offset},
                    {"prior_scale", y.prior_scale}};
  toml::table root{{"paths", paths},   {"partition", partition},
                   {"train", train},   {"loss", loss},
                   {"eval", eval},     {"pipeline", pipeline},
                   {"synth", synth}};
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

PipelineConfig WithOverride(const PipelineConfig& cfg, const std::string& key,
                            const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
    throw Error(ErrorCode::kConfig, "override key must be section.key: " + key);
  }
  const std::string section = key.substr(0, dot);
  const std::string name = key.substr(dot + 1);
  toml::table root = toml::parse(PipelineConfigToToml(cfg));
  toml::table* sec = root[section].as_table();
  if (!sec) throw Error(ErrorCode::kConfig, "unknown config section '" + section + "'");
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    parsed = toml::table{{"v", value}};
  }
  sec->insert_or_assign(name, *parsed.get("v"));
  std::ostringstream text;
  text << root;
  return ParsePipelineConfig(text.str(), fs::path("/"));
}

}  // namespace blocksplat
