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

#include "blocksplat/pipeline.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "blocksplat/block_opt.hpp"
#include "blocksplat/image_io.hpp"
#include "blocksplat/ply_io.hpp"
#include "blocksplat/renderer.hpp"
#include "blocksplat/synthetic.hpp"

namespace blocksplat {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

void RequireDir(const fs::path& dir, const char* what) {
  if (dir.empty() || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kConfig, std::string(what) + " '" + dir.string() +
                                        "' is not a directory");
  }
}

std::string PngName(const std::string& name) {
  fs::path p(name);
  return p.stem().string() + ".png";
}

// 1.1 times the largest distance of a camera center from their mean.
double CameraExtent(const std::vector<TrainingView>& views) {
  Vec3 mean = Vec3::Zero();
  for (const auto& v : views) mean += v.pose.center();
  mean /= static_cast<double>(views.size());
  double r = 0.0;
  for (const auto& v : views) r = std::max(r, (v.pose.center() - mean).norm());
  return r > 1e-9 ? 1.1 * r : 1.0;
}

json LogEntryJson(const TrainingLogEntry& e) {
  return json{{"iteration", e.iteration},
              {"loss", e.loss},
              {"photometric", e.photometric},
              {"depth", e.depth},
              {"pseudo", e.pseudo},
              {"depth_weight", e.depth_weight},
              {"pseudo_weight", e.pseudo_weight},
              {"n_block", e.n_block},
              {"n_aux", e.n_aux},
              {"wall_seconds", e.wall_seconds}};
}

// Log to stderr; BLOCKSPLAT_LOG_LEVEL picks the level (default info).
void ConfigureLogging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("blocksplat");
    spdlog::set_default_logger(logger);
    const char* level = std::getenv("BLOCKSPLAT_LOG_LEVEL");
    spdlog::set_level(level ? spdlog::level::from_str(level)
                            : spdlog::level::info);
  });
}

}  // namespace

PartitionSummary SummarizePlan(const BlockPlan& plan) {
  PartitionSummary s;
  s.n_blocks = static_cast<int>(plan.blocks.size());
  for (const auto& b : plan.blocks) {
    const int nv = static_cast<int>(b.assigned_view_ids.size());
    s.views_mean += nv;
    s.views_max = std::max(s.views_max, nv);
    s.points_mean += b.point_count;
    s.points_max = std::max(s.points_max, b.point_count);
    s.points_in_roi += b.point_count;
  }
  if (s.n_blocks > 0) {
    s.views_mean /= s.n_blocks;
    s.points_mean /= s.n_blocks;
  }
  s.flagged_blocks = plan.flagged_blocks;
  return s;
}

std::vector<int> HeldOutViewIds(const SparseModel& model, int every) {
  std::vector<int> out;
  if (every <= 0) return out;
  int index = 0;
  for (const auto& [id, v] : model.views) {
    if (index++ % every == 0) out.push_back(id);
  }
  return out;
}

std::vector<int> TrainingViewIds(const SparseModel& model, int every) {
  std::vector<int> out;
  int index = 0;
  for (const auto& [id, v] : model.views) {
    if (every <= 0 || index % every != 0) out.push_back(id);
    ++index;
  }
  return out;
}

std::vector<NamedCamera> ParsePoseFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path.string());
  std::vector<NamedCamera> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    NamedCamera nc;
    Vec4 q;
    Vec3 t;
    ss >> nc.name >> nc.cam.width >> nc.cam.height >> nc.cam.fx >> nc.cam.fy >>
        nc.cam.cx >> nc.cam.cy >> q[0] >> q[1] >> q[2] >> q[3] >> t[0] >> t[1] >>
        t[2];
    std::string extra;
    if (!ss || (ss >> extra)) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected NAME W H FX FY CX CY QW QX QY QZ TX TY TZ");
    }
    try {
      nc.cam.Validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!(q.norm() > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(line_no) +
                      ": zero quaternion");
    }
    nc.pose.rotation = QuaternionToRotation(q);
    nc.pose.translation = t;
    out.push_back(std::move(nc));
  }
  return out;
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  ConfigureLogging();
  cfg_.Validate();
  if (cfg_.paths.output_dir.empty()) {
    throw Error(ErrorCode::kConfig, "paths.output_dir is required");
  }
}

const SparseModel& Pipeline::Model() {
  if (!model_) {
    RequireDir(cfg_.paths.sfm_dir, "paths.sfm_dir");
    model_ = ParseSparseModel(cfg_.paths.sfm_dir, cfg_.sfm_format);
  }
  return *model_;
}

fs::path Pipeline::BlockDir(int block_id) const {
  return cfg_.paths.output_dir / ("block_" + std::to_string(block_id));
}

CameraIntrinsics Pipeline::TrainingCamera(const ViewRecord& view) {
  return Model().CameraFor(view).Downsampled(cfg_.image_downsample);
}

Image Pipeline::LoadViewImage(const ViewRecord& view,
                              const CameraIntrinsics& cam) const {
  Image img = LoadRgbImage(cfg_.paths.image_dir / view.image_path);
  if (cfg_.image_downsample > 1) img = Downsample(img, cfg_.image_downsample);
  if (img.width != cam.width || img.height != cam.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image " + view.image_path + " does not match its camera");
  }
  return img;
}

std::optional<DepthPrior> Pipeline::LoadViewPrior(
    const ViewRecord& view, const CameraIntrinsics& full,
    const CameraIntrinsics& cam) const {
  if (cfg_.paths.depth_dir.empty()) return std::nullopt;
  const std::string stem = fs::path(view.image_path).stem().string();
  for (const char* ext : {".pfm", ".png"}) {
    const fs::path p = cfg_.paths.depth_dir / (stem + ext);
    if (!fs::exists(p)) continue;
    const int f = cfg_.image_downsample;
    if (f <= 1) return LoadDepthPrior(p, view, cam);
    // Priors sit on disk at image resolution; average the valid samples of
    // each cell.
    DepthPrior prior = LoadDepthPrior(p, view, full);
    Image small(cam.width, cam.height, 1);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < f; ++dy) {
          for (int dx = 0; dx < f; ++dx) {
            const int sx = x * f + dx, sy = y * f + dy;
            if (sx >= full.width || sy >= full.height) continue;
            const double d = prior.depth.at(sx, sy);
            if (d > 0.0) {
              sum += d;
              ++n;
            }
          }
        }
        small.at(x, y) = n > 0 ? sum / n : 0.0;
      }
    }
    prior.depth = std::move(small);
    return prior;
  }
  return std::nullopt;
}

void Pipeline::RunSynth() {
  const SyntheticScene scene = GenerateSyntheticScene(cfg_.synth);
  if (cfg_.paths.sfm_dir.empty() || cfg_.paths.image_dir.empty()) {
    throw Error(ErrorCode::kConfig, "synth needs paths.sfm_dir and image_dir");
  }
  fs::create_directories(cfg_.paths.sfm_dir);
  fs::create_directories(cfg_.paths.image_dir);
  const SfmFormat fmt =
      cfg_.sfm_format == SfmFormat::kText ? SfmFormat::kText : SfmFormat::kBinary;
  WriteSparseModel(scene.model, cfg_.paths.sfm_dir, fmt);
  for (size_t v = 0; v < scene.images.size(); ++v) {
    WritePng8(cfg_.paths.image_dir / scene.names[v], scene.images[v]);
    if (!cfg_.paths.depth_dir.empty()) {
      fs::create_directories(cfg_.paths.depth_dir);
      WritePfm(cfg_.paths.depth_dir /
                   (fs::path(scene.names[v]).stem().string() + ".pfm"),
               scene.priors[v]);
    }
  }
  model_.reset();
  spdlog::info("synth: {} primitives, {} views, {} sparse points",
               scene.gaussians.size(), scene.poses.size(),
               scene.model.points.size());
}

PartitionSummary Pipeline::RunPartition() {
  const SparseModel& model = Model();
  BlockPlan plan = Partition(model, cfg_.partition);
  AssignViews(model, plan, cfg_.partition,
              TrainingViewIds(model, cfg_.holdout_every));
  fs::create_directories(cfg_.paths.output_dir);
  WriteText(cfg_.paths.output_dir / "blockplan.json",
            BlockPlanToJson(plan).dump(2) + "\n");
  WriteText(cfg_.paths.output_dir / "config.toml", PipelineConfigToToml(cfg_));
  for (int id : plan.flagged_blocks) {
    spdlog::warn("block {} received no views", id);
  }
  return SummarizePlan(plan);
}

BlockPlan Pipeline::LoadPlan() const {
  const fs::path p = cfg_.paths.output_dir / "blockplan.json";
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kMissingFile,
                p.string() + " not found; run partition first");
  }
  try {
    return BlockPlanFromJson(ReadJson(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, p.string() + ": " + e.what());
  }
}

void Pipeline::RunOptimizeBlock(int block_id) {
  const BlockPlan plan = LoadPlan();
  const bool known = std::any_of(plan.blocks.begin(), plan.blocks.end(),
                                 [&](const Block& b) { return b.block_id == block_id; });
  if (!known) {
    throw Error(ErrorCode::kInvalidArgument,
                "no block " + std::to_string(block_id) + " in the plan");
  }
  const Block& block = plan.block(block_id);
  const SparseModel& model = Model();
  RequireDir(cfg_.paths.image_dir, "paths.image_dir");

  BlockGaussianState state = InitBlockGaussians(model, block, plan);
  std::vector<TrainingView> views;
  for (int id : block.assigned_view_ids) {
    const auto it = model.views.find(id);
    if (it == model.views.end()) {
      throw Error(ErrorCode::kPlanMismatch,
                  "plan lists view " + std::to_string(id) + " not in the model");
    }
    TrainingView tv;
    tv.view_id = id;
    tv.cam = TrainingCamera(it->second);
    tv.pose = it->second.pose;
    tv.image = LoadViewImage(it->second, tv.cam);
    tv.prior = LoadViewPrior(it->second, model.CameraFor(it->second), tv.cam);
    views.push_back(std::move(tv));
  }

  TrainConfig tc = cfg_.train;
  tc.rng_seed = cfg_.train.rng_seed ^ static_cast<uint64_t>(block_id);
  tc.position_lr_scale = CameraExtent(views);

  const fs::path dir = BlockDir(block_id);
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  const int every = std::max(1, tc.iterations / 20);
  OptimizeResult result;
  try {
    result = OptimizeBlock(std::move(state), views, tc, cfg_.loss,
                           [&](const TrainingLogEntry& e) {
                             log << LogEntryJson(e).dump() << '\n';
                             if (e.iteration % every == 0) {
                               spdlog::info("block {} iter {}: loss {:.5f} n_b {} n_a {}",
                                            block_id, e.iteration, e.loss,
                                            e.n_block, e.n_aux);
                             }
                           });
  } catch (const DivergedLossError& e) {
    WritePly(e.snapshot().block, dir / "diverged_point_cloud.ply");
    WritePly(e.snapshot().auxiliary, dir / "diverged_aux_point_cloud.ply");
    throw;
  }
  log.close();
  WritePly(result.state.block, dir / "point_cloud.ply");
  WritePly(result.state.auxiliary, dir / "aux_point_cloud.ply");
}

SceneModel Pipeline::RunMerge() {
  const BlockPlan plan = LoadPlan();
  std::vector<OptimizedBlock> blocks;
  for (const auto& b : plan.blocks) {
    const fs::path dir = BlockDir(b.block_id);
    if (!fs::exists(dir / "point_cloud.ply")) {
      throw Error(ErrorCode::kMissingFile,
                  (dir / "point_cloud.ply").string() + " missing; optimize block " +
                      std::to_string(b.block_id) + " first");
    }
    OptimizedBlock ob;
    ob.block_id = b.block_id;
    ob.state.block = ReadPly(dir / "point_cloud.ply");
    if (fs::exists(dir / "aux_point_cloud.ply")) {
      ob.state.auxiliary = ReadPly(dir / "aux_point_cloud.ply");
    }
    ob.state.block_bounds = b.bounds;
    ob.state.alignment = plan.alignment;
    blocks.push_back(std::move(ob));
  }
  SceneModel scene = MergeBlocks(std::move(blocks), plan);
  const fs::path dir = cfg_.paths.output_dir / "scene";
  fs::create_directories(dir);
  WritePly(scene.gaussians, dir / "point_cloud.ply");
  json counts = json::array();
  for (const auto& b : plan.blocks) {
    counts.push_back({{"block_id", b.block_id},
                      {"count", std::count(scene.provenance.begin(),
                                           scene.provenance.end(), b.block_id)}});
  }
  WriteText(dir / "provenance.json",
            json{{"blocks", counts}, {"provenance", scene.provenance}}.dump() + "\n");
  return scene;
}

std::vector<fs::path> Pipeline::RunRender(
    const std::optional<fs::path>& pose_file) {
  std::vector<NamedCamera> cams;
  if (pose_file) {
    cams = ParsePoseFile(*pose_file);
  } else {
    const SparseModel& model = Model();
    for (int id : HeldOutViewIds(model, cfg_.holdout_every)) {
      const ViewRecord& v = model.views.at(id);
      cams.push_back({v.image_path, TrainingCamera(v), v.pose});
    }
  }
  std::vector<fs::path> written;
  if (cams.empty()) return written;
  const fs::path scene_ply = cfg_.paths.output_dir / "scene" / "point_cloud.ply";
  const GaussianSet scene = ReadPly(scene_ply);
  const fs::path dir = cfg_.paths.output_dir / "renders";
  fs::create_directories(dir);
  for (const auto& c : cams) {
    const RenderedView rv = Render(scene, c.cam, c.pose, cfg_.train.background);
    const fs::path out = dir / PngName(c.name);
    WritePng8(out, rv.color);
    written.push_back(out);
  }
  return written;
}

EvalReport Pipeline::RunEval() {
  const SparseModel& model = Model();
  RequireDir(cfg_.paths.image_dir, "paths.image_dir");
  const GaussianSet scene =
      ReadPly(cfg_.paths.output_dir / "scene" / "point_cloud.ply");
  EvalReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (int id : HeldOutViewIds(model, cfg_.holdout_every)) {
    const ViewRecord& v = model.views.at(id);
    const CameraIntrinsics cam = TrainingCamera(v);
    const Image gt = LoadViewImage(v, cam);
    const RenderedView rv = Render(scene, cam, v.pose, cfg_.train.background);
    Image clipped = rv.color;
    for (double& x : clipped.data) x = std::clamp(x, 0.0, 1.0);
    report.views.push_back(
        {id, v.image_path, Psnr(clipped, gt), SsimMetric(clipped, gt)});
  }
  report.render_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  FinalizeMeans(report);

  json views = json::array();
  for (const auto& m : report.views) {
    views.push_back({{"view_id", m.view_id},
                     {"name", m.name},
                     {"psnr", m.psnr},
                     {"ssim", m.ssim}});
  }
  // Timing lives in its own file so the report itself is reproducible.
  WriteText(cfg_.paths.output_dir / "eval_report.json",
            json{{"views", views},
                 {"n_views", report.views.size()},
                 {"mean_psnr", report.mean_psnr},
                 {"mean_ssim", report.mean_ssim}}
                    .dump(2) +
                "\n");
  WriteText(cfg_.paths.output_dir / "eval_timing.json",
            json{{"render_seconds", report.render_seconds}}.dump(2) + "\n");
  return report;
}

}  // namespace blocksplat
