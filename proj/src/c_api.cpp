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

#include "blocksplat/blocksplat.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "blocksplat/merge_eval.hpp"
#include "blocksplat/pipeline.hpp"
#include "blocksplat/ply_io.hpp"
#include "blocksplat/renderer.hpp"

struct bs_pipeline {
  std::unique_ptr<blocksplat::Pipeline> impl;
};

struct bs_gaussians {
  blocksplat::GaussianSet set;
};

namespace {

thread_local std::string g_last_error;

bs_status FromCode(blocksplat::ErrorCode code) {
  using blocksplat::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return BS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return BS_ERR_CONFIG;
    case ErrorCode::kIo: return BS_ERR_IO;
    case ErrorCode::kMissingFile: return BS_ERR_MISSING_FILE;
    case ErrorCode::kMalformedRecord: return BS_ERR_MALFORMED_RECORD;
    case ErrorCode::kUnsupportedCameraModel: return BS_ERR_UNSUPPORTED_CAMERA_MODEL;
    case ErrorCode::kVisibilityAsymmetry: return BS_ERR_VISIBILITY_ASYMMETRY;
    case ErrorCode::kDimensionMismatch: return BS_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kUnreadableFile: return BS_ERR_UNREADABLE_FILE;
    case ErrorCode::kDegenerateGeometry: return BS_ERR_DEGENERATE_GEOMETRY;
    case ErrorCode::kEmptyRoi: return BS_ERR_EMPTY_ROI;
    case ErrorCode::kEmptyBlock: return BS_ERR_EMPTY_BLOCK;
    case ErrorCode::kUnknownAttribute: return BS_ERR_UNKNOWN_ATTRIBUTE;
    case ErrorCode::kTruncatedFile: return BS_ERR_TRUNCATED_FILE;
    case ErrorCode::kMissingForwardState: return BS_ERR_MISSING_FORWARD_STATE;
    case ErrorCode::kEmptyDepth: return BS_ERR_EMPTY_DEPTH;
    case ErrorCode::kNoViews: return BS_ERR_NO_VIEWS;
    case ErrorCode::kDivergedLoss: return BS_ERR_DIVERGED_LOSS;
    case ErrorCode::kPlanMismatch: return BS_ERR_PLAN_MISMATCH;
  }
  return BS_ERR_INTERNAL;
}

// Runs fn, translating exceptions into a status and the thread's message.
template <typename Fn>
bs_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return BS_OK;
  } catch (const blocksplat::Error& e) {
    g_last_error = e.what();
    return FromCode(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return BS_ERR_INTERNAL;
}

bs_status NullArgument(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return BS_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* bs_version(void) { return "0.1.0"; }

const char* bs_status_name(bs_status status) {
  switch (status) {
    case BS_OK: return "ok";
    case BS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case BS_ERR_CONFIG: return "config";
    case BS_ERR_IO: return "io";
    case BS_ERR_MISSING_FILE: return "missing_file";
    case BS_ERR_MALFORMED_RECORD: return "malformed_record";
    case BS_ERR_UNSUPPORTED_CAMERA_MODEL: return "unsupported_camera_model";
    case BS_ERR_VISIBILITY_ASYMMETRY: return "visibility_asymmetry";
    case BS_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case BS_ERR_UNREADABLE_FILE: return "unreadable_file";
    case BS_ERR_DEGENERATE_GEOMETRY: return "degenerate_geometry";
    case BS_ERR_EMPTY_ROI: return "empty_roi";
    case BS_ERR_EMPTY_BLOCK: return "empty_block";
    case BS_ERR_UNKNOWN_ATTRIBUTE: return "unknown_attribute";
    case BS_ERR_TRUNCATED_FILE: return "truncated_file";
    case BS_ERR_MISSING_FORWARD_STATE: return "missing_forward_state";
    case BS_ERR_EMPTY_DEPTH: return "empty_depth";
    case BS_ERR_NO_VIEWS: return "no_views";
    case BS_ERR_DIVERGED_LOSS: return "diverged_loss";
    case BS_ERR_PLAN_MISMATCH: return "plan_mismatch";
    case BS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* bs_last_error(void) { return g_last_error.c_str(); }

bs_status bs_pipeline_open(const char* config_path, bs_pipeline** out) {
  if (!config_path) return NullArgument("config_path");
  if (!out) return NullArgument("out");
  *out = nullptr;
  return Guard([&] {
    auto p = std::make_unique<bs_pipeline>();
    p->impl = std::make_unique<blocksplat::Pipeline>(
        blocksplat::LoadPipelineConfig(config_path));
    *out = p.release();
  });
}

void bs_pipeline_close(bs_pipeline* p) { delete p; }

bs_status bs_pipeline_set(bs_pipeline* p, const char* key, const char* value) {
  if (!p) return NullArgument("pipeline");
  if (!key || !value) return NullArgument("key/value");
  return Guard([&] {
    p->impl = std::make_unique<blocksplat::Pipeline>(
        blocksplat::WithOverride(p->impl->config(), key, value));
  });
}

bs_status bs_pipeline_parallel_workers(const bs_pipeline* p, int* out) {
  if (!p) return NullArgument("pipeline");
  if (!out) return NullArgument("out");
  *out = p->impl->config().parallel_workers;
  return BS_OK;
}

bs_status bs_pipeline_synth(bs_pipeline* p) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] { p->impl->RunSynth(); });
}

bs_status bs_pipeline_partition(bs_pipeline* p, bs_partition_summary* summary) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] {
    const auto s = p->impl->RunPartition();
    if (summary) {
      *summary = {s.n_blocks,   s.views_mean,    s.views_max,
                  s.points_mean, s.points_max,   s.points_in_roi,
                  static_cast<int>(s.flagged_blocks.size())};
    }
  });
}

bs_status bs_pipeline_block_ids(bs_pipeline* p, int* ids, size_t capacity,
                                size_t* count) {
  if (!p) return NullArgument("pipeline");
  if (!count) return NullArgument("count");
  if (capacity > 0 && !ids) return NullArgument("ids");
  return Guard([&] {
    const auto plan = p->impl->LoadPlan();
    *count = plan.blocks.size();
    for (size_t i = 0; i < plan.blocks.size() && i < capacity; ++i) {
      ids[i] = plan.blocks[i].block_id;
    }
  });
}

bs_status bs_pipeline_optimize_block(bs_pipeline* p, int block_id) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] { p->impl->RunOptimizeBlock(block_id); });
}

bs_status bs_pipeline_merge(bs_pipeline* p, size_t* n_primitives) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] {
    const auto scene = p->impl->RunMerge();
    if (n_primitives) *n_primitives = scene.gaussians.size();
  });
}

bs_status bs_pipeline_render(bs_pipeline* p, const char* pose_file,
                             size_t* n_written) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] {
    std::optional<std::filesystem::path> poses;
    if (pose_file) poses = std::filesystem::path(pose_file);
    const auto written = p->impl->RunRender(poses);
    if (n_written) *n_written = written.size();
  });
}

bs_status bs_pipeline_eval(bs_pipeline* p, bs_eval_summary* summary) {
  if (!p) return NullArgument("pipeline");
  return Guard([&] {
    const auto r = p->impl->RunEval();
    if (summary) {
      *summary = {r.views.size(), r.mean_psnr, r.mean_ssim, r.render_seconds};
    }
  });
}

bs_status bs_gaussians_read_ply(const char* path, bs_gaussians** out) {
  if (!path) return NullArgument("path");
  if (!out) return NullArgument("out");
  *out = nullptr;
  return Guard([&] {
    auto g = std::make_unique<bs_gaussians>();
    g->set = blocksplat::ReadPly(path);
    *out = g.release();
  });
}

bs_status bs_gaussians_write_ply(const bs_gaussians* g, const char* path) {
  if (!g) return NullArgument("gaussians");
  if (!path) return NullArgument("path");
  return Guard([&] { blocksplat::WritePly(g->set, path); });
}

size_t bs_gaussians_count(const bs_gaussians* g) { return g ? g->set.size() : 0; }

void bs_gaussians_free(bs_gaussians* g) { delete g; }

bs_status bs_render(const bs_gaussians* g, const bs_camera* cam,
                    const float background[3], float* rgb, float* depth,
                    float* alpha) {
  if (!g) return NullArgument("gaussians");
  if (!cam) return NullArgument("cam");
  if (!rgb) return NullArgument("rgb");
  return Guard([&] {
    blocksplat::CameraIntrinsics k{cam->width, cam->height, cam->fx,
                                   cam->fy,    cam->cx,     cam->cy};
    k.Validate();
    blocksplat::Pose pose;
    pose.rotation = blocksplat::QuaternionToRotation(
        blocksplat::Vec4(cam->qvec[0], cam->qvec[1], cam->qvec[2], cam->qvec[3]));
    pose.translation = blocksplat::Vec3(cam->tvec[0], cam->tvec[1], cam->tvec[2]);
    blocksplat::Vec3 bg = blocksplat::Vec3::Zero();
    if (background) bg = blocksplat::Vec3(background[0], background[1], background[2]);
    const auto rv = blocksplat::Render(g->set, k, pose, bg);
    for (size_t i = 0; i < rv.color.data.size(); ++i) {
      rgb[i] = static_cast<float>(rv.color.data[i]);
    }
    for (size_t i = 0; i < rv.depth.data.size(); ++i) {
      if (depth) depth[i] = static_cast<float>(rv.depth.data[i]);
      if (alpha) alpha[i] = static_cast<float>(rv.accum_alpha.data[i]);
    }
  });
}

bs_status bs_psnr(const float* a, const float* b, size_t n, double* out) {
  if (!a || !b) return NullArgument("buffers");
  if (!out) return NullArgument("out");
  return Guard([&] {
    blocksplat::Image ia(static_cast<int>(n), 1, 1), ib(static_cast<int>(n), 1, 1);
    for (size_t i = 0; i < n; ++i) {
      ia.data[i] = a[i];
      ib.data[i] = b[i];
    }
    *out = blocksplat::Psnr(ia, ib);
  });
}

}  // extern "C"
