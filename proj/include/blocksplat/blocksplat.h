/*
 * Copyright 2026 The BlockSplat Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 * =============================================================================
 *
 * C interface to libblocksplat.
 *
 * Every fallible call returns a bs_status. On failure a message describing
 * the error is available from bs_last_error() on the calling thread until
 * the next call into the library from that thread. Handles are opaque and
 * must be released with their matching free/close function.
 */

#ifndef BLOCKSPLAT_BLOCKSPLAT_H_
#define BLOCKSPLAT_BLOCKSPLAT_H_

#include <stddef.h>

#if defined(BLOCKSPLAT_BUILDING_LIBRARY)
#define BS_API __attribute__((visibility("default")))
#else
#define BS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bs_status {
  BS_OK = 0,
  BS_ERR_INVALID_ARGUMENT = 1,
  BS_ERR_CONFIG = 2,
  BS_ERR_IO = 3,
  BS_ERR_MISSING_FILE = 4,
  BS_ERR_MALFORMED_RECORD = 5,
  BS_ERR_UNSUPPORTED_CAMERA_MODEL = 6,
  BS_ERR_VISIBILITY_ASYMMETRY = 7,
  BS_ERR_DIMENSION_MISMATCH = 8,
  BS_ERR_UNREADABLE_FILE = 9,
  BS_ERR_DEGENERATE_GEOMETRY = 10,
  BS_ERR_EMPTY_ROI = 11,
  BS_ERR_EMPTY_BLOCK = 12,
  BS_ERR_UNKNOWN_ATTRIBUTE = 13,
  BS_ERR_TRUNCATED_FILE = 14,
  BS_ERR_MISSING_FORWARD_STATE = 15,
  BS_ERR_EMPTY_DEPTH = 16,
  BS_ERR_NO_VIEWS = 17,
  BS_ERR_DIVERGED_LOSS = 18,
  BS_ERR_PLAN_MISMATCH = 19,
  BS_ERR_INTERNAL = 100
} bs_status;

BS_API const char* bs_version(void);
BS_API const char* bs_status_name(bs_status status);
BS_API const char* bs_last_error(void);

/* ---- pipeline ---------------------------------------------------------- */

typedef struct bs_pipeline bs_pipeline;

typedef struct bs_partition_summary {
  int n_blocks;
  double views_mean;
  int views_max;
  double points_mean;
  int points_max;
  int points_in_roi;
  int n_flagged_blocks; /* blocks that received no view */
} bs_partition_summary;

typedef struct bs_eval_summary {
  size_t n_views;
  double mean_psnr;
  double mean_ssim;
  double render_seconds;
} bs_eval_summary;

/* Loads a TOML config. Relative paths resolve against its directory. */
BS_API bs_status bs_pipeline_open(const char* config_path, bs_pipeline** out);
BS_API void bs_pipeline_close(bs_pipeline* p);

/* Overrides one config value, e.g. ("train.iterations", "100"). */
BS_API bs_status bs_pipeline_set(bs_pipeline* p, const char* key,
                                 const char* value);

BS_API bs_status bs_pipeline_parallel_workers(const bs_pipeline* p, int* out);

BS_API bs_status bs_pipeline_synth(bs_pipeline* p);
BS_API bs_status bs_pipeline_partition(bs_pipeline* p,
                                       bs_partition_summary* summary);

/* Block ids of the saved plan. Writes at most capacity ids; *count always
 * receives the total. */
BS_API bs_status bs_pipeline_block_ids(bs_pipeline* p, int* ids,
                                       size_t capacity, size_t* count);
BS_API bs_status bs_pipeline_optimize_block(bs_pipeline* p, int block_id);
BS_API bs_status bs_pipeline_merge(bs_pipeline* p, size_t* n_primitives);

/* pose_file may be NULL to render the held-out views. */
BS_API bs_status bs_pipeline_render(bs_pipeline* p, const char* pose_file,
                                    size_t* n_written);
BS_API bs_status bs_pipeline_eval(bs_pipeline* p, bs_eval_summary* summary);

/* ---- primitives and rendering ------------------------------------------ */

typedef struct bs_gaussians bs_gaussians;

typedef struct bs_camera {
  int width;
  int height;
  double fx, fy, cx, cy;
  double qvec[4]; /* world-to-camera rotation, (w, x, y, z) */
  double tvec[3]; /* world-to-camera translation */
} bs_camera;

BS_API bs_status bs_gaussians_read_ply(const char* path, bs_gaussians** out);
BS_API bs_status bs_gaussians_write_ply(const bs_gaussians* g, const char* path);
BS_API size_t bs_gaussians_count(const bs_gaussians* g);
BS_API void bs_gaussians_free(bs_gaussians* g);

/* Buffers are row-major: rgb holds width*height*3 floats, depth and alpha
 * width*height each. depth and alpha may be NULL. */
BS_API bs_status bs_render(const bs_gaussians* g, const bs_camera* cam,
                           const float background[3], float* rgb,
                           float* depth, float* alpha);

/* PSNR of two [0,1] buffers of n values, capped at 100 dB. */
BS_API bs_status bs_psnr(const float* a, const float* b, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* BLOCKSPLAT_BLOCKSPLAT_H_ */
