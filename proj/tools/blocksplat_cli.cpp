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
//
// blocksplat: command-line driver for the block reconstruction pipeline.
// Talks to the library only through the C interface.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blocksplat/blocksplat.h"

extern char** environ;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

int ExitFor(bs_status s) {
  if (s == BS_OK) return kExitOk;
  if (s == BS_ERR_CONFIG || s == BS_ERR_INVALID_ARGUMENT) return kExitUsage;
  return kExitInternal;
}

int Report(bs_status s, const char* stage) {
  if (s != BS_OK) {
    std::fprintf(stderr, "blocksplat %s: %s: %s\n", stage, bs_status_name(s),
                 bs_last_error());
  }
  return ExitFor(s);
}

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> block;
  bool all = false;
  int workers = 0;
  std::string poses;
};

std::string SelfExe() {
  std::vector<char> buf(4096);
  const ssize_t n = readlink("/proc/self/exe", buf.data(), buf.size() - 1);
  if (n <= 0) return "blocksplat";
  return std::string(buf.data(), static_cast<size_t>(n));
}

// Runs one child per block, at most `workers` at a time. Returns the ids of
// blocks whose worker failed.
std::vector<int> RunWorkers(const Options& opt, const std::vector<int>& ids,
                            int workers) {
  const std::string exe = SelfExe();
  std::map<pid_t, int> running;
  std::vector<int> failed;
  size_t next = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid <= 0) return;
    const auto it = running.find(pid);
    if (it == running.end()) return;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(it->second);
    running.erase(it);
  };
  while (next < ids.size() || !running.empty()) {
    while (next < ids.size() && static_cast<int>(running.size()) < workers) {
      const int id = ids[next++];
      std::vector<std::string> args = {exe, "--config", opt.config};
      for (const auto& o : opt.overrides) {
        args.push_back("--set");
        args.push_back(o);
      }
      args.insert(args.end(), {"optimize", "--block", std::to_string(id)});
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      pid_t pid = 0;
      if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
        std::fprintf(stderr, "blocksplat optimize: cannot spawn worker for block %d\n", id);
        failed.push_back(id);
        continue;
      }
      running[pid] = id;
    }
    if (!running.empty()) reap_one();
  }
  std::sort(failed.begin(), failed.end());
  return failed;
}

int Optimize(bs_pipeline* p, const Options& opt) {
  size_t count = 0;
  bs_status s = bs_pipeline_block_ids(p, nullptr, 0, &count);
  if (s != BS_OK) return Report(s, "optimize");
  std::vector<int> ids(count);
  s = bs_pipeline_block_ids(p, ids.data(), ids.size(), &count);
  if (s != BS_OK) return Report(s, "optimize");

  if (opt.block) {
    if (std::find(ids.begin(), ids.end(), *opt.block) == ids.end()) {
      std::fprintf(stderr, "blocksplat optimize: no block %d in the plan\n", *opt.block);
      return kExitUsage;
    }
    return Report(bs_pipeline_optimize_block(p, *opt.block), "optimize");
  }
  int workers = opt.workers;
  if (workers <= 0) bs_pipeline_parallel_workers(p, &workers);
  if (workers <= 1) {
    int rc = kExitOk;
    for (int id : ids) {
      const bs_status bs = bs_pipeline_optimize_block(p, id);
      if (bs != BS_OK) rc = std::max(rc, Report(bs, "optimize"));
    }
    return rc;
  }
  const auto failed = RunWorkers(opt, ids, workers);
  for (int id : failed) {
    std::fprintf(stderr, "blocksplat optimize: block %d failed\n", id);
  }
  if (!failed.empty()) {
    std::fprintf(stderr, "blocksplat optimize: %zu of %zu blocks failed\n",
                 failed.size(), ids.size());
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-wise Gaussian splatting reconstruction pipeline"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("-c,--config", opt.config, "Pipeline TOML config")->required();
  app.add_option("--set", opt.overrides, "Override section.key=value")
      ->take_all();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic test scene");
  auto* partition = app.add_subcommand("partition", "Partition the scene into blocks");
  auto* optimize = app.add_subcommand("optimize", "Optimize blocks");
  auto* block_opt = optimize->add_option("--block", opt.block, "Block id");
  auto* all_opt = optimize->add_flag("--all", opt.all, "Every block in the plan");
  block_opt->excludes(all_opt);
  optimize->add_option("--workers", opt.workers, "Worker processes")
      ->check(CLI::PositiveNumber);
  auto* merge = app.add_subcommand("merge", "Merge optimized blocks");
  auto* render = app.add_subcommand("render", "Render views of the merged scene");
  render->add_option("--poses", opt.poses, "Pose file; default held-out views");
  auto* eval = app.add_subcommand("eval", "Evaluate held-out views");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (optimize->parsed() && !opt.block && !opt.all) {
    std::fprintf(stderr, "blocksplat optimize: pass --block <id> or --all\n");
    return kExitUsage;
  }

  bs_pipeline* p = nullptr;
  bs_status s = bs_pipeline_open(opt.config.c_str(), &p);
  if (s != BS_OK) return Report(s, "config");
  for (const auto& o : opt.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "blocksplat: --set expects section.key=value\n");
      bs_pipeline_close(p);
      return kExitUsage;
    }
    s = bs_pipeline_set(p, o.substr(0, eq).c_str(), o.substr(eq + 1).c_str());
    if (s != BS_OK) {
      bs_pipeline_close(p);
      return Report(s, "config");
    }
  }

  int rc = kExitOk;
  if (synth->parsed()) {
    rc = Report(bs_pipeline_synth(p), "synth");
  } else if (partition->parsed()) {
    bs_partition_summary sum{};
    s = bs_pipeline_partition(p, &sum);
    rc = Report(s, "partition");
    if (s == BS_OK) {
      std::printf("N_blocks %d\nN_views mean %.2f max %d\nN_pts mean %.2f max %d\n"
                  "points_in_roi %d\nflagged_blocks %d\n",
                  sum.n_blocks, sum.views_mean, sum.views_max, sum.points_mean,
                  sum.points_max, sum.points_in_roi, sum.n_flagged_blocks);
    }
  } else if (optimize->parsed()) {
    rc = Optimize(p, opt);
  } else if (merge->parsed()) {
    size_t n = 0;
    s = bs_pipeline_merge(p, &n);
    rc = Report(s, "merge");
    if (s == BS_OK) std::printf("merged %zu primitives\n", n);
  } else if (render->parsed()) {
    size_t n = 0;
    s = bs_pipeline_render(p, opt.poses.empty() ? nullptr : opt.poses.c_str(), &n);
    rc = Report(s, "render");
    if (s == BS_OK) std::printf("rendered %zu views\n", n);
  } else if (eval->parsed()) {
    bs_eval_summary sum{};
    s = bs_pipeline_eval(p, &sum);
    rc = Report(s, "eval");
    if (s == BS_OK) {
      std::printf("views %zu\nmean_psnr %.4f\nmean_ssim %.5f\n", sum.n_views,
                  sum.mean_psnr, sum.mean_ssim);
    }
  }
  bs_pipeline_close(p);
  return rc;
}
