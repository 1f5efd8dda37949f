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

#include "blocksplat/scene_partition.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace blocksplat {
namespace {

constexpr uint64_t kRansacSeed = 0x9e3779b97f4a7c15ULL;
constexpr int kRansacIterations = 256;
constexpr double kGroundFraction = 0.3;
constexpr double kInlierFraction = 0.01;
constexpr double kRoiQuantile = 0.02;

Mat3 AxisPermutation(UpAxis axis) {
  Mat3 r;
  switch (axis) {
    case UpAxis::kAuto:
    case UpAxis::kPosY: return Mat3::Identity();
    case UpAxis::kNegY: r << 1, 0, 0, 0, -1, 0, 0, 0, -1; return r;
    case UpAxis::kPosZ: r << 1, 0, 0, 0, 0, 1, 0, -1, 0; return r;
    case UpAxis::kNegZ: r << 1, 0, 0, 0, 0, -1, 0, 1, 0; return r;
    case UpAxis::kPosX: r << 0, 1, 0, -1, 0, 0, 0, 0, 1; return r;
    case UpAxis::kNegX: r << 0, -1, 0, 1, 0, 0, 0, 0, 1; return r;
  }
  return Mat3::Identity();
}

// Unit normal of the best-fit plane (smallest principal axis) and the
// principal standard deviations in decreasing order.
std::pair<Vec3, Vec3> PrincipalFrame(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return {eig.eigenvectors().col(0).normalized(), Vec3(ev[2], ev[1], ev[0])};
}

Vec3 OrientNormal(Vec3 n, const SparseModel& model, const Vec3& centroid) {
  double side = 0.0;
  for (const auto& [id, v] : model.views) {
    side += n.dot(v.pose.center() - centroid);
  }
  if (side < 0.0) return -n;
  if (side > 0.0) return n;
  int k;
  n.cwiseAbs().maxCoeff(&k);
  return n[k] < 0.0 ? -n : n;
}

double Quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

struct Builder {
  const std::vector<Vec2>& ground;
  const PartitionConfig& cfg;
  BlockPlan& plan;

  int Build(const Rect& bounds, int depth, std::vector<int> members) {
    const int node_index = static_cast<int>(plan.tree.size());
    plan.tree.emplace_back();
    SplitNode node;
    node.depth = depth;
    node.bounds = bounds;
    node.point_count = static_cast<int>(members.size());

    if (node.point_count > cfg.block_point_threshold && depth < cfg.max_depth) {
      node.axis = bounds.depth() > bounds.width() ? 1 : 0;
      const double lo = node.axis == 0 ? bounds.x0 : bounds.z0;
      const double hi = node.axis == 0 ? bounds.x1 : bounds.z1;
      node.coordinate = 0.5 * (lo + hi);
      Rect lower = bounds;
      Rect upper = bounds;
      if (node.axis == 0) {
        lower.x1 = node.coordinate;
        upper.x0 = node.coordinate;
        upper.closed_x0 = false;
      } else {
        lower.z1 = node.coordinate;
        upper.z0 = node.coordinate;
        upper.closed_z0 = false;
      }
      std::vector<int> lower_members, upper_members;
      for (int i : members) {
        const double c = node.axis == 0 ? ground[i].x() : ground[i].y();
        (c <= node.coordinate ? lower_members : upper_members).push_back(i);
      }
      members.clear();
      node.lower_child = Build(lower, depth + 1, std::move(lower_members));
      node.upper_child = Build(upper, depth + 1, std::move(upper_members));
    } else {
      Block block;
      block.block_id = static_cast<int>(plan.blocks.size());
      block.bounds = bounds;
      block.depth = depth;
      block.point_count = node.point_count;
      node.block_id = block.block_id;
      plan.blocks.push_back(std::move(block));
    }
    plan.tree[node_index] = node;
    return node_index;
  }
};

nlohmann::json RectToJson(const Rect& r) {
  return {{"x0", r.x0}, {"z0", r.z0}, {"x1", r.x1}, {"z1", r.z1},
          {"closed_x0", r.closed_x0}, {"closed_z0", r.closed_z0}};
}

Rect RectFromJson(const nlohmann::json& j) {
  Rect r;
  r.x0 = j.at("x0").get<double>();
  r.z0 = j.at("z0").get<double>();
  r.x1 = j.at("x1").get<double>();
  r.z1 = j.at("z1").get<double>();
  r.closed_x0 = j.value("closed_x0", true);
  r.closed_z0 = j.value("closed_z0", true);
  return r;
}

}  // namespace

UpAxis ParseUpAxis(const std::string& s) {
  if (s == "auto") return UpAxis::kAuto;
  if (s == "+x") return UpAxis::kPosX;
  if (s == "-x") return UpAxis::kNegX;
  if (s == "+y") return UpAxis::kPosY;
  if (s == "-y") return UpAxis::kNegY;
  if (s == "+z") return UpAxis::kPosZ;
  if (s == "-z") return UpAxis::kNegZ;
  throw Error(ErrorCode::kConfig, "unknown up_axis '" + s + "'");
}

std::string UpAxisName(UpAxis axis) {
  switch (axis) {
    case UpAxis::kAuto: return "auto";
    case UpAxis::kPosX: return "+x";
    case UpAxis::kNegX: return "-x";
    case UpAxis::kPosY: return "+y";
    case UpAxis::kNegY: return "-y";
    case UpAxis::kPosZ: return "+z";
    case UpAxis::kNegZ: return "-z";
  }
  return "auto";
}

void PartitionConfig::Validate() const {
  if (max_depth < 0) throw Error(ErrorCode::kConfig, "max_depth must be >= 0");
  if (block_point_threshold < 1) {
    throw Error(ErrorCode::kConfig, "block_point_threshold must be >= 1");
  }
  if (!(assign_ratio_threshold > 0.0 && assign_ratio_threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "assign_ratio_threshold must be in (0,1]");
  }
  if (roi && !(roi->area() > 0.0)) {
    throw Error(ErrorCode::kConfig, "manual roi must have positive area");
  }
}

int BlockPlan::Locate(const Vec3& world) const {
  const Vec2 g = Ground(world);
  if (tree.empty() || !roi.contains(g.x(), g.y())) return -1;
  int node = 0;
  while (tree[node].block_id < 0) {
    const SplitNode& n = tree[node];
    const double c = n.axis == 0 ? g.x() : g.y();
    node = c <= n.coordinate ? n.lower_child : n.upper_child;
  }
  return tree[node].block_id;
}

const Block& BlockPlan::block(int id) const {
  if (id < 0 || id >= static_cast<int>(blocks.size())) {
    throw Error(ErrorCode::kPlanMismatch,
                "block " + std::to_string(id) + " is not in the plan");
  }
  return blocks[id];
}

Mat3 EstimateAlignment(const SparseModel& model, const PartitionConfig& cfg) {
  if (cfg.up_axis != UpAxis::kAuto) return AxisPermutation(cfg.up_axis);

  std::vector<Vec3> pts;
  pts.reserve(model.points.size());
  for (const auto& [id, p] : model.points) pts.push_back(p.position);
  if (pts.size() < 3) {
    throw Error(ErrorCode::kDegenerateGeometry, "fewer than 3 points");
  }
  const auto [guess_raw, spread] = PrincipalFrame(pts);
  if (!(spread[1] > 1e-9 * std::max(1.0, spread[0]))) {
    throw Error(ErrorCode::kDegenerateGeometry, "points are collinear");
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  const Vec3 guess = OrientNormal(guess_raw, model, centroid);

  // Lowest-elevation fraction of points along the initial guess.
  std::vector<Vec3> low = pts;
  std::sort(low.begin(), low.end(), [&](const Vec3& a, const Vec3& b) {
    return a.dot(guess) < b.dot(guess);
  });
  const size_t keep = std::max<size_t>(
      3, static_cast<size_t>(std::ceil(kGroundFraction * low.size())));
  low.resize(std::min(keep, low.size()));

  // Inlier threshold from the in-plane extent of the candidates.
  Vec3 u = guess.unitOrthogonal();
  Vec3 v = guess.cross(u);
  Vec2 lo(INFINITY, INFINITY), hi(-INFINITY, -INFINITY);
  for (const auto& p : low) {
    const Vec2 q(p.dot(u), p.dot(v));
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const double threshold =
      std::max(kInlierFraction * (hi - lo).norm(), 1e-12);

  std::mt19937_64 rng(kRansacSeed);
  std::uniform_int_distribution<size_t> pick(0, low.size() - 1);
  size_t best_count = 0;
  std::vector<Vec3> best_inliers;
  for (int it = 0; it < kRansacIterations; ++it) {
    const Vec3& a = low[pick(rng)];
    const Vec3& b = low[pick(rng)];
    const Vec3& c = low[pick(rng)];
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() < 1e-15) continue;
    n.normalize();
    std::vector<Vec3> inliers;
    for (const auto& p : low) {
      if (std::abs(n.dot(p - a)) <= threshold) inliers.push_back(p);
    }
    if (inliers.size() > best_count) {
      best_count = inliers.size();
      best_inliers = std::move(inliers);
    }
  }
  Vec3 normal = guess;
  if (best_inliers.size() >= 3) {
    normal = PrincipalFrame(best_inliers).first;
    if (normal.dot(guess) < 0.0) normal = -normal;
  }
  const Eigen::Quaterniond q =
      Eigen::Quaterniond::FromTwoVectors(normal, Vec3::UnitY());
  return q.toRotationMatrix();
}

Rect ComputeRoi(const SparseModel& model, const Mat3& alignment,
                const PartitionConfig& cfg) {
  std::vector<double> xs, zs;
  xs.reserve(model.points.size());
  zs.reserve(model.points.size());
  for (const auto& [id, p] : model.points) {
    const Vec3 a = alignment * p.position;
    xs.push_back(a.x());
    zs.push_back(a.z());
  }
  if (cfg.roi) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (cfg.roi->contains(xs[i], zs[i])) return *cfg.roi;
    }
    throw Error(ErrorCode::kEmptyRoi, "no sparse point inside the manual roi");
  }
  if (xs.empty()) throw Error(ErrorCode::kEmptyRoi, "no sparse points");
  Rect r;
  r.x0 = Quantile(xs, kRoiQuantile);
  r.x1 = Quantile(xs, 1.0 - kRoiQuantile);
  r.z0 = Quantile(zs, kRoiQuantile);
  r.z1 = Quantile(zs, 1.0 - kRoiQuantile);
  if (!(r.area() > 0.0)) {
    throw Error(ErrorCode::kEmptyRoi, "automatic roi has zero area");
  }
  return r;
}

BlockPlan PartitionGround(const std::vector<Vec2>& ground, const Rect& roi,
                          const PartitionConfig& cfg) {
  cfg.Validate();
  if (!(roi.area() > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "roi has zero area");
  }
  BlockPlan plan;
  plan.roi = roi;
  std::vector<int> members;
  for (int i = 0; i < static_cast<int>(ground.size()); ++i) {
    if (roi.contains(ground[i].x(), ground[i].y())) members.push_back(i);
  }
  Builder{ground, cfg, plan}.Build(roi, 0, std::move(members));
  return plan;
}

BlockPlan Partition(const SparseModel& model, const PartitionConfig& cfg) {
  cfg.Validate();
  const Mat3 alignment = EstimateAlignment(model, cfg);
  const Rect roi = ComputeRoi(model, alignment, cfg);
  std::vector<Vec2> ground;
  ground.reserve(model.points.size());
  for (const auto& [id, p] : model.points) {
    const Vec3 a = alignment * p.position;
    ground.emplace_back(a.x(), a.z());
  }
  BlockPlan plan = PartitionGround(ground, roi, cfg);
  plan.alignment = alignment;
  return plan;
}

std::vector<ViewBlockScore> AssignViews(const SparseModel& model,
                                        BlockPlan& plan,
                                        const PartitionConfig& cfg,
                                        const std::vector<int>& candidates) {
  std::map<int64_t, int> point_block;
  for (const auto& [id, p] : model.points) {
    point_block[id] = plan.Locate(p.position);
  }
  std::vector<int> view_ids = candidates;
  if (view_ids.empty()) {
    for (const auto& [id, v] : model.views) view_ids.push_back(id);
  }
  std::sort(view_ids.begin(), view_ids.end());
  view_ids.erase(std::unique(view_ids.begin(), view_ids.end()), view_ids.end());

  for (auto& b : plan.blocks) b.assigned_view_ids.clear();
  std::vector<ViewBlockScore> scores;
  const int n_blocks = static_cast<int>(plan.blocks.size());
  for (int vid : view_ids) {
    const auto it = model.views.find(vid);
    if (it == model.views.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown view " + std::to_string(vid));
    }
    const auto& visible = it->second.visible_point_ids;
    const int total = static_cast<int>(visible.size());
    if (total == 0) continue;
    std::vector<int> counts(n_blocks, 0);
    for (int64_t pid : visible) {
      const auto pb = point_block.find(pid);
      if (pb != point_block.end() && pb->second >= 0) ++counts[pb->second];
    }
    for (int b = 0; b < n_blocks; ++b) {
      ViewBlockScore s;
      s.view_id = vid;
      s.block_id = b;
      s.in_block_count = counts[b];
      s.total_visible = total;
      s.ratio = static_cast<double>(counts[b]) / total;
      if (s.ratio >= cfg.assign_ratio_threshold) {
        plan.blocks[b].assigned_view_ids.push_back(vid);
      }
      scores.push_back(s);
    }
  }
  plan.flagged_blocks.clear();
  for (const auto& b : plan.blocks) {
    if (b.assigned_view_ids.empty()) plan.flagged_blocks.push_back(b.block_id);
  }
  return scores;
}

nlohmann::json BlockPlanToJson(const BlockPlan& plan) {
  nlohmann::json j;
  nlohmann::json align = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    align.push_back({plan.alignment(r, 0), plan.alignment(r, 1),
                     plan.alignment(r, 2)});
  }
  j["alignment"] = align;
  j["roi"] = RectToJson(plan.roi);
  nlohmann::json tree = nlohmann::json::array();
  for (const auto& n : plan.tree) {
    nlohmann::json node = {{"depth", n.depth},
                           {"bounds", RectToJson(n.bounds)},
                           {"point_count", n.point_count}};
    if (n.block_id >= 0) {
      node["block_id"] = n.block_id;
    } else {
      node["axis"] = n.axis == 0 ? "x" : "z";
      node["coordinate"] = n.coordinate;
      node["lower"] = n.lower_child;
      node["upper"] = n.upper_child;
    }
    tree.push_back(std::move(node));
  }
  j["tree"] = tree;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : plan.blocks) {
    blocks.push_back({{"block_id", b.block_id},
                      {"bounds", RectToJson(b.bounds)},
                      {"depth", b.depth},
                      {"point_count", b.point_count},
                      {"assigned_view_ids", b.assigned_view_ids}});
  }
  j["blocks"] = blocks;
  j["flagged_blocks"] = plan.flagged_blocks;
  return j;
}

BlockPlan BlockPlanFromJson(const nlohmann::json& j) {
  BlockPlan plan;
  try {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        plan.alignment(r, c) = j.at("alignment").at(r).at(c).get<double>();
      }
    }
    plan.roi = RectFromJson(j.at("roi"));
    for (const auto& n : j.at("tree")) {
      SplitNode node;
      node.depth = n.at("depth").get<int>();
      node.bounds = RectFromJson(n.at("bounds"));
      node.point_count = n.at("point_count").get<int>();
      if (n.contains("block_id")) {
        node.block_id = n.at("block_id").get<int>();
      } else {
        node.axis = n.at("axis").get<std::string>() == "x" ? 0 : 1;
        node.coordinate = n.at("coordinate").get<double>();
        node.lower_child = n.at("lower").get<int>();
        node.upper_child = n.at("upper").get<int>();
      }
      plan.tree.push_back(node);
    }
    for (const auto& b : j.at("blocks")) {
      Block block;
      block.block_id = b.at("block_id").get<int>();
      block.bounds = RectFromJson(b.at("bounds"));
      block.depth = b.at("depth").get<int>();
      block.point_count = b.at("point_count").get<int>();
      block.assigned_view_ids =
          b.at("assigned_view_ids").get<std::vector<int>>();
      plan.blocks.push_back(std::move(block));
    }
    plan.flagged_blocks = j.value("flagged_blocks", std::vector<int>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("blockplan.json: ") + e.what());
  }
  for (int i = 0; i < static_cast<int>(plan.blocks.size()); ++i) {
    if (plan.blocks[i].block_id != i) {
      throw Error(ErrorCode::kMalformedRecord, "blockplan.json: block ids");
    }
  }
  return plan;
}

}  // namespace blocksplat
