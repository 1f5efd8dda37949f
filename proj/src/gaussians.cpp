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

#include "blocksplat/gaussians.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace blocksplat {
namespace {

// Static 3-d tree over point indices, used only for initialization k-NN.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
    order_.resize(pts.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(pts.size());
    if (!pts.empty()) Build(0, pts.size());
  }

  // Squared distances to the k nearest points other than `self`, ascending.
  std::vector<double> Nearest(size_t self, int k) const {
    std::priority_queue<double> heap;
    if (!nodes_.empty()) Search(0, self, k, heap);
    std::vector<double> out;
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int Build(size_t begin, size_t end) {
    if (begin >= end) return -1;
    Vec3 lo = pts_[order_[begin]], hi = lo;
    for (size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](size_t a, size_t b) {
                       if (pts_[a][axis] != pts_[b][axis]) {
                         return pts_[a][axis] < pts_[b][axis];
                       }
                       return a < b;
                     });
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis});
    const int left = Build(begin, mid);
    const int right = Build(mid + 1, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  void Search(int node, size_t self, int k,
              std::priority_queue<double>& heap) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Vec3& q = pts_[self];
    if (n.point != self) {
      const double d2 = (pts_[n.point] - q).squaredNorm();
      if (static_cast<int>(heap.size()) < k) {
        heap.push(d2);
      } else if (d2 < heap.top()) {
        heap.pop();
        heap.push(d2);
      }
    }
    const double diff = q[n.axis] - pts_[n.point][n.axis];
    const int near = diff <= 0.0 ? n.left : n.right;
    const int far = diff <= 0.0 ? n.right : n.left;
    Search(near, self, k, heap);
    if (static_cast<int>(heap.size()) < k || diff * diff < heap.top()) {
      Search(far, self, k, heap);
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double Logit(double p) { return std::log(p / (1.0 - p)); }

void GaussianSet::reserve(size_t n) {
  positions.reserve(n);
  rotations.reserve(n);
  log_scales.reserve(n);
  opacity_logits.reserve(n);
  colors.reserve(n);
}

void GaussianSet::resize(size_t n) {
  positions.resize(n, Vec3::Zero());
  rotations.resize(n, Vec4(1, 0, 0, 0));
  log_scales.resize(n, Vec3::Zero());
  opacity_logits.resize(n, 0.0);
  colors.resize(n, Vec3::Zero());
}

void GaussianSet::push_back(const Vec3& position, const Vec4& rotation,
                            const Vec3& log_scale, double opacity_logit,
                            const Vec3& color) {
  positions.push_back(position);
  rotations.push_back(rotation);
  log_scales.push_back(log_scale);
  opacity_logits.push_back(opacity_logit);
  colors.push_back(color);
}

void GaussianSet::append_from(const GaussianSet& other, size_t i) {
  push_back(other.positions[i], other.rotations[i], other.log_scales[i],
            other.opacity_logits[i], other.colors[i]);
}

GaussianSet GaussianSet::select(const std::vector<size_t>& indices) const {
  GaussianSet out;
  out.reserve(indices.size());
  for (size_t i : indices) out.append_from(*this, i);
  return out;
}

double GaussianSet::opacity(size_t i) const {
  return Sigmoid(opacity_logits[i]);
}

std::vector<double> NeighborScale(const std::vector<Vec3>& points,
                                         int k) {
  const KdTree tree(points);
  std::vector<double> out(points.size(), 0.0);
  for (size_t i = 0; i < points.size(); ++i) {
    const auto d2 = tree.Nearest(i, k);
    if (d2.empty()) continue;
    double sum = 0.0;
    for (double d : d2) sum += d;
    out[i] = std::sqrt(sum / static_cast<double>(d2.size()));
  }
  return out;
}

BlockGaussianState InitBlockGaussians(const SparseModel& model,
                                      const Block& block,
                                      const BlockPlan& plan) {
  if (block.assigned_view_ids.empty()) {
    throw Error(ErrorCode::kNoViews,
                "block " + std::to_string(block.block_id) +
                    " has no assigned views");
  }
  const std::set<int> assigned(block.assigned_view_ids.begin(),
                               block.assigned_view_ids.end());
  std::vector<const SparsePoint*> inside, outside;
  for (const auto& [id, p] : model.points) {
    const Vec2 g = plan.Ground(p.position);
    if (block.bounds.contains(g.x(), g.y())) {
      inside.push_back(&p);
      continue;
    }
    const bool seen = std::any_of(
        p.observing_view_ids.begin(), p.observing_view_ids.end(),
        [&](int v) { return assigned.count(v) > 0; });
    if (seen) outside.push_back(&p);
  }
  if (inside.empty()) {
    throw Error(ErrorCode::kEmptyBlock,
                "block " + std::to_string(block.block_id) +
                    " contains no sparse points");
  }

  std::vector<Vec3> all;
  all.reserve(inside.size() + outside.size());
  for (const auto* p : inside) all.push_back(p->position);
  for (const auto* p : outside) all.push_back(p->position);
  const auto mean_dist = NeighborScale(all, 3);
  const double fallback = kIsolatedScaleFraction * block.bounds.diagonal();

  BlockGaussianState state;
  state.block_bounds = block.bounds;
  state.alignment = plan.alignment;
  const double opacity_logit = Logit(kInitialOpacity);
  for (size_t i = 0; i < all.size(); ++i) {
    const SparsePoint* p = i < inside.size() ? inside[i]
                                             : outside[i - inside.size()];
    const double d = mean_dist[i] > 0.0 ? mean_dist[i] : fallback;
    GaussianSet& dst = i < inside.size() ? state.block : state.auxiliary;
    dst.push_back(p->position, Vec4(1, 0, 0, 0), Vec3::Constant(std::log(d)),
                  opacity_logit, p->color);
  }
  return state;
}

GaussianSet CropToBounds(const GaussianSet& set, const Rect& bounds,
                         const Mat3& alignment) {
  std::vector<size_t> keep;
  for (size_t i = 0; i < set.size(); ++i) {
    const Vec3 a = alignment * set.positions[i];
    if (bounds.contains(a.x(), a.z())) keep.push_back(i);
  }
  return set.select(keep);
}

GaussianSet Concat(const std::vector<GaussianSet>& sets) {
  size_t n = 0;
  for (const auto& s : sets) n += s.size();
  GaussianSet out;
  out.reserve(n);
  for (const auto& s : sets) {
    for (size_t i = 0; i < s.size(); ++i) out.append_from(s, i);
  }
  return out;
}

}  // namespace blocksplat
