// Copyright 2026 The geosynth Authors.
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

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "geosynth/point_set.hpp"

namespace geosynth {

// Static k-d tree over low-dimensional points (one per column). Supports
// nearest-neighbor and radius queries; used by the metric and analytics
// kernels, with brute-force scans as the verified fallback.
template <class S>
class KdTree {
 public:
  explicit KdTree(MatX<S> pts) : pts_(std::move(pts)) {
    if (pts_.cols() == 0) throw std::invalid_argument("KdTree: empty point set");
    perm_.resize(static_cast<std::size_t>(pts_.cols()));
    std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
    nodes_.reserve(static_cast<std::size_t>(2 * pts_.cols() / kLeafSize + 2));
    root_ = build(0, pts_.cols());
  }

  S nearest_squared(const Eigen::Ref<const VecX<S>>& q) const {
    S best = std::numeric_limits<S>::max();
    nn_search(root_, q, best);
    return best;
  }

  std::int64_t count_within(const Eigen::Ref<const VecX<S>>& q, S radius) const {
    std::int64_t count = 0;
    range_search(root_, q, radius * radius, nullptr, &count);
    return count;
  }

  void collect_within(const Eigen::Ref<const VecX<S>>& q, S radius,
                      std::vector<Eigen::Index>& out) const {
    out.clear();
    std::int64_t count = 0;
    range_search(root_, q, radius * radius, &out, &count);
  }

 private:
  static constexpr Eigen::Index kLeafSize = 16;

  struct Node {
    Eigen::Index begin, end;     // leaf range in perm_
    Eigen::Index left = -1, right = -1;
    int axis = -1;               // -1 marks a leaf
    S split = S(0);
  };

  Eigen::Index build(Eigen::Index begin, Eigen::Index end) {
    const Eigen::Index id = static_cast<Eigen::Index>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    // Split on the widest dimension at the median.
    int axis = 0;
    S best_spread = S(-1);
    for (int d = 0; d < pts_.rows(); ++d) {
      S lo = pts_(d, perm_[static_cast<std::size_t>(begin)]);
      S hi = lo;
      for (Eigen::Index i = begin + 1; i < end; ++i) {
        const S v = pts_(d, perm_[static_cast<std::size_t>(i)]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        axis = d;
      }
    }
    const Eigen::Index mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                     [&](Eigen::Index a, Eigen::Index b) { return pts_(axis, a) < pts_(axis, b); });
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = pts_(axis, perm_[static_cast<std::size_t>(mid)]);
    const Eigen::Index left = build(begin, mid);
    const Eigen::Index right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  S sq_dist(const Eigen::Ref<const VecX<S>>& q, Eigen::Index col) const {
    return (pts_.col(col) - q).squaredNorm();
  }

  void nn_search(Eigen::Index node_id, const Eigen::Ref<const VecX<S>>& q, S& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (Eigen::Index i = node.begin; i < node.end; ++i)
        best = std::min(best, sq_dist(q, perm_[static_cast<std::size_t>(i)]));
      return;
    }
    const S delta = q[node.axis] - node.split;
    const Eigen::Index near = delta < S(0) ? node.left : node.right;
    const Eigen::Index far = delta < S(0) ? node.right : node.left;
    nn_search(near, q, best);
    if (delta * delta < best) nn_search(far, q, best);
  }

  void range_search(Eigen::Index node_id, const Eigen::Ref<const VecX<S>>& q, S radius_sq,
                    std::vector<Eigen::Index>* out, std::int64_t* count) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (Eigen::Index i = node.begin; i < node.end; ++i) {
        const Eigen::Index col = perm_[static_cast<std::size_t>(i)];
        if (sq_dist(q, col) <= radius_sq) {
          ++*count;
          if (out) out->push_back(col);
        }
      }
      return;
    }
    const S delta = q[node.axis] - node.split;
    const Eigen::Index near = delta < S(0) ? node.left : node.right;
    const Eigen::Index far = delta < S(0) ? node.right : node.left;
    range_search(near, q, radius_sq, out, count);
    if (delta * delta <= radius_sq) range_search(far, q, radius_sq, out, count);
  }

  MatX<S> pts_;
  std::vector<Eigen::Index> perm_;
  std::vector<Node> nodes_;
  Eigen::Index root_ = 0;
};

}  // namespace geosynth
