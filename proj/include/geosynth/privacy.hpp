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
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geosynth/point_set.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

// Privacy budget epsilon: finite positive, or infinite for the non-private
// mode. With two pseudo-labels the derived flip probability is
// q = 1 / (e^eps + 1), which lies in (0, 0.5) for finite eps and is 0 when
// eps is infinite.
struct PrivacyBudget {
  double epsilon = std::numeric_limits<double>::infinity();

  bool is_finite() const { return std::isfinite(epsilon); }

  static PrivacyBudget finite(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
      throw std::invalid_argument("PrivacyBudget: epsilon must be a positive real");
    return PrivacyBudget{eps};
  }
  static PrivacyBudget non_private() { return PrivacyBudget{std::numeric_limits<double>::infinity()}; }

  // Accepts a decimal value or "inf".
  static PrivacyBudget parse(const std::string& s) {
    if (s == "inf" || s == "infinity") return non_private();
    return finite(std::stod(s));
  }

  std::string to_string() const {
    if (!is_finite()) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", epsilon);
    return buf;
  }
};

// q = 1 / (e^eps + 1); 0 for infinite eps.
inline double flip_probability(const PrivacyBudget& budget) {
  if (!budget.is_finite()) return 0.0;
  if (!(budget.epsilon > 0.0)) throw std::invalid_argument("flip_probability: epsilon must be positive");
  return 1.0 / (std::exp(budget.epsilon) + 1.0);
}

// p = e^eps / (e^eps + 1) = 1 - q.
inline double keep_probability(const PrivacyBudget& budget) {
  if (!budget.is_finite()) return 1.0;
  const double e = std::exp(budget.epsilon);
  return e / (e + 1.0);
}

// Worst-case likelihood ratio max_out Pr[out|in=1] / Pr[out|in=0] of the
// two-label randomized response channel; equals e^eps, unbounded for q = 0.
inline double analytic_ldp_ratio(const PrivacyBudget& budget) {
  if (!budget.is_finite()) return std::numeric_limits<double>::infinity();
  return std::exp(budget.epsilon);
}

// Each bit independently inverted with probability q. Length preserved,
// deterministic given the stream.
inline std::vector<std::uint8_t> perturb_labels(const std::vector<std::uint8_t>& labels, double q,
                                                Rng& rng) {
  if (!(q >= 0.0 && q < 0.5))
    throw std::invalid_argument("perturb_labels: q must lie in [0, 0.5)");
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = rng.bernoulli(q) ? static_cast<std::uint8_t>(1 - labels[i]) : labels[i];
  return out;
}

// A point together with its true pseudo-label and the persistent once-flipped
// label (1 = real, 0 = fake).
struct LabeledPoint {
  std::int64_t index = 0;
  Vec coords;
  std::uint8_t true_label = 1;
  std::uint8_t flipped_label = 1;
};

// The device-side output: coordinates plus persistent flipped labels, keyed
// by stable id. True labels never leave the privatization step; training
// consumes this type only.
struct PrivatizedDataset {
  Mat coords;                       // m x n
  std::vector<std::int64_t> index;  // size n
  std::vector<std::uint8_t> flipped_label;

  Eigen::Index dim() const { return coords.rows(); }
  Eigen::Index count() const { return coords.cols(); }
};

// Assigns every real point label 1 and draws its flipped label exactly once.
// Later batch sampling reads the stored label by id and never re-randomizes.
inline PrivatizedDataset privatize_real_dataset(const PointSet& ps, const PrivacyBudget& budget,
                                                Rng& rng) {
  const double q = flip_probability(budget);
  std::vector<std::uint8_t> ones(static_cast<std::size_t>(ps.count()), 1);
  PrivatizedDataset out;
  out.coords = ps.coords;
  out.index = ps.index;
  out.flipped_label = perturb_labels(ones, q, rng);
  return out;
}

// FNV-1a hash of the (index, flipped_label) table; used to assert flip-once
// persistence across a training run.
inline std::uint64_t label_table_hash(const PrivatizedDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < data.index.size(); ++i) {
    mix(static_cast<std::uint64_t>(data.index[i]));
    mix(data.flipped_label[i]);
  }
  return h;
}

// Monte Carlo estimate of max_out Pr[out|in=1] / Pr[out|in=0] for the flip
// channel. Returns +inf when a cell with nonzero numerator has an empty
// denominator (unbounded, non-private).
inline double empirical_ldp_ratio(double q, std::int64_t trials, Rng& rng) {
  if (trials < 10000) throw std::invalid_argument("empirical_ldp_ratio: trials must be >= 10^4");
  if (!(q >= 0.0 && q < 0.5)) throw std::invalid_argument("empirical_ldp_ratio: q must lie in [0, 0.5)");
  std::int64_t out1_given1 = 0, out1_given0 = 0;
  for (std::int64_t t = 0; t < trials; ++t)
    if (!rng.bernoulli(q)) ++out1_given1;  // input 1 kept
  for (std::int64_t t = 0; t < trials; ++t)
    if (rng.bernoulli(q)) ++out1_given0;  // input 0 flipped
  const double n = static_cast<double>(trials);
  const double p11 = out1_given1 / n, p10 = out1_given0 / n;
  const double p01 = 1.0 - p11, p00 = 1.0 - p10;
  double ratio = 0.0;
  for (const auto [num, den] : {std::pair{p11, p10}, std::pair{p01, p00}}) {
    if (den == 0.0) {
      if (num > 0.0) return std::numeric_limits<double>::infinity();
      continue;  // 0/0 cell carries no information
    }
    ratio = std::max(ratio, num / den);
  }
  return ratio;
}

// Convex hull area of the first two dimensions divided by the bounding-box
// area; reported as a soft coverage diagnostic, nothing is enforced.
inline double domain_coverage_ratio(const PointSet& ps, const DatasetBounds& bounds) {
  const Eigen::Index n = ps.count();
  if (n < 3) return 0.0;
  std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = {ps.coords(0, i), ps.coords(1, i)};
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  // Andrew's monotone chain.
  std::vector<std::pair<double, double>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size(); i-- > 1;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k > 0 ? k - 1 : 0);
  double area2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area2 += a.first * b.second - b.first * a.second;
  }
  const double hull_area = std::abs(area2) * 0.5;
  const double box_area = (bounds.max[0] - bounds.min[0]) * (bounds.max[1] - bounds.min[1]);
  return box_area > 0.0 ? hull_area / box_area : 0.0;
}

}  // namespace geosynth
