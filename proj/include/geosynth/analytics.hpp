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
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "geosynth/kdtree.hpp"
#include "geosynth/point_set.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

// Workload protocol defaults.
inline const std::vector<double> kDefaultRangeRadiiMeters{50, 100, 200, 500, 1000};
inline const std::vector<int> kDefaultHotspotGranularities{64, 128, 256, 512, 1024};
inline const std::vector<int> kDefaultFacilityKs{1, 5, 10, 20, 50, 75};
inline constexpr int kDefaultFacilityCandidates = 100;
inline constexpr double kDefaultAttractionRadiusMeters = 200.0;
inline constexpr double kHotspotPercentile = 0.95;

// Named candidate places in source units (first two dimensions).
struct PlaceSet {
  Mat coords;  // 2 x n
  std::vector<std::string> names;

  Eigen::Index count() const { return coords.cols(); }
};

// Seeded fallback when no places file is supplied: candidate places drawn
// from the data's own support.
inline PlaceSet random_places(const PointSet& data, Eigen::Index n, std::uint64_t seed) {
  if (n > data.count()) throw std::invalid_argument("random_places: more places than points");
  Rng rng = make_stream(seed, Stream::kPlaces);
  const auto picks = rng.sample_without_replacement(data.count(), n);
  PlaceSet out;
  out.coords.resize(2, n);
  out.names.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out.coords.col(i) = data.coords.col(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(i)])).head(2);
    out.names[static_cast<std::size_t>(i)] = "p" + std::to_string(i);
  }
  return out;
}

namespace detail {

// First two dimensions scaled into meters so Euclidean queries match
// ground distances under the local equirectangular approximation.
inline Mat to_meter_plane(const Mat& coords, const DatasetBounds& bounds) {
  Mat out(2, coords.cols());
  out.row(0) = coords.row(0) * bounds.meters_per_unit[0];
  out.row(1) = coords.row(1) * bounds.meters_per_unit[1];
  return out;
}

}  // namespace detail

// Counts of points within `radius_m` meters of each place. One shared index
// serves all places and radii.
class RangeCounter {
 public:
  RangeCounter(const PointSet& pts, const DatasetBounds& bounds)
      : bounds_(bounds), tree_(detail::to_meter_plane(pts.coords, bounds)) {}

  std::int64_t count(const Eigen::Ref<const Vec>& center_source_units, double radius_m) const {
    if (!(radius_m > 0.0)) throw std::invalid_argument("range query: radius must be positive");
    Vec q(2);
    q << center_source_units[0] * bounds_.meters_per_unit[0],
        center_source_units[1] * bounds_.meters_per_unit[1];
    return tree_.count_within(q, radius_m);
  }

 private:
  DatasetBounds bounds_;
  KdTree<double> tree_;
};

inline std::int64_t range_count(const PointSet& pts, const Eigen::Ref<const Vec>& center,
                                double radius_m, const DatasetBounds& bounds) {
  return RangeCounter(pts, bounds).count(center, radius_m);
}

struct RangeErrorRow {
  double radius_m = 0.0;
  double mae = 0.0;
  double mpe = 0.0;
  std::int64_t mpe_excluded = 0;  // places with zero true count
};

// Mean absolute and mean percentage error of synthetic range counts against
// real ones over a place set. Synthetic counts are scaled by
// |real| / |synth| so totals are comparable; places with zero true count are
// excluded from the MPE and reported separately.
inline std::vector<RangeErrorRow> range_query_error(const PointSet& real, const PointSet& synth,
                                                    const PlaceSet& places,
                                                    const std::vector<double>& radii_m,
                                                    const DatasetBounds& bounds) {
  if (places.count() == 0) throw std::invalid_argument("range_query_error: empty place set");
  const RangeCounter real_counter(real, bounds);
  const RangeCounter synth_counter(synth, bounds);
  const double scale = static_cast<double>(real.count()) / static_cast<double>(synth.count());
  std::vector<RangeErrorRow> rows;
  for (const double radius : radii_m) {
    RangeErrorRow row;
    row.radius_m = radius;
    double abs_sum = 0.0, pct_sum = 0.0;
    std::int64_t pct_n = 0;
    for (Eigen::Index p = 0; p < places.count(); ++p) {
      const auto c_real = static_cast<double>(real_counter.count(places.coords.col(p), radius));
      const double c_synth = scale * static_cast<double>(synth_counter.count(places.coords.col(p), radius));
      abs_sum += std::abs(c_real - c_synth);
      if (c_real >= 1.0) {
        pct_sum += std::abs(c_real - c_synth) / c_real;
        ++pct_n;
      } else {
        ++row.mpe_excluded;
      }
    }
    row.mae = abs_sum / static_cast<double>(places.count());
    row.mpe = pct_n > 0 ? pct_sum / static_cast<double>(pct_n) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

struct HotspotResult {
  int g = 0;
  Mat density;                         // g x g, density(ix, iy) at cell centers
  std::vector<std::int64_t> hotspots;  // cell ids ix * g + iy, sorted
  double threshold = 0.0;              // 95th-percentile density
  double bandwidth_x = 0.0, bandwidth_y = 0.0;
};

// Nearest-rank 95th percentile over all cells, zeros included.
inline double percentile_threshold(const Mat& density) {
  std::vector<double> flat(density.data(), density.data() + density.size());
  std::sort(flat.begin(), flat.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(kHotspotPercentile * static_cast<double>(flat.size())));
  return flat[std::min(flat.size() - 1, rank > 0 ? rank - 1 : 0)];
}

// Strictly-above selection, so an all-ties field yields no hotspots.
inline std::vector<std::int64_t> cells_above(const Mat& density, double threshold) {
  std::vector<std::int64_t> out;
  const auto g = density.rows();
  for (Eigen::Index ix = 0; ix < g; ++ix)
    for (Eigen::Index iy = 0; iy < density.cols(); ++iy)
      if (density(ix, iy) > threshold) out.push_back(static_cast<std::int64_t>(ix) * g + iy);
  std::sort(out.begin(), out.end());
  return out;
}

// Gaussian kernel density estimate on a uniform g x g grid spanning the
// dataset bounds (first two dimensions). Hotspots are the cells whose
// density lies strictly above the 95th percentile of all g^2 cell values,
// so a flat density field yields no hotspots. Bandwidths default to Scott's
// rule per dimension; pass positives to override.
inline HotspotResult kde_hotspots(const PointSet& pts, int g, const DatasetBounds& domain,
                                  double bandwidth_x = 0.0, double bandwidth_y = 0.0) {
  if (g < 2) throw std::invalid_argument("kde_hotspots: granularity must be >= 2");
  if (pts.dim() < 2) throw std::invalid_argument("kde_hotspots: two-dimensional data required");
  const Eigen::Index n = pts.count();
  if (n == 0) throw std::invalid_argument("kde_hotspots: empty point set");

  auto scott = [&](int dim) {
    const double mean = pts.coords.row(dim).mean();
    const double var = (pts.coords.row(dim).array() - mean).square().sum() /
                       std::max<double>(1.0, static_cast<double>(n - 1));
    const double sd = std::sqrt(var);
    const double h = sd * std::pow(static_cast<double>(n), -1.0 / 6.0);  // d = 2
    // Degenerate spreads fall back to a fraction of the domain width.
    const double fallback = (domain.max[dim] - domain.min[dim]) / (8.0 * g);
    return h > 0.0 ? h : fallback;
  };
  HotspotResult res;
  res.g = g;
  res.bandwidth_x = bandwidth_x > 0.0 ? bandwidth_x : scott(0);
  res.bandwidth_y = bandwidth_y > 0.0 ? bandwidth_y : scott(1);

  const double wx = (domain.max[0] - domain.min[0]) / g;
  const double wy = (domain.max[1] - domain.min[1]) / g;
  Vec centers_x(g), centers_y(g);
  for (int i = 0; i < g; ++i) {
    centers_x[i] = domain.min[0] + (i + 0.5) * wx;
    centers_y[i] = domain.min[1] + (i + 0.5) * wy;
  }

  // Separable kernel: density = Kx * Ky^T up to the normalizing constant.
  res.density = Mat::Zero(g, g);
  const Eigen::Index chunk = 8192;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    Mat kx(g, len), ky(g, len);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double px = pts.coords(0, start + i);
      const double py = pts.coords(1, start + i);
      for (int c = 0; c < g; ++c) {
        const double ux = (centers_x[c] - px) / res.bandwidth_x;
        const double uy = (centers_y[c] - py) / res.bandwidth_y;
        kx(c, i) = std::exp(-0.5 * ux * ux);
        ky(c, i) = std::exp(-0.5 * uy * uy);
      }
    }
    res.density.noalias() += kx * ky.transpose();
  }
  res.density /= static_cast<double>(n) * 2.0 * M_PI * res.bandwidth_x * res.bandwidth_y;

  res.threshold = percentile_threshold(res.density);
  res.hotspots = cells_above(res.density, res.threshold);
  return res;
}

// 2|A n B| / (|A| + |B|); two empty sets count as full agreement.
template <class T>
double sorensen_dice(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<T> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<T> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  return 2.0 * static_cast<double>(inter.size()) / static_cast<double>(sa.size() + sb.size());
}

enum class FacilityVariant { kMaxInf, kMinDist };

inline std::string facility_variant_name(FacilityVariant v) {
  return v == FacilityVariant::kMaxInf ? "max-inf" : "min-dist";
}

struct FacilityResult {
  std::vector<Eigen::Index> selected;  // candidate indices, selection order
  double objective = 0.0;              // covered customers / total distance (meters)
  FacilityVariant variant = FacilityVariant::kMaxInf;
};

// Greedy facility selection over candidate places. Max-Inf greedily adds the
// candidate covering the most yet-uncovered customers within the attraction
// radius (maximum coverage); Min-Dist greedily adds the candidate giving the
// largest drop in total customer-to-nearest-facility distance (k-median
// style). Ties break toward the lower candidate index.
inline FacilityResult facility_select(const PointSet& customers, const PlaceSet& candidates,
                                      int k, FacilityVariant variant, double attraction_radius_m,
                                      const DatasetBounds& bounds) {
  const Eigen::Index n_cand = candidates.count();
  if (k > n_cand) throw std::invalid_argument("facility_select: k exceeds candidate count");
  if (k < 1) throw std::invalid_argument("facility_select: k must be >= 1");
  const Mat cust = detail::to_meter_plane(customers.coords, bounds);
  const Mat cand = detail::to_meter_plane(candidates.coords, bounds);
  const Eigen::Index n_cust = cust.cols();

  FacilityResult res;
  res.variant = variant;

  if (variant == FacilityVariant::kMaxInf) {
    const KdTree<double> tree(cust);
    std::vector<std::vector<Eigen::Index>> covers(static_cast<std::size_t>(n_cand));
    for (Eigen::Index c = 0; c < n_cand; ++c)
      tree.collect_within(cand.col(c), attraction_radius_m, covers[static_cast<std::size_t>(c)]);
    std::vector<char> covered(static_cast<std::size_t>(n_cust), 0);
    std::vector<char> taken(static_cast<std::size_t>(n_cand), 0);
    std::int64_t total_covered = 0;
    for (int round = 0; round < k; ++round) {
      Eigen::Index best = -1;
      std::int64_t best_gain = -1;
      for (Eigen::Index c = 0; c < n_cand; ++c) {
        if (taken[static_cast<std::size_t>(c)]) continue;
        std::int64_t gain = 0;
        for (const auto id : covers[static_cast<std::size_t>(c)])
          if (!covered[static_cast<std::size_t>(id)]) ++gain;
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      taken[static_cast<std::size_t>(best)] = 1;
      res.selected.push_back(best);
      for (const auto id : covers[static_cast<std::size_t>(best)]) {
        if (!covered[static_cast<std::size_t>(id)]) {
          covered[static_cast<std::size_t>(id)] = 1;
          ++total_covered;
        }
      }
    }
    res.objective = static_cast<double>(total_covered);
  } else {
    std::vector<double> best_dist(static_cast<std::size_t>(n_cust),
                                  std::numeric_limits<double>::infinity());
    std::vector<char> taken(static_cast<std::size_t>(n_cand), 0);
    for (int round = 0; round < k; ++round) {
      Eigen::Index best = -1;
      double best_total = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < n_cand; ++c) {
        if (taken[static_cast<std::size_t>(c)]) continue;
        double total = 0.0;
        for (Eigen::Index i = 0; i < n_cust; ++i)
          total += std::min(best_dist[static_cast<std::size_t>(i)], (cust.col(i) - cand.col(c)).norm());
        if (total < best_total) {
          best_total = total;
          best = c;
        }
      }
      taken[static_cast<std::size_t>(best)] = 1;
      res.selected.push_back(best);
      for (Eigen::Index i = 0; i < n_cust; ++i)
        best_dist[static_cast<std::size_t>(i)] =
            std::min(best_dist[static_cast<std::size_t>(i)], (cust.col(i) - cand.col(best)).norm());
      res.objective = best_total;
    }
  }
  return res;
}

// SDC between the facility sets selected from real and synthetic customers,
// for each k.
inline std::vector<std::pair<int, double>> facility_agreement(
    const PointSet& real, const PointSet& synth, const PlaceSet& candidates,
    const std::vector<int>& ks, FacilityVariant variant, double attraction_radius_m,
    const DatasetBounds& bounds) {
  std::vector<std::pair<int, double>> out;
  for (const int k : ks) {
    auto fr = facility_select(real, candidates, k, variant, attraction_radius_m, bounds).selected;
    auto fs = facility_select(synth, candidates, k, variant, attraction_radius_m, bounds).selected;
    out.emplace_back(k, sorensen_dice(fr, fs));
  }
  return out;
}

}  // namespace geosynth
