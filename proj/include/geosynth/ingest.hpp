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

#include <string>
#include <vector>

#include "geosynth/point_set.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

struct LoadResult {
  PointSet points;  // source units, stable ids 0..n-1 in file order
  DatasetBounds bounds;
  std::int64_t skipped = 0;  // rows with missing or non-finite coordinates
};

// Reads a CSV with a header row and extracts the named coordinate columns,
// one point per record. Rows whose coordinate fields are missing or do not
// parse as finite decimals are skipped and counted. Throws on a missing
// file, a missing column, or zero valid rows.
LoadResult load_points(const std::string& path, const std::vector<std::string>& columns,
                       SourceUnit unit);

// Writes points as CSV (header + one row per point), used by pipeline stages.
void write_points_csv(const std::string& path, const PointSet& ps,
                      const std::vector<std::string>& columns, const std::string& preamble = "");

// Loads a polygon mask. Accepts either a bare JSON array of rings (each ring
// a list of [x, y] pairs) or a GeoJSON Polygon / MultiPolygon /
// Feature(Collection) object; only exterior rings are used.
RegionMask load_region_mask(const std::string& path);

// Point-in-polygon by ray casting; boundary points count as inside.
bool point_in_ring(double x, double y, const Mat& ring);

inline bool point_in_mask(double x, double y, const RegionMask& mask) {
  for (const auto& ring : mask.rings)
    if (point_in_ring(x, y, ring)) return true;
  return false;
}

// Keeps exactly the points inside (or on the boundary of) some mask polygon,
// preserving order and stable ids. An empty mask returns the input
// unchanged. Throws on a degenerate polygon.
inline PointSet filter_region(const PointSet& ps, const RegionMask& mask) {
  if (mask.empty()) return ps;
  if (ps.dim() < 2) throw std::invalid_argument("filter_region: mask requires at least 2 dimensions");
  for (const auto& ring : mask.rings)
    if (ring.cols() < 3) throw std::invalid_argument("filter_region: degenerate polygon (fewer than 3 vertices)");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ps.count(); ++i)
    if (point_in_mask(ps.coords(0, i), ps.coords(1, i), mask)) keep.push_back(i);
  PointSet out;
  out.coords.resize(ps.dim(), static_cast<Eigen::Index>(keep.size()));
  out.index.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.coords.col(static_cast<Eigen::Index>(k)) = ps.coords.col(keep[k]);
    out.index[k] = ps.index[static_cast<std::size_t>(keep[k])];
  }
  return out;
}

// Affine per-dimension map of the source extent onto [-1, 1]^m. Throws on a
// zero-width dimension or a point outside the bounds.
inline PointSet normalize(const PointSet& ps, const DatasetBounds& bounds) {
  if (ps.dim() != bounds.dim()) throw std::invalid_argument("normalize: dimension mismatch");
  for (Eigen::Index d = 0; d < bounds.dim(); ++d)
    if (!(bounds.max[d] > bounds.min[d]))
      throw std::invalid_argument("normalize: zero-width dimension");
  PointSet out = ps;
  for (Eigen::Index d = 0; d < bounds.dim(); ++d) {
    const double w = bounds.max[d] - bounds.min[d];
    out.coords.row(d) = (2.0 * (ps.coords.row(d).array() - bounds.min[d]) / w - 1.0).matrix();
  }
  if (ps.count() > 0) {
    const double lo = out.coords.minCoeff(), hi = out.coords.maxCoeff();
    if (lo < -1.0 || hi > 1.0)
      throw std::invalid_argument("normalize: bounds do not enclose all points");
  }
  return out;
}

inline PointSet denormalize(const PointSet& ps, const DatasetBounds& bounds) {
  if (ps.dim() != bounds.dim()) throw std::invalid_argument("denormalize: dimension mismatch");
  PointSet out = ps;
  for (Eigen::Index d = 0; d < bounds.dim(); ++d) {
    const double w = bounds.max[d] - bounds.min[d];
    out.coords.row(d) = ((ps.coords.row(d).array() + 1.0) * 0.5 * w + bounds.min[d]).matrix();
  }
  return out;
}

inline Mat denormalize_coords(const Mat& coords, const DatasetBounds& bounds) {
  PointSet tmp;
  tmp.coords = coords;
  tmp.index.assign(static_cast<std::size_t>(coords.cols()), 0);
  return denormalize(tmp, bounds).coords;
}

// B distinct points drawn uniformly without replacement; deterministic given
// the stream state. Stable ids ride along so persistent labels can be looked
// up by identity.
inline PointSet sample_batch(const PointSet& ps, std::int64_t batch, Rng& rng) {
  if (batch > ps.count()) throw std::invalid_argument("sample_batch: batch exceeds point count");
  const auto picks = rng.sample_without_replacement(ps.count(), batch);
  PointSet out;
  out.coords.resize(ps.dim(), static_cast<Eigen::Index>(batch));
  out.index.resize(static_cast<std::size_t>(batch));
  for (std::int64_t k = 0; k < batch; ++k) {
    out.coords.col(static_cast<Eigen::Index>(k)) = ps.coords.col(static_cast<Eigen::Index>(picks[static_cast<std::size_t>(k)]));
    out.index[static_cast<std::size_t>(k)] = ps.index[static_cast<std::size_t>(picks[static_cast<std::size_t>(k)])];
  }
  return out;
}

}  // namespace geosynth
