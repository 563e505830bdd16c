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

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geosynth {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<double>;
using Vec = VecX<double>;

inline constexpr double kEarthRadiusMeters = 6371000.0;
inline constexpr double kMetersPerDegree = kEarthRadiusMeters * M_PI / 180.0;

// An unordered collection of m-dimensional points, one point per column.
// Each point carries a stable integer id assigned at load time; duplicated
// coordinates remain distinct records.
struct PointSet {
  Mat coords;                       // m x n
  std::vector<std::int64_t> index;  // size n

  Eigen::Index dim() const { return coords.rows(); }
  Eigen::Index count() const { return coords.cols(); }

  static PointSet from_coords(Mat m) {
    PointSet ps;
    ps.index.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.cols(); ++i) ps.index[static_cast<std::size_t>(i)] = i;
    ps.coords = std::move(m);
    return ps;
  }
};

enum class SourceUnit { kDegrees, kMeters };

inline SourceUnit parse_unit(const std::string& s) {
  if (s == "degrees") return SourceUnit::kDegrees;
  if (s == "meters") return SourceUnit::kMeters;
  throw std::invalid_argument("unknown source unit: " + s + " (expected 'degrees' or 'meters')");
}

inline std::string unit_name(SourceUnit u) {
  return u == SourceUnit::kDegrees ? "degrees" : "meters";
}

// Axis-aligned data extent in source units plus per-dimension meter
// conversion factors. For degree data the coordinate order is
// (longitude, latitude[, ...]); the longitude factor uses a local
// equirectangular approximation at the extent's mid-latitude, adequate at
// city scale.
struct DatasetBounds {
  Vec min;
  Vec max;
  SourceUnit unit = SourceUnit::kMeters;
  Vec meters_per_unit;

  Eigen::Index dim() const { return min.size(); }

  void validate() const {
    if (min.size() != max.size() || min.size() != meters_per_unit.size())
      throw std::invalid_argument("DatasetBounds: inconsistent dimensions");
    for (Eigen::Index d = 0; d < min.size(); ++d) {
      if (!(min[d] < max[d]))
        throw std::invalid_argument("DatasetBounds: min must be < max in every dimension");
      if (!(meters_per_unit[d] > 0.0))
        throw std::invalid_argument("DatasetBounds: conversion factors must be positive");
    }
  }

  static DatasetBounds from_extent(Vec lo, Vec hi, SourceUnit unit) {
    DatasetBounds b;
    b.min = std::move(lo);
    b.max = std::move(hi);
    b.unit = unit;
    b.meters_per_unit = Vec::Ones(b.min.size());
    if (unit == SourceUnit::kDegrees) {
      // Dimension 0 = longitude, dimension 1 = latitude; further dimensions
      // (e.g. altitude) are assumed to be meters already.
      const double mid_lat = b.min.size() > 1 ? 0.5 * (b.min[1] + b.max[1]) : 0.0;
      if (b.min.size() > 0) b.meters_per_unit[0] = kMetersPerDegree * std::cos(mid_lat * M_PI / 180.0);
      if (b.min.size() > 1) b.meters_per_unit[1] = kMetersPerDegree;
    }
    b.validate();
    return b;
  }
};

// Planar distance in meters between two points given in source units,
// using the first two coordinate dimensions.
inline double distance_meters(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b,
                              const DatasetBounds& bounds) {
  const double dx = (a[0] - b[0]) * bounds.meters_per_unit[0];
  const double dy = (a[1] - b[1]) * bounds.meters_per_unit[1];
  return std::sqrt(dx * dx + dy * dy);
}

// Optional valid-region mask: a set of simple polygons (exterior rings) in
// source units over the first two coordinate dimensions.
struct RegionMask {
  std::vector<Mat> rings;  // each 2 x k, k >= 3, not closed (last != first)

  bool empty() const { return rings.empty(); }
};

}  // namespace geosynth
