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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "geosynth/analytics.hpp"

using namespace geosynth;

namespace {

DatasetBounds unit_bounds() {
  return DatasetBounds::from_extent((Vec(2) << -1, -1).finished(), (Vec(2) << 1, 1).finished(),
                                    SourceUnit::kMeters);
}

DatasetBounds city_bounds() {
  // A small lon/lat window; meter factors come from the mid-latitude.
  return DatasetBounds::from_extent((Vec(2) << -8.70, 41.10).finished(),
                                    (Vec(2) << -8.50, 41.25).finished(), SourceUnit::kDegrees);
}

PointSet random_city_points(Eigen::Index n, std::uint64_t seed) {
  const auto b = city_bounds();
  Rng rng(seed);
  Mat pts(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts(0, i) = rng.uniform(b.min[0], b.max[0]);
    pts(1, i) = rng.uniform(b.min[1], b.max[1]);
  }
  return PointSet::from_coords(pts);
}

}  // namespace

TEST_CASE("range_count matches a linear scan in meter space") {
  const auto bounds = city_bounds();
  const auto pts = random_city_points(1000, 5);
  const RangeCounter counter(pts, bounds);
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    Vec center(2);
    center << rng.uniform(bounds.min[0], bounds.max[0]), rng.uniform(bounds.min[1], bounds.max[1]);
    const double radius = 500.0;
    std::int64_t brute = 0;
    for (Eigen::Index i = 0; i < pts.count(); ++i)
      if (distance_meters(pts.coords.col(i), center, bounds) <= radius) ++brute;
    CHECK(counter.count(center, radius) == brute);
  }
}

TEST_CASE("range_count edge cases and monotonicity") {
  const auto bounds = unit_bounds();
  Mat c(2, 5);
  c.setZero();
  const PointSet pts = PointSet::from_coords(c);  // all points at the center
  Vec center(2);
  center.setZero();
  CHECK(range_count(pts, center, 1.0, bounds) == 5);
  Vec far(2);
  far << 0.9, 0.9;
  CHECK(range_count(pts, far, 0.05, bounds) == 0);
  const auto big = random_city_points(500, 7);
  const RangeCounter counter(big, city_bounds());
  Vec q(2);
  q << -8.6, 41.18;
  std::int64_t prev = 0;
  for (const double r : {50.0, 100.0, 200.0, 500.0, 1000.0}) {
    const auto n = counter.count(q, r);
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("range_query_error is zero when synth equals real") {
  const auto bounds = city_bounds();
  const auto pts = random_city_points(400, 8);
  const auto places = random_places(pts, 20, 9);
  const auto rows = range_query_error(pts, pts, places, {100.0, 500.0}, bounds);
  for (const auto& row : rows) {
    CHECK(row.mae == 0.0);
    CHECK(row.mpe == 0.0);
  }
}

TEST_CASE("range_query_error hand-computed case") {
  const auto bounds = unit_bounds();
  // Place A at (-0.5, 0), place B at (0.5, 0); radius small enough that the
  // two groups never mix. Totals are equal so no count rescaling applies.
  auto cluster = [](double cx, Eigen::Index n, double offset) {
    Mat m(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m(0, i) = cx + 1e-4 * static_cast<double>(i % 7);
      m(1, i) = offset;
    }
    return m;
  };
  Mat real(2, 30), synth(2, 30);
  real.leftCols(10) = cluster(-0.5, 10, 0.0);
  real.rightCols(20) = cluster(0.5, 20, 0.0);
  synth.leftCols(12) = cluster(-0.5, 12, 0.0);
  synth.middleCols(12, 16) = cluster(0.5, 16, 0.0);
  synth.rightCols(2) = cluster(0.0, 2, 0.9);  // outside both ranges
  PlaceSet places;
  places.coords.resize(2, 2);
  places.coords << -0.5, 0.5,
                    0.0, 0.0;
  places.names = {"a", "b"};
  const auto rows = range_query_error(PointSet::from_coords(real), PointSet::from_coords(synth),
                                      places, {0.1}, bounds);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mae == doctest::Approx(3.0));        // (|10-12| + |20-16|) / 2
  CHECK(rows[0].mpe == doctest::Approx(0.2));        // (0.2 + 0.2) / 2
  CHECK(rows[0].mpe_excluded == 0);
}

TEST_CASE("percentile threshold with all-tied densities yields no hotspots") {
  const Mat flat = Mat::Constant(16, 16, 3.25);
  const double thr = percentile_threshold(flat);
  CHECK(thr == 3.25);
  CHECK(cells_above(flat, thr).empty());
}

TEST_CASE("a single tight cluster concentrates hotspots near it") {
  Rng rng(11);
  Mat pts(2, 500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    pts(0, i) = 0.3 + 0.02 * rng.gaussian();
    pts(1, i) = -0.2 + 0.02 * rng.gaussian();
  }
  const auto res = kde_hotspots(PointSet::from_coords(pts), 32, unit_bounds());
  CHECK(!res.hotspots.empty());
  CHECK(res.hotspots.size() <= static_cast<std::size_t>(std::ceil(0.05 * 32 * 32)));
  // Every hotspot cell is strictly above the threshold.
  for (const auto id : res.hotspots) {
    const auto ix = static_cast<Eigen::Index>(id / 32), iy = static_cast<Eigen::Index>(id % 32);
    CHECK(res.density(ix, iy) > res.threshold);
  }
  // The densest cells sit near the cluster center (0.3, -0.2) -> cell ~(20, 12).
  for (const auto id : res.hotspots) {
    const double cx = -1.0 + (static_cast<double>(id / 32) + 0.5) * (2.0 / 32);
    const double cy = -1.0 + (static_cast<double>(id % 32) + 0.5) * (2.0 / 32);
    CHECK(std::hypot(cx - 0.3, cy + 0.2) < 0.5);
  }
}

TEST_CASE("kde densities match a double-loop kernel sum within 1e-9") {
  const auto bounds = unit_bounds();
  Rng rng(12);
  Mat pts(2, 1000);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    pts(0, i) = rng.uniform(-0.9, 0.9);
    pts(1, i) = rng.uniform(-0.9, 0.9);
  }
  const PointSet ps = PointSet::from_coords(pts);
  const int g = 64;
  const auto res = kde_hotspots(ps, g, bounds);
  const double hx = res.bandwidth_x, hy = res.bandwidth_y;
  const double wx = 2.0 / g, wy = 2.0 / g;
  double max_err = 0.0;
  for (int ix = 0; ix < g; ++ix) {
    for (int iy = 0; iy < g; ++iy) {
      const double cx = -1.0 + (ix + 0.5) * wx;
      const double cy = -1.0 + (iy + 0.5) * wy;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < 1000; ++i) {
        const double ux = (cx - pts(0, i)) / hx;
        const double uy = (cy - pts(1, i)) / hy;
        acc += std::exp(-0.5 * (ux * ux + uy * uy));
      }
      acc /= 1000.0 * 2.0 * M_PI * hx * hy;
      max_err = std::max(max_err, std::abs(acc - res.density(ix, iy)));
    }
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("kde mass integrates to one within 2% for in-bounds data") {
  Rng rng(13);
  Mat pts(2, 2000);
  for (Eigen::Index i = 0; i < 2000; ++i) {
    pts(0, i) = 0.4 * rng.gaussian();
    pts(1, i) = 0.4 * rng.gaussian();
    pts(0, i) = std::clamp(pts(0, i), -0.95, 0.95);
    pts(1, i) = std::clamp(pts(1, i), -0.95, 0.95);
  }
  const int g = 64;
  const auto res = kde_hotspots(PointSet::from_coords(pts), g, unit_bounds());
  const double cell_area = (2.0 / g) * (2.0 / g);
  const double mass = res.density.sum() * cell_area;
  CHECK(std::abs(mass - 1.0) < 0.02);
  CHECK(res.density.minCoeff() >= 0.0);
}

TEST_CASE("kde input validation") {
  const auto pts = random_city_points(10, 14);
  CHECK_THROWS(kde_hotspots(pts, 1, city_bounds()));
}

TEST_CASE("sorensen_dice basics") {
  const std::vector<int> a{1, 2, 3}, b{2, 3, 4}, disjoint{7, 8}, empty;
  CHECK(sorensen_dice(a, a) == 1.0);
  CHECK(sorensen_dice(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK(sorensen_dice(a, disjoint) == 0.0);
  CHECK(sorensen_dice(empty, empty) == 1.0);
  CHECK(sorensen_dice(a, b) == sorensen_dice(b, a));
}

TEST_CASE("facility selection with k equal to the candidate count takes everything") {
  const auto bounds = unit_bounds();
  const auto customers = random_city_points(50, 15);
  PointSet cust;
  cust.coords = Mat::Random(2, 50) * 0.9;
  cust.index.resize(50);
  for (int i = 0; i < 50; ++i) cust.index[static_cast<std::size_t>(i)] = i;
  PlaceSet places;
  places.coords = Mat::Random(2, 6) * 0.9;
  places.names = {"a", "b", "c", "d", "e", "f"};
  for (const auto variant : {FacilityVariant::kMaxInf, FacilityVariant::kMinDist}) {
    const auto res = facility_select(cust, places, 6, variant, 0.3, bounds);
    std::set<Eigen::Index> sel(res.selected.begin(), res.selected.end());
    CHECK(sel.size() == 6);
  }
  CHECK_THROWS(facility_select(cust, places, 7, FacilityVariant::kMaxInf, 0.3, bounds));
}

TEST_CASE("a candidate covering every customer wins the first pick") {
  const auto bounds = unit_bounds();
  Mat cust(2, 20);
  Rng rng(16);
  for (Eigen::Index i = 0; i < 20; ++i) {
    cust(0, i) = 0.01 * rng.gaussian();
    cust(1, i) = 0.01 * rng.gaussian();
  }
  PlaceSet places;
  places.coords.resize(2, 3);
  places.coords << 0.9, 0.0, -0.9,
                   0.9, 0.0, -0.9;
  places.names = {"far1", "center", "far2"};
  const auto res =
      facility_select(PointSet::from_coords(cust), places, 1, FacilityVariant::kMaxInf, 0.2, bounds);
  REQUIRE(res.selected.size() == 1);
  CHECK(res.selected[0] == 1);
  CHECK(res.objective == 20.0);
}

TEST_CASE("greedy max coverage achieves (1 - 1/e) of the exhaustive optimum") {
  const auto bounds = unit_bounds();
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n_cand = 6 + static_cast<Eigen::Index>(rng.uniform_int(5));  // 6..10
    const int k = 1 + static_cast<int>(rng.uniform_int(3));                         // 1..3
    Mat cust(2, 60), cand(2, n_cand);
    for (Eigen::Index i = 0; i < 60; ++i) {
      cust(0, i) = rng.uniform(-0.9, 0.9);
      cust(1, i) = rng.uniform(-0.9, 0.9);
    }
    for (Eigen::Index i = 0; i < n_cand; ++i) {
      cand(0, i) = rng.uniform(-0.9, 0.9);
      cand(1, i) = rng.uniform(-0.9, 0.9);
    }
    PlaceSet places;
    places.coords = cand;
    places.names.resize(static_cast<std::size_t>(n_cand));
    const double radius = 0.35;
    const PointSet customers = PointSet::from_coords(cust);
    const auto greedy = facility_select(customers, places, k, FacilityVariant::kMaxInf, radius, bounds);

    // Exhaustive optimum over all k-subsets.
    std::vector<std::vector<Eigen::Index>> covers(static_cast<std::size_t>(n_cand));
    for (Eigen::Index c = 0; c < n_cand; ++c)
      for (Eigen::Index i = 0; i < 60; ++i)
        if ((cust.col(i) - cand.col(c)).norm() <= radius)
          covers[static_cast<std::size_t>(c)].push_back(i);
    double opt = 0.0;
    std::vector<int> pick(static_cast<std::size_t>(k));
    const auto count_union = [&](const std::vector<int>& sel) {
      std::set<Eigen::Index> u;
      for (const int c : sel)
        u.insert(covers[static_cast<std::size_t>(c)].begin(), covers[static_cast<std::size_t>(c)].end());
      return static_cast<double>(u.size());
    };
    std::function<void(int, int)> rec = [&](int start, int depth) {
      if (depth == k) {
        opt = std::max(opt, count_union(pick));
        return;
      }
      for (int c = start; c < n_cand; ++c) {
        pick[static_cast<std::size_t>(depth)] = c;
        rec(c + 1, depth + 1);
      }
    };
    rec(0, 0);
    CHECK(greedy.objective >= (1.0 - 1.0 / std::exp(1.0)) * opt - 1e-12);
  }
}

TEST_CASE("greedy objectives are monotone in k") {
  const auto bounds = unit_bounds();
  Rng rng(18);
  Mat cust(2, 80), cand(2, 12);
  for (Eigen::Index i = 0; i < 80; ++i) {
    cust(0, i) = rng.uniform(-0.9, 0.9);
    cust(1, i) = rng.uniform(-0.9, 0.9);
  }
  for (Eigen::Index i = 0; i < 12; ++i) {
    cand(0, i) = rng.uniform(-0.9, 0.9);
    cand(1, i) = rng.uniform(-0.9, 0.9);
  }
  PlaceSet places;
  places.coords = cand;
  places.names.resize(12);
  const PointSet customers = PointSet::from_coords(cust);
  double prev_cover = -1.0, prev_dist = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 12; ++k) {
    const auto mi = facility_select(customers, places, k, FacilityVariant::kMaxInf, 0.25, bounds);
    const auto md = facility_select(customers, places, k, FacilityVariant::kMinDist, 0.25, bounds);
    CHECK(mi.objective >= prev_cover);
    CHECK(md.objective <= prev_dist + 1e-9);
    prev_cover = mi.objective;
    prev_dist = md.objective;
  }
}

TEST_CASE("ties break toward the lower candidate index") {
  const auto bounds = unit_bounds();
  Mat cust = Mat::Zero(2, 10);
  PlaceSet places;
  places.coords.resize(2, 3);
  places.coords << 0.5, 0.0, 0.0,
                   0.5, 0.0, 0.0;  // candidates 1 and 2 identical
  places.names = {"off", "dup1", "dup2"};
  const auto res = facility_select(PointSet::from_coords(cust), places, 1,
                                   FacilityVariant::kMaxInf, 0.2, bounds);
  CHECK(res.selected[0] == 1);
}

TEST_CASE("facility agreement is exact for identical inputs and weight-sensitive at k = 1") {
  const auto bounds = unit_bounds();
  const auto real = random_city_points(200, 19);
  PointSet cust;
  cust.coords = Mat::Random(2, 200) * 0.9;
  cust.index.resize(200);
  for (int i = 0; i < 200; ++i) cust.index[static_cast<std::size_t>(i)] = i;
  const auto places = random_places(cust, 10, 20);
  for (const auto& [k, sdc] :
       facility_agreement(cust, cust, places, {1, 3, 5}, FacilityVariant::kMaxInf, 0.25, bounds))
    CHECK(sdc == 1.0);

  // Two separated clusters of unequal mass; k = 1 agreement holds exactly
  // when the synthetic data keeps the heavier cluster heavier.
  auto two_cluster = [](Eigen::Index heavy, Eigen::Index light) {
    Mat m(2, heavy + light);
    for (Eigen::Index i = 0; i < heavy; ++i) {
      m(0, i) = -0.6;
      m(1, i) = 0.0;
    }
    for (Eigen::Index i = 0; i < light; ++i) {
      m(0, heavy + i) = 0.6;
      m(1, heavy + i) = 0.0;
    }
    return PointSet::from_coords(m);
  };
  PlaceSet two_places;
  two_places.coords.resize(2, 2);
  two_places.coords << -0.6, 0.6,
                        0.0, 0.0;
  two_places.names = {"left", "right"};
  const auto real2 = two_cluster(30, 10);
  const auto synth_same = two_cluster(25, 15);   // heavier cluster preserved
  const auto synth_flip = two_cluster(10, 30);   // heavier cluster flipped
  const auto same =
      facility_agreement(real2, synth_same, two_places, {1}, FacilityVariant::kMaxInf, 0.2, bounds);
  const auto flip =
      facility_agreement(real2, synth_flip, two_places, {1}, FacilityVariant::kMaxInf, 0.2, bounds);
  CHECK(same[0].second == 1.0);
  CHECK(flip[0].second == 0.0);
}

TEST_CASE("random_places is deterministic per seed") {
  const auto pts = random_city_points(100, 21);
  const auto a = random_places(pts, 10, 5);
  const auto b = random_places(pts, 10, 5);
  CHECK(a.coords == b.coords);
  CHECK_THROWS(random_places(pts, 101, 5));
}
