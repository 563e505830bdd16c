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

#include "geosynth/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace geosynth {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_finite(const std::string& field, double* out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

LoadResult load_points(const std::string& path, const std::vector<std::string>& columns,
                       SourceUnit unit) {
  if (columns.empty()) throw std::invalid_argument("load_points: no coordinate columns given");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_points: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_points: empty file " + path);
  const auto header = split_csv_line(line);

  std::vector<std::size_t> col_idx;
  for (const auto& name : columns) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) { return trim(h) == name; });
    if (it == header.end())
      throw std::runtime_error("load_points: column '" + name + "' not found in " + path);
    col_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  const auto m = static_cast<Eigen::Index>(columns.size());
  std::vector<double> values;  // m per accepted row
  std::int64_t skipped = 0;
  std::vector<double> row(columns.size());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    bool ok = true;
    for (std::size_t k = 0; k < col_idx.size(); ++k) {
      if (col_idx[k] >= fields.size() || !parse_finite(fields[col_idx[k]], &row[k])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++skipped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
  }

  const auto n = static_cast<Eigen::Index>(values.size() / columns.size());
  if (n == 0) throw std::runtime_error("load_points: zero valid rows in " + path);

  LoadResult res;
  res.points.coords.resize(m, n);
  res.points.index.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    res.points.index[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index d = 0; d < m; ++d)
      res.points.coords(d, i) = values[static_cast<std::size_t>(i * m + d)];
  }
  Vec lo = res.points.coords.rowwise().minCoeff();
  Vec hi = res.points.coords.rowwise().maxCoeff();
  // Guard degenerate extents so normalize stays invertible.
  for (Eigen::Index d = 0; d < m; ++d) {
    if (hi[d] <= lo[d]) hi[d] = lo[d] + 1.0;
  }
  res.bounds = DatasetBounds::from_extent(lo, hi, unit);
  res.skipped = skipped;
  return res;
}

void write_points_csv(const std::string& path, const PointSet& ps,
                      const std::vector<std::string>& columns, const std::string& preamble) {
  if (static_cast<Eigen::Index>(columns.size()) != ps.dim())
    throw std::invalid_argument("write_points_csv: column count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_points_csv: cannot open " + path);
  if (!preamble.empty()) out << preamble << "\n";
  out << "id";
  for (const auto& c : columns) out << "," << c;
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ps.count(); ++i) {
    out << ps.index[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < ps.dim(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", ps.coords(d, i));
      out << "," << buf;
    }
    out << "\n";
  }
}

namespace {

Mat ring_from_json(const nlohmann::json& arr) {
  Mat ring(2, static_cast<Eigen::Index>(arr.size()));
  Eigen::Index k = 0;
  for (const auto& pt : arr) {
    if (!pt.is_array() || pt.size() < 2)
      throw std::runtime_error("region mask: ring vertex must be an [x, y] pair");
    ring(0, k) = pt[0].get<double>();
    ring(1, k) = pt[1].get<double>();
    ++k;
  }
  // Drop an explicit closing vertex.
  if (ring.cols() >= 2 && ring.col(0) == ring.col(ring.cols() - 1))
    ring.conservativeResize(2, ring.cols() - 1);
  return ring;
}

void collect_rings(const nlohmann::json& j, RegionMask* mask) {
  if (j.is_object()) {
    const std::string type = j.value("type", "");
    if (type == "FeatureCollection") {
      for (const auto& f : j.at("features")) collect_rings(f, mask);
    } else if (type == "Feature") {
      collect_rings(j.at("geometry"), mask);
    } else if (type == "Polygon") {
      const auto& rings = j.at("coordinates");
      if (!rings.empty()) mask->rings.push_back(ring_from_json(rings[0]));  // exterior only
    } else if (type == "MultiPolygon") {
      for (const auto& poly : j.at("coordinates"))
        if (!poly.empty()) mask->rings.push_back(ring_from_json(poly[0]));
    } else {
      throw std::runtime_error("region mask: unsupported GeoJSON type '" + type + "'");
    }
  } else if (j.is_array()) {
    for (const auto& ring : j) mask->rings.push_back(ring_from_json(ring));
  } else {
    throw std::runtime_error("region mask: expected array of rings or GeoJSON object");
  }
}

}  // namespace

RegionMask load_region_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_region_mask: cannot open " + path);
  nlohmann::json j;
  in >> j;
  RegionMask mask;
  collect_rings(j, &mask);
  for (const auto& ring : mask.rings)
    if (ring.cols() < 3)
      throw std::runtime_error("load_region_mask: degenerate polygon (fewer than 3 vertices)");
  return mask;
}

bool point_in_ring(double x, double y, const Mat& ring) {
  const Eigen::Index k = ring.cols();
  // Boundary counts as inside: check each edge for containment first.
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index j = (i + 1) % k;
    const double x1 = ring(0, i), y1 = ring(1, i);
    const double x2 = ring(0, j), y2 = ring(1, j);
    const double cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
    if (cross == 0.0 && std::min(x1, x2) <= x && x <= std::max(x1, x2) &&
        std::min(y1, y2) <= y && y <= std::max(y1, y2))
      return true;
  }
  bool inside = false;
  for (Eigen::Index i = 0, j = k - 1; i < k; j = i++) {
    const double xi = ring(0, i), yi = ring(1, i);
    const double xj = ring(0, j), yj = ring(1, j);
    if ((yi > y) != (yj > y)) {
      const double x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi;
      if (x < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace geosynth
