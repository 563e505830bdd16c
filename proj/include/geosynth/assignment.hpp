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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace geosynth {

// Exact minimum-cost perfect matching on an n x n cost function, solved by
// shortest augmenting paths with dual potentials (the Jonker-Volgenant
// family, O(n^3)). Costs are evaluated on demand, so no n^2 matrix is
// stored. The returned duals certify optimality: reduced costs
// c(i,j) - u[i] - v[j] are nonnegative everywhere and vanish on the
// assignment.
struct AssignmentResult {
  std::vector<Eigen::Index> col_of_row;
  std::vector<double> u, v;
  double cost = 0.0;  // sum of c(i, col_of_row[i]) in row order
};

template <class CostFn>
AssignmentResult solve_assignment(Eigen::Index n, CostFn&& cost) {
  if (n <= 0) throw std::invalid_argument("solve_assignment: empty instance");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(static_cast<std::size_t>(n), 0.0), v(static_cast<std::size_t>(n), 0.0);
  std::vector<double> shortest(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> path(static_cast<std::size_t>(n)), remaining(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> col_of_row(static_cast<std::size_t>(n), -1),
      row_of_col(static_cast<std::size_t>(n), -1);
  std::vector<char> in_rows(static_cast<std::size_t>(n)), in_cols(static_cast<std::size_t>(n));

  for (Eigen::Index cur = 0; cur < n; ++cur) {
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::fill(path.begin(), path.end(), Eigen::Index{-1});
    std::fill(in_rows.begin(), in_rows.end(), char{0});
    std::fill(in_cols.begin(), in_cols.end(), char{0});
    for (Eigen::Index j = 0; j < n; ++j) remaining[static_cast<std::size_t>(j)] = j;
    Eigen::Index num_remaining = n;

    double min_val = 0.0;
    Eigen::Index i = cur, sink = -1;
    while (sink == -1) {
      in_rows[static_cast<std::size_t>(i)] = 1;
      double lowest = kInf;
      Eigen::Index index = -1;
      for (Eigen::Index it = 0; it < num_remaining; ++it) {
        const Eigen::Index j = remaining[static_cast<std::size_t>(it)];
        const double r = min_val + cost(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
        if (!std::isfinite(r)) throw std::runtime_error("solve_assignment: non-finite cost");
        if (r < shortest[static_cast<std::size_t>(j)]) {
          path[static_cast<std::size_t>(j)] = i;
          shortest[static_cast<std::size_t>(j)] = r;
        }
        if (shortest[static_cast<std::size_t>(j)] < lowest ||
            (shortest[static_cast<std::size_t>(j)] == lowest && row_of_col[static_cast<std::size_t>(j)] == -1)) {
          lowest = shortest[static_cast<std::size_t>(j)];
          index = it;
        }
      }
      min_val = lowest;
      if (!(min_val < kInf)) throw std::runtime_error("solve_assignment: no augmenting path");
      const Eigen::Index j = remaining[static_cast<std::size_t>(index)];
      if (row_of_col[static_cast<std::size_t>(j)] == -1)
        sink = j;
      else
        i = row_of_col[static_cast<std::size_t>(j)];
      in_cols[static_cast<std::size_t>(j)] = 1;
      remaining[static_cast<std::size_t>(index)] = remaining[static_cast<std::size_t>(--num_remaining)];
    }

    u[static_cast<std::size_t>(cur)] += min_val;
    for (Eigen::Index k = 0; k < n; ++k)
      if (in_rows[static_cast<std::size_t>(k)] && k != cur)
        u[static_cast<std::size_t>(k)] +=
            min_val - shortest[static_cast<std::size_t>(col_of_row[static_cast<std::size_t>(k)])];
    for (Eigen::Index j = 0; j < n; ++j)
      if (in_cols[static_cast<std::size_t>(j)])
        v[static_cast<std::size_t>(j)] -= min_val - shortest[static_cast<std::size_t>(j)];

    Eigen::Index j = sink;
    while (true) {
      const Eigen::Index pi = path[static_cast<std::size_t>(j)];
      row_of_col[static_cast<std::size_t>(j)] = pi;
      std::swap(col_of_row[static_cast<std::size_t>(pi)], j);
      if (pi == cur) break;
    }
  }

  AssignmentResult res;
  res.col_of_row = std::move(col_of_row);
  res.u = std::move(u);
  res.v = std::move(v);
  res.cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    res.cost += cost(i, res.col_of_row[static_cast<std::size_t>(i)]);
  return res;
}

// Maximum violation of the optimality certificate: negative reduced costs
// anywhere, or nonzero reduced cost on an assigned pair (complementary
// slackness).
template <class CostFn>
double assignment_certificate_violation(Eigen::Index n, CostFn&& cost,
                                        const AssignmentResult& res) {
  double violation = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double reduced =
          cost(i, j) - res.u[static_cast<std::size_t>(i)] - res.v[static_cast<std::size_t>(j)];
      if (reduced < 0.0) violation = std::max(violation, -reduced);
      if (res.col_of_row[static_cast<std::size_t>(i)] == j)
        violation = std::max(violation, std::abs(reduced));
    }
  }
  return violation;
}

}  // namespace geosynth
