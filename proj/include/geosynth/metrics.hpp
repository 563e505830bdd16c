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
#include <functional>
#include <stdexcept>
#include <vector>

#include "geosynth/assignment.hpp"
#include "geosynth/ingest.hpp"
#include "geosynth/kdtree.hpp"
#include "geosynth/model.hpp"
#include "geosynth/point_set.hpp"

namespace geosynth {

// Evaluation protocol defaults: 60 samples of 7,500 points each.
inline constexpr std::int64_t kDefaultEvalSamples = 60;
inline constexpr std::int64_t kDefaultEvalSampleSize = 7500;

// Exact matching stays the default up to this many points; beyond it the
// cubic solver dominates the run time and callers should opt in explicitly.
inline constexpr Eigen::Index kEmdExactSizeSoftCap = 2048;

// Chamfer distance: sum of squared nearest-neighbor distances from each set
// to the other, in the normalized working domain. Scales with sample size;
// compare values only at matched sizes.
template <class S>
S chamfer_distance(const MatX<S>& r, const MatX<S>& s) {
  if (r.cols() == 0 || s.cols() == 0) throw std::invalid_argument("chamfer_distance: empty set");
  if (r.rows() != s.rows()) throw std::invalid_argument("chamfer_distance: dimension mismatch");
  const KdTree<S> tree_r(r), tree_s(s);
  S total = S(0);
  for (Eigen::Index i = 0; i < r.cols(); ++i) total += tree_s.nearest_squared(r.col(i));
  for (Eigen::Index j = 0; j < s.cols(); ++j) total += tree_r.nearest_squared(s.col(j));
  return total;
}

// O(n^2) reference path, kept as the verified fallback for the indexed
// version.
template <class S>
S chamfer_distance_brute(const MatX<S>& r, const MatX<S>& s) {
  if (r.cols() == 0 || s.cols() == 0) throw std::invalid_argument("chamfer_distance: empty set");
  if (r.rows() != s.rows()) throw std::invalid_argument("chamfer_distance: dimension mismatch");
  S total = S(0);
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    S best = std::numeric_limits<S>::max();
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      best = std::min(best, (r.col(i) - s.col(j)).squaredNorm());
    total += best;
  }
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    S best = std::numeric_limits<S>::max();
    for (Eigen::Index i = 0; i < r.cols(); ++i)
      best = std::min(best, (r.col(i) - s.col(j)).squaredNorm());
    total += best;
  }
  return total;
}

inline double chamfer_distance(const PointSet& r, const PointSet& s) {
  return chamfer_distance<double>(r.coords, s.coords);
}

// Earth mover's distance between equal-size sets: the minimum over
// bijections of the summed Euclidean distances, solved exactly as a
// min-cost assignment and verified by the dual certificate.
inline double emd_exact(const Mat& r, const Mat& s) {
  if (r.cols() != s.cols()) throw std::invalid_argument("emd_exact: size mismatch (bijection)");
  if (r.rows() != s.rows()) throw std::invalid_argument("emd_exact: dimension mismatch");
  if (r.cols() == 0) throw std::invalid_argument("emd_exact: empty set");
  const auto cost = [&](Eigen::Index i, Eigen::Index j) { return (r.col(i) - s.col(j)).norm(); };
  const auto res = solve_assignment(r.cols(), cost);
  const double scale = std::max(1.0, res.cost / static_cast<double>(r.cols()));
  if (assignment_certificate_violation(r.cols(), cost, res) > 1e-8 * scale * static_cast<double>(r.cols()))
    throw std::runtime_error("emd_exact: optimality certificate failed");
  return res.cost;
}

inline double emd_exact(const PointSet& r, const PointSet& s) { return emd_exact(r.coords, s.coords); }

struct MetricReport {
  std::vector<double> cd;
  std::vector<double> emd;  // empty when EMD was skipped
  double cd_mean = 0.0, cd_std = 0.0;
  double emd_mean = 0.0, emd_std = 0.0;
  std::int64_t samples = 0;
  std::int64_t sample_size = 0;
  bool emd_computed = false;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

// Disjointly seeded subsample of the real set for evaluation pair k.
inline Mat draw_real_subsample(const PointSet& real, std::int64_t n, std::uint64_t seed,
                               std::int64_t sample_id) {
  Rng rng = make_stream(seed, Stream::kEvalReal, static_cast<std::uint64_t>(sample_id));
  return sample_batch(real, n, rng).coords;
}

using SynthSampler = std::function<Mat(std::int64_t sample_id, std::int64_t n)>;

// Core protocol: `samples` synthetic draws paired with `samples` disjointly
// seeded real subsamples of `sample_size` points each; per-pair CD (and
// optionally exact EMD), aggregated as mean and sample standard deviation.
inline MetricReport evaluate_samples(const SynthSampler& sampler, const PointSet& real,
                                     std::int64_t samples, std::int64_t sample_size,
                                     std::uint64_t seed, bool with_emd) {
  if (real.count() < sample_size)
    throw std::invalid_argument("evaluate_samples: real set smaller than sample size");
  if (samples < 1) throw std::invalid_argument("evaluate_samples: need at least one sample");
  MetricReport rep;
  rep.samples = samples;
  rep.sample_size = sample_size;
  rep.emd_computed = with_emd;
  for (std::int64_t k = 0; k < samples; ++k) {
    const Mat synth = sampler(k, sample_size);
    const Mat ref = draw_real_subsample(real, sample_size, seed, k);
    rep.cd.push_back(chamfer_distance<double>(ref, synth));
    if (with_emd) rep.emd.push_back(emd_exact(ref, synth));
  }
  std::tie(rep.cd_mean, rep.cd_std) = detail::mean_std(rep.cd);
  std::tie(rep.emd_mean, rep.emd_std) = detail::mean_std(rep.emd);
  return rep;
}

// Draws generator samples in evaluation mode and scores them against real
// subsamples, all in the normalized working domain.
inline MetricReport evaluate_generator(const ModelState& state, const PointSet& real_normalized,
                                       std::int64_t samples = kDefaultEvalSamples,
                                       std::int64_t sample_size = kDefaultEvalSampleSize,
                                       std::uint64_t seed = 42, bool with_emd = false) {
  const SynthSampler sampler = [&](std::int64_t id, std::int64_t n) {
    Rng rng = make_stream(seed, Stream::kEvalSynth, static_cast<std::uint64_t>(id));
    const Mat z = sample_noise(n, state.arch.m, state.arch.noise_prior, rng);
    return generator_forward(state, z);
  };
  return evaluate_samples(sampler, real_normalized, samples, sample_size, seed, with_emd);
}

}  // namespace geosynth
