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
#include <limits>
#include <vector>

#include "geosynth/point_set.hpp"

namespace geosynth {

// Data layout throughout: one point per column, feature channels as rows.
// A "one-dimensional convolution" over an unordered point set is a shared
// per-point affine map, i.e. a plain dense layer in this layout.

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;  // running = mom*running + (1-mom)*batch

template <class S>
struct DenseParams {
  MatX<S> w;
  VecX<S> b;

  static DenseParams zeros(Eigen::Index out, Eigen::Index in) {
    return DenseParams{MatX<S>::Zero(out, in), VecX<S>::Zero(out)};
  }
};

template <class S>
struct BatchNormParams {
  VecX<S> gamma, beta;
  VecX<S> running_mean, running_var;

  static BatchNormParams identity(Eigen::Index c) {
    return BatchNormParams{VecX<S>::Ones(c), VecX<S>::Zero(c), VecX<S>::Zero(c), VecX<S>::Ones(c)};
  }
  static BatchNormParams zeros(Eigen::Index c) {
    return BatchNormParams{VecX<S>::Zero(c), VecX<S>::Zero(c), VecX<S>::Zero(c), VecX<S>::Zero(c)};
  }
};

template <class S>
struct DenseCache {
  MatX<S> x;  // layer input
};

template <class S>
struct BnCache {
  MatX<S> xhat;
  VecX<S> inv_std;
};

template <class S>
MatX<S> dense_forward(const DenseParams<S>& p, const MatX<S>& x) {
  return (p.w * x).colwise() + p.b;
}

template <class S>
MatX<S> dense_forward_cached(const DenseParams<S>& p, const MatX<S>& x, DenseCache<S>& cache) {
  cache.x = x;
  return dense_forward(p, x);
}

// Accumulates dW, db into grads and returns the input gradient.
template <class S>
MatX<S> dense_backward(const DenseParams<S>& p, const DenseCache<S>& cache, const MatX<S>& dy,
                       DenseParams<S>& grads) {
  grads.w.noalias() += dy * cache.x.transpose();
  grads.b += dy.rowwise().sum();
  return p.w.transpose() * dy;
}

// Batch statistics are taken over the points of the current batch (columns).
// `update_running` controls whether running averages move; a forward pass
// through a network whose parameters must stay untouched runs with it off.
template <class S>
MatX<S> bn_forward_train(BatchNormParams<S>& p, const MatX<S>& x, bool update_running,
                         BnCache<S>& cache) {
  const VecX<S> mean = x.rowwise().mean();
  MatX<S> centered = x.colwise() - mean;
  const VecX<S> var = centered.array().square().rowwise().mean().matrix();
  cache.inv_std = (var.array() + static_cast<S>(kBnEpsilon)).rsqrt().matrix();
  cache.xhat = (centered.array().colwise() * cache.inv_std.array()).matrix();
  if (update_running) {
    const auto mom = static_cast<S>(kBnMomentum);
    p.running_mean = mom * p.running_mean + (S(1) - mom) * mean;
    p.running_var = mom * p.running_var + (S(1) - mom) * var;
  }
  MatX<S> y = (cache.xhat.array().colwise() * p.gamma.array()).matrix();
  y.colwise() += p.beta;
  return y;
}

template <class S>
MatX<S> bn_forward_eval(const BatchNormParams<S>& p, const MatX<S>& x) {
  const VecX<S> inv_std = (p.running_var.array() + static_cast<S>(kBnEpsilon)).rsqrt().matrix();
  MatX<S> y =
      ((x.colwise() - p.running_mean).array().colwise() * (p.gamma.array() * inv_std.array()))
          .matrix();
  y.colwise() += p.beta;
  return y;
}

template <class S>
MatX<S> bn_backward(const BatchNormParams<S>& p, const BnCache<S>& cache, const MatX<S>& dy,
                    BatchNormParams<S>& grads) {
  const auto n = static_cast<S>(dy.cols());
  grads.gamma += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
  grads.beta += dy.rowwise().sum();
  const MatX<S> dxhat = (dy.array().colwise() * p.gamma.array()).matrix();
  const VecX<S> sum_dxhat = dxhat.rowwise().sum();
  const VecX<S> sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix();
  MatX<S> t = n * dxhat;
  t.colwise() -= sum_dxhat;
  t -= (cache.xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
  return (t.array().colwise() * (cache.inv_std.array() / n)).matrix();
}

template <class S>
MatX<S> relu(const MatX<S>& x) {
  return x.cwiseMax(S(0));
}

// Needs the forward output (mask y > 0).
template <class S>
MatX<S> relu_backward(const MatX<S>& y, const MatX<S>& dy) {
  return ((y.array() > S(0)).template cast<S>() * dy.array()).matrix();
}

// Channel-wise max over points; the symmetric aggregation that makes the
// global feature permutation invariant. argmax keeps the first maximizer
// per channel for gradient routing.
template <class S>
VecX<S> max_pool_points(const MatX<S>& x, std::vector<Eigen::Index>& argmax) {
  argmax.assign(static_cast<std::size_t>(x.rows()), 0);
  VecX<S> g(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    S best = x(r, 0);
    Eigen::Index best_c = 0;
    for (Eigen::Index c = 1; c < x.cols(); ++c) {
      if (x(r, c) > best) {
        best = x(r, c);
        best_c = c;
      }
    }
    g[r] = best;
    argmax[static_cast<std::size_t>(r)] = best_c;
  }
  return g;
}

template <class S>
MatX<S> max_pool_points_backward(Eigen::Index cols, const std::vector<Eigen::Index>& argmax,
                                 const VecX<S>& dg) {
  MatX<S> dx = MatX<S>::Zero(static_cast<Eigen::Index>(argmax.size()), cols);
  for (Eigen::Index r = 0; r < dx.rows(); ++r) dx(r, argmax[static_cast<std::size_t>(r)]) = dg[r];
  return dx;
}

template <class S>
S stable_sigmoid(S z) {
  if (z >= S(0)) return S(1) / (S(1) + std::exp(-z));
  const S e = std::exp(z);
  return e / (S(1) + e);
}

// Mean binary cross-entropy on logits: max(z,0) - z*t + log(1 + exp(-|z|)).
template <class S>
S bce_with_logits_mean(const MatX<S>& logits, const MatX<S>& targets) {
  S total = S(0);
  for (Eigen::Index c = 0; c < logits.cols(); ++c)
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const S z = logits(r, c), t = targets(r, c);
      total += std::max(z, S(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
  return total / static_cast<S>(logits.size());
}

// Gradient of the mean BCE with respect to the logits: (sigmoid(z) - t) / N.
template <class S>
MatX<S> bce_with_logits_grad(const MatX<S>& logits, const MatX<S>& targets) {
  MatX<S> g(logits.rows(), logits.cols());
  const S inv_n = S(1) / static_cast<S>(logits.size());
  for (Eigen::Index c = 0; c < logits.cols(); ++c)
    for (Eigen::Index r = 0; r < logits.rows(); ++r)
      g(r, c) = (stable_sigmoid(logits(r, c)) - targets(r, c)) * inv_n;
  return g;
}

}  // namespace geosynth
