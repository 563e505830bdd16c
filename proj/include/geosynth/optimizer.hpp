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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "geosynth/model.hpp"

namespace geosynth {

// Adaptive moment estimation with decoupled weight decay. The learning rate
// drops by a fixed factor after each configured step threshold.
struct AdamWConfig {
  double lr0 = 4e-5;
  std::vector<std::int64_t> decay_steps{5000, 50000, 90000};
  double decay_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  void validate() const {
    if (!(lr0 > 0.0)) throw std::invalid_argument("AdamWConfig: learning rate must be positive");
    for (std::size_t i = 1; i < decay_steps.size(); ++i)
      if (decay_steps[i] <= decay_steps[i - 1])
        throw std::invalid_argument("AdamWConfig: decay steps must be strictly increasing");
  }
};

// Pure function of the (1-based) step count.
inline double lr_at_step(const AdamWConfig& cfg, std::int64_t step) {
  double lr = cfg.lr0;
  for (const auto d : cfg.decay_steps)
    if (step > d) lr *= cfg.decay_factor;
  return lr;
}

template <class S>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const AdamWConfig& config() const { return cfg_; }

  // One update over all trainable tensors of `params` using matching
  // gradient tensors. The learning rate follows the schedule at
  // `global_step`; moment bias correction uses this optimizer's own call
  // count.
  template <class Params>
  void step(Params& params, const Params& grads, std::int64_t global_step) {
    ++t_;
    const auto lr = static_cast<S>(lr_at_step(cfg_, global_step));
    const auto b1 = static_cast<S>(cfg_.beta1);
    const auto b2 = static_cast<S>(cfg_.beta2);
    const auto eps = static_cast<S>(cfg_.eps);
    const auto wd = static_cast<S>(cfg_.weight_decay);
    const S bc1 = S(1) - static_cast<S>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S bc2 = S(1) - static_cast<S>(std::pow(cfg_.beta2, static_cast<double>(t_)));

    struct View {
      S* p;
      const S* g;
      Eigen::Index n;
      bool trainable;
    };
    std::vector<View> views;
    visit_network(params, [&](const std::string&, auto& t, bool trainable) {
      views.push_back({t.data(), nullptr, t.size(), trainable});
    });
    std::size_t k = 0;
    visit_network(const_cast<Params&>(grads), [&](const std::string&, auto& t, bool) {
      views[k++].g = t.data();
    });
    if (k != views.size()) throw std::logic_error("AdamW: parameter/gradient mismatch");

    if (m_.empty()) {
      for (const auto& v : views) {
        m_.push_back(VecX<S>::Zero(v.n));
        v_.push_back(VecX<S>::Zero(v.n));
      }
    }
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (!views[i].trainable) continue;
      Eigen::Map<VecX<S>> p(views[i].p, views[i].n);
      Eigen::Map<const VecX<S>> g(views[i].g, views[i].n);
      auto& m = m_[i];
      auto& v = v_[i];
      m = b1 * m + (S(1) - b1) * g;
      v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
      // Decoupled decay, then the adaptive step.
      p = (S(1) - lr * wd) * p;
      p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
  }

 private:
  template <class P, class Fn>
  static void visit_network(P& p, Fn&& fn) {
    if constexpr (requires { p.stn; })
      visit_generator(p, fn);
    else
      visit_discriminator(p, fn);
  }

  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<VecX<S>> m_, v_;
};

}  // namespace geosynth
