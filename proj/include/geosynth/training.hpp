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

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geosynth/model.hpp"
#include "geosynth/optimizer.hpp"
#include "geosynth/privacy.hpp"

namespace geosynth {

struct TrainConfig {
  std::int64_t batch_size = 7500;
  std::int64_t steps_per_epoch = 1000;
  std::int64_t epochs = 100;
  AdamWConfig optimizer;  // lr0 = 4e-5, decay x0.1 after steps 5000/50000/90000
  PrivacyBudget budget = PrivacyBudget::non_private();
  std::uint64_t seed = 42;

  std::int64_t total_steps() const { return steps_per_epoch * epochs; }

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (steps_per_epoch < 0 || epochs < 0)
      throw std::invalid_argument("TrainConfig: negative schedule");
    optimizer.validate();
  }

  static TrainConfig paper_preset() { return TrainConfig{}; }

  // CPU-scale preset: small batches, a short schedule, and a learning rate
  // sized so the short schedule actually converges.
  static TrainConfig desk_preset() {
    TrainConfig c;
    c.batch_size = 256;
    c.steps_per_epoch = 500;
    c.epochs = 4;
    c.optimizer.lr0 = 1e-3;
    return c;
  }
};

struct TrainLog {
  std::vector<std::int64_t> step;
  std::vector<double> d_loss;
  std::vector<double> g_loss;
  std::vector<double> lr;
};

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

// One discriminator update (Theta_D moves, Theta_G untouched): fake points
// are generated from z, fake labels drawn fresh with flip probability q, and
// the combined 2B batch is scored point-by-point against the flipped labels.
// Returns the pre-update mean BCE loss.
template <class S>
S discriminator_step(ModelStateT<S>& st, AdamW<S>& opt_d, const MatX<S>& real_coords,
                     const std::vector<std::uint8_t>& real_labels, const MatX<S>& z, double q,
                     Rng& fake_flip_rng, std::int64_t global_step) {
  const Eigen::Index b = z.cols();
  if (real_coords.cols() != b)
    throw std::invalid_argument("discriminator_step: real and noise batch sizes differ");
  if (static_cast<Eigen::Index>(real_labels.size()) != b)
    throw std::invalid_argument("discriminator_step: label count mismatch");

  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, /*update_running=*/false, gc);

  MatX<S> batch(st.arch.m, 2 * b);
  batch.leftCols(b) = real_coords;
  batch.rightCols(b) = fake;

  const std::vector<std::uint8_t> fake_labels =
      perturb_labels(std::vector<std::uint8_t>(static_cast<std::size_t>(b), 0), q, fake_flip_rng);
  MatX<S> targets(1, 2 * b);
  for (Eigen::Index i = 0; i < b; ++i) {
    targets(0, i) = static_cast<S>(real_labels[static_cast<std::size_t>(i)]);
    targets(0, b + i) = static_cast<S>(fake_labels[static_cast<std::size_t>(i)]);
  }

  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, batch, /*update_running=*/true, dc);
  const S loss = bce_with_logits_mean(logits, targets);
  if (!std::isfinite(static_cast<double>(loss)))
    throw TrainingDiverged("discriminator_step: non-finite loss at step " + std::to_string(global_step));

  auto grads = zero_like(st.dis);
  discriminator_backward(st.dis, dc, bce_with_logits_grad(logits, targets), grads, nullptr);
  opt_d.step(st.dis, grads, global_step);
  return loss;
}

// One generator update (Theta_G moves, Theta_D untouched): fresh noise and
// fresh fake-label flips; the generator's nominal target "real" is flipped
// with probability q, i.e. targets are the complements of the flipped fake
// labels. With q = 0 this is the standard non-saturating objective.
template <class S>
S generator_step(ModelStateT<S>& st, AdamW<S>& opt_g, const MatX<S>& z, double q,
                 Rng& fake_flip_rng, std::int64_t global_step) {
  const Eigen::Index b = z.cols();
  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, /*update_running=*/true, gc);

  const std::vector<std::uint8_t> fake_labels =
      perturb_labels(std::vector<std::uint8_t>(static_cast<std::size_t>(b), 0), q, fake_flip_rng);
  MatX<S> targets(1, b);
  for (Eigen::Index i = 0; i < b; ++i)
    targets(0, i) = static_cast<S>(1 - fake_labels[static_cast<std::size_t>(i)]);

  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, fake, /*update_running=*/false, dc);
  const S loss = bce_with_logits_mean(logits, targets);
  if (!std::isfinite(static_cast<double>(loss)))
    throw TrainingDiverged("generator_step: non-finite loss at step " + std::to_string(global_step));

  auto dis_grads = zero_like(st.dis);  // computed for the chain rule, never applied
  MatX<S> dfake;
  discriminator_backward(st.dis, dc, bce_with_logits_grad(logits, targets), dis_grads, &dfake);
  auto gen_grads = zero_like(st.gen);
  generator_backward(st.gen, gc, dfake, gen_grads);
  opt_g.step(st.gen, gen_grads, global_step);
  return loss;
}

struct TrainResult {
  ModelState state;
  TrainLog log;
};

using EpochHook = std::function<void(const ModelState&, std::int64_t epoch)>;
using StepHook = std::function<void(std::int64_t step, double d_loss, double g_loss, double lr)>;

// Runs the full min-max loop on an already privatized dataset whose
// coordinates are in the working domain. Flipped labels are read from the
// dataset and never re-randomized; batch indices are drawn per step without
// replacement.
inline TrainResult train(const PrivatizedDataset& data, const ArchitectureConfig& arch,
                         const TrainConfig& cfg, const EpochHook& on_epoch = {},
                         const StepHook& on_step = {}) {
  cfg.validate();
  arch.validate();
  const std::int64_t total = cfg.total_steps();
  if (total > 0 && data.count() < cfg.batch_size)
    throw std::invalid_argument("train: dataset smaller than one batch");
  if (data.dim() != arch.m) throw std::invalid_argument("train: dataset dimension mismatch");

  TrainResult out;
  out.state = init_model<double>(arch, cfg.seed);
  AdamW<double> opt_d(cfg.optimizer), opt_g(cfg.optimizer);
  Rng batch_rng = make_stream(cfg.seed, Stream::kBatchSample);
  Rng noise_rng = make_stream(cfg.seed, Stream::kNoise);
  Rng fake_flip_rng = make_stream(cfg.seed, Stream::kFakeLabelFlip);
  const double q = flip_probability(cfg.budget);
  const Eigen::Index n = data.count();

  Mat real(arch.m, cfg.batch_size);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(cfg.batch_size));
  for (std::int64_t t = 1; t <= total; ++t) {
    const auto picks = batch_rng.sample_without_replacement(n, cfg.batch_size);
    for (std::int64_t k = 0; k < cfg.batch_size; ++k) {
      const auto src = static_cast<Eigen::Index>(picks[static_cast<std::size_t>(k)]);
      real.col(static_cast<Eigen::Index>(k)) = data.coords.col(src);
      labels[static_cast<std::size_t>(k)] = data.flipped_label[static_cast<std::size_t>(src)];
    }
    const Mat z_d = sample_noise(cfg.batch_size, arch.m, arch.noise_prior, noise_rng);
    const double d_loss =
        discriminator_step(out.state, opt_d, real, labels, z_d, q, fake_flip_rng, t);
    const Mat z_g = sample_noise(cfg.batch_size, arch.m, arch.noise_prior, noise_rng);
    const double g_loss = generator_step(out.state, opt_g, z_g, q, fake_flip_rng, t);
    out.state.step = t;

    out.log.step.push_back(t);
    out.log.d_loss.push_back(d_loss);
    out.log.g_loss.push_back(g_loss);
    out.log.lr.push_back(lr_at_step(cfg.optimizer, t));
    if (on_step) on_step(t, d_loss, g_loss, lr_at_step(cfg.optimizer, t));

    if (on_epoch && cfg.steps_per_epoch > 0 && t % cfg.steps_per_epoch == 0)
      on_epoch(out.state, t / cfg.steps_per_epoch);
  }
  return out;
}

}  // namespace geosynth
