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
#include <cstdint>
#include <functional>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geosynth/nn.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

enum class NoisePrior { kUniform, kGaussian };

inline std::string noise_prior_name(NoisePrior p) {
  return p == NoisePrior::kUniform ? "uniform" : "gaussian";
}
inline NoisePrior parse_noise_prior(const std::string& s) {
  if (s == "uniform") return NoisePrior::kUniform;
  if (s == "gaussian") return NoisePrior::kGaussian;
  throw std::invalid_argument("unknown noise prior: " + s);
}

// Network shape. Both networks share the same point-feature trunk design: a
// five-stage shared per-point encoder with batch norm + ReLU, a max-pool
// global feature, and per-point fusion of local and global features. The
// generator additionally owns the alignment sub-network producing an m x m
// transform from the global feature, applied to its projection head output.
struct ArchitectureConfig {
  int m = 2;
  std::vector<int> encoder_channels{64, 128, 256, 512, 1024};
  int global_width = 1024;
  std::vector<int> stn_widths{512, 256, 128, 4};        // last entry must be m*m
  std::vector<int> generator_head{512, 256, 128, 2};    // last entry must be m
  std::vector<int> discriminator_head{256, 1};          // last entry must be 1
  NoisePrior noise_prior = NoisePrior::kUniform;

  int fused_width() const { return 2 * global_width; }

  void validate() const {
    auto positive = [](const std::vector<int>& v) {
      for (int w : v)
        if (w <= 0) return false;
      return true;
    };
    if (m < 2 || m > 3) throw std::invalid_argument("ArchitectureConfig: m must be 2 or 3");
    if (encoder_channels.size() != 5)
      throw std::invalid_argument("ArchitectureConfig: encoder has five stages");
    if (stn_widths.size() != 4)
      throw std::invalid_argument("ArchitectureConfig: alignment stack has four stages");
    if (generator_head.size() != 4)
      throw std::invalid_argument("ArchitectureConfig: generator head has four stages");
    if (discriminator_head.size() != 2)
      throw std::invalid_argument("ArchitectureConfig: discriminator head has two stages");
    if (!positive(encoder_channels) || !positive(stn_widths) || !positive(generator_head) ||
        !positive(discriminator_head) || global_width <= 0)
      throw std::invalid_argument("ArchitectureConfig: all widths must be positive");
    if (global_width != encoder_channels.back())
      throw std::invalid_argument("ArchitectureConfig: global feature width must equal last encoder width");
    if (stn_widths.back() != m * m)
      throw std::invalid_argument("ArchitectureConfig: alignment output must be m*m");
    if (generator_head.back() != m)
      throw std::invalid_argument("ArchitectureConfig: generator head must end at m");
    if (discriminator_head.back() != 1)
      throw std::invalid_argument("ArchitectureConfig: discriminator head must end at 1");
  }

  static ArchitectureConfig paper(int m) {
    ArchitectureConfig a;
    a.m = m;
    a.encoder_channels = {64, 128, 256, 512, 1024};
    a.global_width = 1024;
    a.stn_widths = {512, 256, 128, m * m};
    a.generator_head = {512, 256, 128, m};
    a.discriminator_head = {256, 1};
    a.validate();
    return a;
  }

  // CPU-friendly sizing for smoke runs and sanity training.
  static ArchitectureConfig desk(int m) {
    ArchitectureConfig a;
    a.m = m;
    a.encoder_channels = {32, 64, 64, 128, 128};
    a.global_width = 128;
    a.stn_widths = {64, 32, 16, m * m};
    a.generator_head = {128, 64, 32, m};
    a.discriminator_head = {64, 1};
    a.validate();
    return a;
  }

  // Widths <= 8 for finite-difference and replay testing.
  static ArchitectureConfig tiny(int m) {
    ArchitectureConfig a;
    a.m = m;
    a.encoder_channels = {4, 4, 8, 8, 8};
    a.global_width = 8;
    a.stn_widths = {8, 8, 8, m * m};
    a.generator_head = {8, 8, 8, m};
    a.discriminator_head = {8, 1};
    a.validate();
    return a;
  }
};

template <class S>
struct EncoderStage {
  DenseParams<S> lin;
  BatchNormParams<S> bn;
};

template <class S>
struct TrunkParams {
  std::vector<EncoderStage<S>> stages;
};

// Dense stack with batch norm + ReLU between stages; the final stage is a
// bare affine map.
template <class S>
struct MlpParams {
  std::vector<DenseParams<S>> lin;
  std::vector<BatchNormParams<S>> bn;  // size lin.size() - 1
};

// Alignment stack on the single global feature vector: ReLU between stages,
// no batch statistics (there is only one global vector per forward), final
// affine emitting the flattened m x m transform.
template <class S>
struct StnParams {
  std::vector<DenseParams<S>> lin;
};

template <class S>
struct GeneratorParams {
  TrunkParams<S> trunk;
  StnParams<S> stn;
  MlpParams<S> head;
};

template <class S>
struct DiscriminatorParams {
  TrunkParams<S> trunk;
  MlpParams<S> head;
};

template <class S>
struct ModelStateT {
  ArchitectureConfig arch;
  GeneratorParams<S> gen;
  DiscriminatorParams<S> dis;
  std::int64_t step = 0;
};

using ModelState = ModelStateT<double>;

// ---------------------------------------------------------------------------
// Parameter traversal. The visit order is the manifest order used by the
// optimizer and the checkpoint format; it must stay stable.

template <class Trunk, class Fn>
void visit_trunk(const std::string& prefix, Trunk& t, Fn&& fn) {
  for (std::size_t i = 0; i < t.stages.size(); ++i) {
    const std::string base = prefix + ".enc" + std::to_string(i);
    fn(base + ".w", t.stages[i].lin.w, true);
    fn(base + ".b", t.stages[i].lin.b, true);
    fn(base + ".bn.gamma", t.stages[i].bn.gamma, true);
    fn(base + ".bn.beta", t.stages[i].bn.beta, true);
    fn(base + ".bn.rmean", t.stages[i].bn.running_mean, false);
    fn(base + ".bn.rvar", t.stages[i].bn.running_var, false);
  }
}

template <class Mlp, class Fn>
void visit_mlp(const std::string& prefix, Mlp& mlp, Fn&& fn) {
  for (std::size_t i = 0; i < mlp.lin.size(); ++i) {
    const std::string base = prefix + ".fc" + std::to_string(i);
    fn(base + ".w", mlp.lin[i].w, true);
    fn(base + ".b", mlp.lin[i].b, true);
    if (i + 1 < mlp.lin.size()) {
      fn(base + ".bn.gamma", mlp.bn[i].gamma, true);
      fn(base + ".bn.beta", mlp.bn[i].beta, true);
      fn(base + ".bn.rmean", mlp.bn[i].running_mean, false);
      fn(base + ".bn.rvar", mlp.bn[i].running_var, false);
    }
  }
}

template <class Params, class Fn>
void visit_generator(Params& p, Fn&& fn) {
  visit_trunk("g.trunk", p.trunk, fn);
  for (std::size_t i = 0; i < p.stn.lin.size(); ++i) {
    const std::string base = "g.stn.fc" + std::to_string(i);
    fn(base + ".w", p.stn.lin[i].w, true);
    fn(base + ".b", p.stn.lin[i].b, true);
  }
  visit_mlp("g.head", p.head, fn);
}

template <class Params, class Fn>
void visit_discriminator(Params& p, Fn&& fn) {
  visit_trunk("d.trunk", p.trunk, fn);
  visit_mlp("d.head", p.head, fn);
}

template <class State, class Fn>
void visit_model(State& st, Fn&& fn) {
  visit_generator(st.gen, fn);
  visit_discriminator(st.dis, fn);
}

// ---------------------------------------------------------------------------
// Construction and initialization.

namespace detail {

template <class S>
void fill_uniform(MatX<S>& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
}
template <class S>
void fill_uniform(VecX<S>& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
}

template <class S>
DenseParams<S> make_dense(Eigen::Index out, Eigen::Index in, double bound, Rng& rng) {
  auto p = DenseParams<S>::zeros(out, in);
  fill_uniform(p.w, bound, rng);
  return p;
}

template <class S>
TrunkParams<S> make_trunk(const ArchitectureConfig& a, Rng& rng) {
  TrunkParams<S> t;
  Eigen::Index in = a.m;
  for (int c : a.encoder_channels) {
    EncoderStage<S> st;
    st.lin = make_dense<S>(c, in, std::sqrt(6.0 / static_cast<double>(in)), rng);
    st.bn = BatchNormParams<S>::identity(c);
    t.stages.push_back(std::move(st));
    in = c;
  }
  return t;
}

template <class S>
MlpParams<S> make_mlp(Eigen::Index in, const std::vector<int>& widths, Rng& rng) {
  MlpParams<S> m;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Eigen::Index out = widths[i];
    const bool last = i + 1 == widths.size();
    const double bound = last ? std::sqrt(6.0 / static_cast<double>(in + out))
                              : std::sqrt(6.0 / static_cast<double>(in));
    m.lin.push_back(make_dense<S>(out, in, bound, rng));
    if (!last) m.bn.push_back(BatchNormParams<S>::identity(out));
    in = out;
  }
  return m;
}

template <class S>
StnParams<S> make_stn(const ArchitectureConfig& a, Rng& rng) {
  StnParams<S> stn;
  Eigen::Index in = a.global_width;
  for (std::size_t i = 0; i < a.stn_widths.size(); ++i) {
    const Eigen::Index out = a.stn_widths[i];
    const bool last = i + 1 == a.stn_widths.size();
    if (last) {
      // Zero weights with an identity-transform bias: the alignment starts
      // as a no-op and is learned from there.
      auto p = DenseParams<S>::zeros(out, in);
      MatX<S> eye = MatX<S>::Identity(a.m, a.m);
      p.b = Eigen::Map<VecX<S>>(eye.data(), eye.size());
      stn.lin.push_back(std::move(p));
    } else {
      stn.lin.push_back(make_dense<S>(out, in, std::sqrt(6.0 / static_cast<double>(in)), rng));
    }
    in = out;
  }
  return stn;
}

}  // namespace detail

template <class S>
ModelStateT<S> init_model(const ArchitectureConfig& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng = make_stream(seed, Stream::kModelInit);
  ModelStateT<S> st;
  st.arch = arch;
  st.gen.trunk = detail::make_trunk<S>(arch, rng);
  st.gen.stn = detail::make_stn<S>(arch, rng);
  st.gen.head = detail::make_mlp<S>(arch.fused_width(), arch.generator_head, rng);
  st.dis.trunk = detail::make_trunk<S>(arch, rng);
  st.dis.head = detail::make_mlp<S>(arch.fused_width(), arch.discriminator_head, rng);
  st.step = 0;
  return st;
}

// Zero-filled parameter structures of matching shapes, used as gradient
// accumulators.
template <class S>
GeneratorParams<S> zero_like(const GeneratorParams<S>& p) {
  GeneratorParams<S> z = p;
  visit_generator(z, [](const std::string&, auto& t, bool) { t.setZero(); });
  return z;
}
template <class S>
DiscriminatorParams<S> zero_like(const DiscriminatorParams<S>& p) {
  DiscriminatorParams<S> z = p;
  visit_discriminator(z, [](const std::string&, auto& t, bool) { t.setZero(); });
  return z;
}

template <class S>
bool has_finite_params(const ModelStateT<S>& st) {
  bool ok = true;
  visit_model(const_cast<ModelStateT<S>&>(st), [&](const std::string&, auto& t, bool) {
    if (!t.allFinite()) ok = false;
  });
  return ok;
}

// ---------------------------------------------------------------------------
// Noise prior: pseudo-coordinates over the working domain [-1,1]^m.

template <class S>
MatX<S> sample_noise(Eigen::Index batch, int m, NoisePrior prior, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("sample_noise: batch must be >= 1");
  MatX<S> z(m, batch);
  for (Eigen::Index c = 0; c < batch; ++c)
    for (Eigen::Index r = 0; r < m; ++r) {
      if (prior == NoisePrior::kUniform) {
        z(r, c) = static_cast<S>(rng.uniform(-1.0, 1.0));
      } else {
        const double g = 0.5 * rng.gaussian();
        z(r, c) = static_cast<S>(std::clamp(g, -1.0, 1.0));
      }
    }
  return z;
}

inline Mat sample_noise(Eigen::Index batch, int m, NoisePrior prior, Rng& rng) {
  return sample_noise<double>(batch, m, prior, rng);
}

// ---------------------------------------------------------------------------
// Forward / backward.

template <class S>
struct StageCache {
  DenseCache<S> dense;
  BnCache<S> bn;
  MatX<S> relu_y;
};

template <class S>
struct TrunkCache {
  std::vector<StageCache<S>> stage;
  MatX<S> local;                     // last encoder output, channels x B
  std::vector<Eigen::Index> argmax;  // per channel
};

// Returns the fused per-point features [local; global] (2C x B).
template <class S>
MatX<S> trunk_forward_train(TrunkParams<S>& p, const MatX<S>& x, bool update_running,
                            TrunkCache<S>& cache) {
  cache.stage.resize(p.stages.size());
  MatX<S> h = x;
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    auto& sc = cache.stage[i];
    h = dense_forward_cached(p.stages[i].lin, h, sc.dense);
    h = bn_forward_train(p.stages[i].bn, h, update_running, sc.bn);
    sc.relu_y = relu(h);
    h = sc.relu_y;
  }
  cache.local = h;
  const VecX<S> global = max_pool_points(h, cache.argmax);
  MatX<S> fused(2 * h.rows(), h.cols());
  fused.topRows(h.rows()) = h;
  fused.bottomRows(h.rows()) = global.replicate(1, h.cols());
  return fused;
}

template <class S>
MatX<S> trunk_forward_eval(const TrunkParams<S>& p, const MatX<S>& x) {
  MatX<S> h = x;
  for (const auto& st : p.stages) {
    h = dense_forward(st.lin, h);
    h = bn_forward_eval(st.bn, h);
    h = relu(h);
  }
  std::vector<Eigen::Index> argmax;
  const VecX<S> global = max_pool_points(h, argmax);
  MatX<S> fused(2 * h.rows(), h.cols());
  fused.topRows(h.rows()) = h;
  fused.bottomRows(h.rows()) = global.replicate(1, h.cols());
  return fused;
}

// dfused is the gradient on the fused features; dglobal_extra (may be empty)
// carries additional gradient on the global feature from consumers outside
// the fusion, e.g. the generator's alignment stack.
template <class S>
MatX<S> trunk_backward(const TrunkParams<S>& p, const TrunkCache<S>& cache, const MatX<S>& dfused,
                       const VecX<S>& dglobal_extra, TrunkParams<S>& grads) {
  const Eigen::Index c = cache.local.rows();
  VecX<S> dglobal = dfused.bottomRows(c).rowwise().sum();
  if (dglobal_extra.size() > 0) dglobal += dglobal_extra;
  MatX<S> dh = dfused.topRows(c);
  dh += max_pool_points_backward(cache.local.cols(), cache.argmax, dglobal);
  for (std::size_t i = p.stages.size(); i-- > 0;) {
    const auto& sc = cache.stage[i];
    dh = relu_backward(sc.relu_y, dh);
    dh = bn_backward(p.stages[i].bn, sc.bn, dh, grads.stages[i].bn);
    dh = dense_backward(p.stages[i].lin, sc.dense, dh, grads.stages[i].lin);
  }
  return dh;
}

template <class S>
struct MlpCache {
  std::vector<StageCache<S>> stage;
};

template <class S>
MatX<S> mlp_forward_train(MlpParams<S>& p, const MatX<S>& x, bool update_running,
                          MlpCache<S>& cache) {
  cache.stage.resize(p.lin.size());
  MatX<S> h = x;
  for (std::size_t i = 0; i < p.lin.size(); ++i) {
    auto& sc = cache.stage[i];
    h = dense_forward_cached(p.lin[i], h, sc.dense);
    if (i + 1 < p.lin.size()) {
      h = bn_forward_train(p.bn[i], h, update_running, sc.bn);
      sc.relu_y = relu(h);
      h = sc.relu_y;
    }
  }
  return h;
}

template <class S>
MatX<S> mlp_forward_eval(const MlpParams<S>& p, const MatX<S>& x) {
  MatX<S> h = x;
  for (std::size_t i = 0; i < p.lin.size(); ++i) {
    h = dense_forward(p.lin[i], h);
    if (i + 1 < p.lin.size()) h = relu(bn_forward_eval(p.bn[i], h));
  }
  return h;
}

template <class S>
MatX<S> mlp_backward(const MlpParams<S>& p, const MlpCache<S>& cache, const MatX<S>& dy,
                     MlpParams<S>& grads) {
  MatX<S> dh = dy;
  for (std::size_t i = p.lin.size(); i-- > 0;) {
    const auto& sc = cache.stage[i];
    if (i + 1 < p.lin.size()) {
      dh = relu_backward(sc.relu_y, dh);
      dh = bn_backward(p.bn[i], sc.bn, dh, grads.bn[i]);
    }
    dh = dense_backward(p.lin[i], sc.dense, dh, grads.lin[i]);
  }
  return dh;
}

template <class S>
struct StnCache {
  std::vector<DenseCache<S>> dense;
  std::vector<MatX<S>> relu_y;  // size lin.size() - 1
  MatX<S> transform;            // m x m
};

template <class S>
MatX<S> stn_forward(const StnParams<S>& p, const VecX<S>& global, int m,
                    std::type_identity_t<StnCache<S>*> cache) {
  MatX<S> h = global;
  std::vector<DenseCache<S>> dense(p.lin.size());
  std::vector<MatX<S>> relu_y;
  for (std::size_t i = 0; i < p.lin.size(); ++i) {
    h = dense_forward_cached(p.lin[i], h, dense[i]);
    if (i + 1 < p.lin.size()) {
      h = relu(h);
      relu_y.push_back(h);
    }
  }
  MatX<S> t = Eigen::Map<MatX<S>>(h.data(), m, m);
  if (cache) {
    cache->dense = std::move(dense);
    cache->relu_y = std::move(relu_y);
    cache->transform = t;
  }
  return t;
}

// Returns the gradient with respect to the global feature vector.
template <class S>
VecX<S> stn_backward(const StnParams<S>& p, const StnCache<S>& cache, const MatX<S>& dtransform,
                     StnParams<S>& grads) {
  MatX<S> flat = dtransform;
  MatX<S> dh = Eigen::Map<MatX<S>>(flat.data(), flat.size(), 1);
  for (std::size_t i = p.lin.size(); i-- > 0;) {
    if (i + 1 < p.lin.size()) dh = relu_backward(cache.relu_y[i], dh);
    dh = dense_backward(p.lin[i], cache.dense[i], dh, grads.lin[i]);
  }
  return dh.col(0);
}

template <class S>
struct GeneratorCache {
  TrunkCache<S> trunk;
  StnCache<S> stn;
  MlpCache<S> head;
  MatX<S> proj;        // head output before alignment, m x B
  MatX<S> y;           // tanh output
};

template <class S>
MatX<S> generator_forward_train(GeneratorParams<S>& p, const MatX<S>& z, int m,
                                bool update_running, GeneratorCache<S>& cache) {
  const MatX<S> fused = trunk_forward_train(p.trunk, z, update_running, cache.trunk);
  const VecX<S> global = fused.col(0).tail(cache.trunk.local.rows());
  const MatX<S> t = stn_forward(p.stn, global, m, &cache.stn);
  cache.proj = mlp_forward_train(p.head, fused, update_running, cache.head);
  cache.y = (t * cache.proj).array().tanh().matrix();
  return cache.y;
}

template <class S>
void generator_backward(const GeneratorParams<S>& p, const GeneratorCache<S>& cache,
                        const MatX<S>& dy, GeneratorParams<S>& grads) {
  const MatX<S> dz_pre = (dy.array() * (S(1) - cache.y.array().square())).matrix();
  const MatX<S> dtransform = dz_pre * cache.proj.transpose();
  const MatX<S> dproj = cache.stn.transform.transpose() * dz_pre;
  const VecX<S> dglobal_stn = stn_backward(p.stn, cache.stn, dtransform, grads.stn);
  const MatX<S> dfused = mlp_backward(p.head, cache.head, dproj, grads.head);
  trunk_backward(p.trunk, cache.trunk, dfused, dglobal_stn, grads.trunk);
}

template <class S>
struct DiscriminatorCache {
  TrunkCache<S> trunk;
  MlpCache<S> head;
};

// Returns per-point logits (1 x B); labels never enter the forward pass.
template <class S>
MatX<S> discriminator_logits_train(DiscriminatorParams<S>& p, const MatX<S>& x,
                                   bool update_running, DiscriminatorCache<S>& cache) {
  const MatX<S> fused = trunk_forward_train(p.trunk, x, update_running, cache.trunk);
  return mlp_forward_train(p.head, fused, update_running, cache.head);
}

// If dx is non-null it receives the gradient with respect to the input
// points (needed when the generator trains through the discriminator).
template <class S>
void discriminator_backward(const DiscriminatorParams<S>& p, const DiscriminatorCache<S>& cache,
                            const MatX<S>& dlogits, DiscriminatorParams<S>& grads,
                            std::type_identity_t<MatX<S>*> dx) {
  const MatX<S> dfused = mlp_backward(p.head, cache.head, dlogits, grads.head);
  MatX<S> din = trunk_backward(p.trunk, cache.trunk, dfused, VecX<S>(), grads.trunk);
  if (dx) *dx = std::move(din);
}

// ---------------------------------------------------------------------------
// Public evaluation-mode passes (deterministic, read-only on the state).

template <class S>
MatX<S> generator_forward(const ModelStateT<S>& st, const MatX<S>& z) {
  if (z.rows() != st.arch.m) throw std::invalid_argument("generator_forward: dimension mismatch");
  if (!has_finite_params(st)) throw std::runtime_error("generator_forward: non-finite parameters");
  const MatX<S> fused = trunk_forward_eval(st.gen.trunk, z);
  const VecX<S> global = fused.col(0).tail(st.arch.global_width);
  const MatX<S> t = stn_forward(st.gen.stn, global, st.arch.m, nullptr);
  const MatX<S> proj = mlp_forward_eval(st.gen.head, fused);
  return (t * proj).array().tanh().matrix();
}

// Logit magnitude cap so that sigmoid scores stay strictly inside (0, 1) at
// the working precision.
template <class S>
S score_logit_clamp() {
  return S(0.75) * -std::log(std::numeric_limits<S>::epsilon());
}

template <class S>
VecX<S> discriminator_forward(const ModelStateT<S>& st, const MatX<S>& x) {
  if (x.rows() != st.arch.m) throw std::invalid_argument("discriminator_forward: dimension mismatch");
  if (!has_finite_params(st)) throw std::runtime_error("discriminator_forward: non-finite parameters");
  const MatX<S> fused = trunk_forward_eval(st.dis.trunk, x);
  const MatX<S> logits = mlp_forward_eval(st.dis.head, fused);
  VecX<S> scores(logits.cols());
  const S cap = score_logit_clamp<S>();
  for (Eigen::Index i = 0; i < logits.cols(); ++i)
    scores[i] = stable_sigmoid(std::clamp(logits(0, i), -cap, cap));
  return scores;
}

template <class S>
Eigen::Index parameter_count(const ModelStateT<S>& st) {
  Eigen::Index n = 0;
  visit_model(const_cast<ModelStateT<S>&>(st),
              [&](const std::string&, auto& t, bool) { n += t.size(); });
  return n;
}

}  // namespace geosynth
