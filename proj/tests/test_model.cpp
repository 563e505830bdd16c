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
#include <numeric>
#include <vector>

#include "geosynth/model.hpp"
#include "geosynth/nn.hpp"

using namespace geosynth;

namespace {

// -----------------------------------------------------------------------
// Replay oracle: the evaluation-mode forward pass re-implemented with plain
// index loops, independent of the Eigen expression path.

std::vector<std::vector<double>> replay_dense(const DenseParams<double>& p,
                                              const std::vector<std::vector<double>>& x) {
  const auto out = static_cast<std::size_t>(p.w.rows());
  const auto in = static_cast<std::size_t>(p.w.cols());
  const std::size_t n = x[0].size();
  std::vector<std::vector<double>> y(out, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < out; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double acc = p.b[static_cast<Eigen::Index>(r)];
      for (std::size_t k = 0; k < in; ++k)
        acc += p.w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * x[k][c];
      y[r][c] = acc;
    }
  return y;
}

void replay_bn_eval(const BatchNormParams<double>& p, std::vector<std::vector<double>>& x) {
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double inv = 1.0 / std::sqrt(p.running_var[ri] + kBnEpsilon);
    for (auto& v : x[r]) v = p.gamma[ri] * (v - p.running_mean[ri]) * inv + p.beta[ri];
  }
}

void replay_relu(std::vector<std::vector<double>>& x) {
  for (auto& row : x)
    for (auto& v : row) v = v > 0.0 ? v : 0.0;
}

std::vector<std::vector<double>> replay_generator(const ModelState& st, const Mat& z) {
  const std::size_t n = static_cast<std::size_t>(z.cols());
  std::vector<std::vector<double>> h(static_cast<std::size_t>(z.rows()),
                                     std::vector<double>(n));
  for (std::size_t r = 0; r < h.size(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      h[r][c] = z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

  for (const auto& stage : st.gen.trunk.stages) {
    h = replay_dense(stage.lin, h);
    replay_bn_eval(stage.bn, h);
    replay_relu(h);
  }
  const std::size_t c_width = h.size();
  std::vector<double> global(c_width);
  for (std::size_t r = 0; r < c_width; ++r) {
    double best = h[r][0];
    for (std::size_t c = 1; c < n; ++c) best = std::max(best, h[r][c]);
    global[r] = best;
  }
  std::vector<std::vector<double>> fused(2 * c_width, std::vector<double>(n));
  for (std::size_t r = 0; r < c_width; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      fused[r][c] = h[r][c];
      fused[c_width + r][c] = global[r];
    }

  // Alignment stack on the global vector.
  std::vector<std::vector<double>> gcol(c_width, std::vector<double>(1));
  for (std::size_t r = 0; r < c_width; ++r) gcol[r][0] = global[r];
  for (std::size_t i = 0; i < st.gen.stn.lin.size(); ++i) {
    gcol = replay_dense(st.gen.stn.lin[i], gcol);
    if (i + 1 < st.gen.stn.lin.size()) replay_relu(gcol);
  }
  const int m = st.arch.m;
  std::vector<std::vector<double>> t(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m)));
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row)
      t[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] =
          gcol[static_cast<std::size_t>(col * m + row)][0];  // column-major flattening

  auto head = fused;
  for (std::size_t i = 0; i < st.gen.head.lin.size(); ++i) {
    head = replay_dense(st.gen.head.lin[i], head);
    if (i + 1 < st.gen.head.lin.size()) {
      replay_bn_eval(st.gen.head.bn[i], head);
      replay_relu(head);
    }
  }
  std::vector<std::vector<double>> y(static_cast<std::size_t>(m), std::vector<double>(n));
  for (int row = 0; row < m; ++row)
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int k = 0; k < m; ++k)
        acc += t[static_cast<std::size_t>(row)][static_cast<std::size_t>(k)] *
               head[static_cast<std::size_t>(k)][c];
      y[static_cast<std::size_t>(row)][c] = std::tanh(acc);
    }
  return y;
}

// Randomize every tensor so no parameter sits at a structural default.
template <class S>
void scramble(ModelStateT<S>& st, std::uint64_t seed) {
  Rng rng(seed);
  visit_model(st, [&](const std::string& name, auto& t, bool) {
    const bool variance = name.ends_with("rvar");
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<S>(variance ? rng.uniform(0.5, 1.5) : rng.uniform(-0.6, 0.6));
  });
}

// -----------------------------------------------------------------------
// Finite-difference machinery over the training-mode losses.

template <class S>
S dis_loss(ModelStateT<S>& st, const MatX<S>& real, const MatX<S>& z, const MatX<S>& targets) {
  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, false, gc);
  MatX<S> batch(st.arch.m, real.cols() + fake.cols());
  batch.leftCols(real.cols()) = real;
  batch.rightCols(fake.cols()) = fake;
  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, batch, false, dc);
  return bce_with_logits_mean(logits, targets);
}

template <class S>
DiscriminatorParams<S> dis_grads(ModelStateT<S>& st, const MatX<S>& real, const MatX<S>& z,
                                 const MatX<S>& targets) {
  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, false, gc);
  MatX<S> batch(st.arch.m, real.cols() + fake.cols());
  batch.leftCols(real.cols()) = real;
  batch.rightCols(fake.cols()) = fake;
  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, batch, false, dc);
  auto grads = zero_like(st.dis);
  discriminator_backward(st.dis, dc, bce_with_logits_grad(logits, targets), grads, nullptr);
  return grads;
}

template <class S>
S gen_loss(ModelStateT<S>& st, const MatX<S>& z, const MatX<S>& targets) {
  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, false, gc);
  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, fake, false, dc);
  return bce_with_logits_mean(logits, targets);
}

template <class S>
GeneratorParams<S> gen_grads(ModelStateT<S>& st, const MatX<S>& z, const MatX<S>& targets) {
  GeneratorCache<S> gc;
  const MatX<S> fake = generator_forward_train(st.gen, z, st.arch.m, false, gc);
  DiscriminatorCache<S> dc;
  const MatX<S> logits = discriminator_logits_train(st.dis, fake, false, dc);
  auto dg = zero_like(st.dis);
  MatX<S> dfake;
  discriminator_backward(st.dis, dc, bce_with_logits_grad(logits, targets), dg, &dfake);
  auto grads = zero_like(st.gen);
  generator_backward(st.gen, gc, dfake, grads);
  return grads;
}

struct FlatGrads {
  std::vector<double> values;
  std::vector<bool> trainable;
};

template <class Params, class Visit>
FlatGrads flatten_grads(const Params& grads, Visit&& visit) {
  FlatGrads out;
  visit(const_cast<Params&>(grads), [&](const std::string&, auto& t, bool tr) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      out.values.push_back(static_cast<double>(t.data()[i]));
      out.trainable.push_back(tr);
    }
  });
  return out;
}

// Central finite differences over every trainable scalar of `params`
// (perturbed in place, double precision), compared against the flattened
// analytic gradient with a mixed relative/absolute criterion.
template <class Params, class Visit, class LossFn>
long fd_check(Params& params, const FlatGrads& analytic, Visit&& visit, LossFn&& loss, double h,
              double tol, double abs_tol) {
  std::vector<std::pair<double*, Eigen::Index>> views;
  visit(params, [&](const std::string&, auto& t, bool) { views.push_back({t.data(), t.size()}); });
  long checked = 0;
  std::size_t flat = 0;
  for (auto [ptr, size] : views) {
    for (Eigen::Index i = 0; i < size; ++i, ++flat) {
      if (!analytic.trainable[flat]) continue;
      double* cell = ptr + i;
      const double orig = *cell;
      const double step = std::max(h * std::abs(orig), h);
      *cell = orig + step;
      const double lp = loss();
      *cell = orig - step;
      const double lm = loss();
      *cell = orig;
      const double fd = (lp - lm) / (2.0 * step);
      const double an = analytic.values[flat];
      const double err = std::abs(an - fd);
      const double denom = std::max(std::abs(an), std::abs(fd));
      if (!(err <= abs_tol || err <= tol * denom)) {
        CAPTURE(flat);
        CAPTURE(an);
        CAPTURE(fd);
        CHECK(false);
      }
      ++checked;
    }
  }
  return checked;
}

// Exact widening of a 32-bit model so the finite-difference oracle can run
// at full precision on the same parameter values.
ModelStateT<double> widen(const ModelStateT<float>& st) {
  ModelStateT<double> out = init_model<double>(st.arch, 0);
  std::vector<std::pair<const float*, Eigen::Index>> src;
  visit_model(const_cast<ModelStateT<float>&>(st), [&](const std::string&, auto& t, bool) {
    src.push_back({t.data(), t.size()});
  });
  std::size_t k = 0;
  visit_model(out, [&](const std::string&, auto& t, bool) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<double>(src[k].first[i]);
    ++k;
  });
  return out;
}

}  // namespace

TEST_CASE("generator preserves shape and bounds for B in {1,3,256}") {
  const auto arch = ArchitectureConfig::tiny(2);
  const auto st = init_model<double>(arch, 11);
  Rng rng(1);
  for (const Eigen::Index b : {1, 3, 256}) {
    const Mat z = sample_noise(b, 2, NoisePrior::kUniform, rng);
    const Mat y = generator_forward(st, z);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == b);
    CHECK(y.minCoeff() >= -1.0);
    CHECK(y.maxCoeff() <= 1.0);
  }
}

TEST_CASE("discriminator emits one score per point strictly inside (0,1)") {
  const auto arch = ArchitectureConfig::tiny(2);
  const auto st = init_model<double>(arch, 12);
  Rng rng(2);
  for (const Eigen::Index b : {1, 3, 256}) {
    const Mat x = sample_noise(b, 2, NoisePrior::kUniform, rng);
    const Vec s = discriminator_forward(st, x);
    CHECK(s.size() == b);
    for (Eigen::Index i = 0; i < b; ++i) {
      CHECK(s[i] > 0.0);
      CHECK(s[i] < 1.0);
    }
  }
}

TEST_CASE("eval forwards are deterministic and reject bad inputs") {
  const auto arch = ArchitectureConfig::tiny(3);
  const auto st = init_model<double>(arch, 13);
  Rng r1(3), r2(3);
  const Mat z1 = sample_noise(8, 3, NoisePrior::kUniform, r1);
  const Mat z2 = sample_noise(8, 3, NoisePrior::kUniform, r2);
  CHECK(z1 == z2);
  CHECK(generator_forward(st, z1) == generator_forward(st, z2));
  const Mat wrong = Mat::Random(2, 4);
  CHECK_THROWS(generator_forward(st, wrong));
  CHECK_THROWS(discriminator_forward(st, wrong));
  auto broken = st;
  broken.gen.trunk.stages[0].lin.w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(generator_forward(broken, z1));
}

TEST_CASE("permutation of the input permutes outputs exactly") {
  const auto arch = ArchitectureConfig::tiny(2);
  auto st = init_model<double>(arch, 14);
  scramble(st, 900);
  Rng rng(4);
  const Eigen::Index b = 17;
  const Mat z = sample_noise(b, 2, NoisePrior::kUniform, rng);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(b));
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuf(5);
  for (Eigen::Index i = b - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(shuf.uniform_int(static_cast<std::uint64_t>(i + 1)))]);
  Mat zp(2, b);
  for (Eigen::Index i = 0; i < b; ++i) zp.col(i) = z.col(perm[static_cast<std::size_t>(i)]);

  const Mat y = generator_forward(st, z);
  const Mat yp = generator_forward(st, zp);
  const Vec s = discriminator_forward(st, z);
  const Vec sp = discriminator_forward(st, zp);
  for (Eigen::Index i = 0; i < b; ++i) {
    CHECK(yp.col(i) == y.col(perm[static_cast<std::size_t>(i)]));
    CHECK(sp[i] == s[perm[static_cast<std::size_t>(i)]]);
  }
}

TEST_CASE("duplicated points receive identical scores") {
  const auto arch = ArchitectureConfig::tiny(2);
  const auto st = init_model<double>(arch, 15);
  Mat x(2, 4);
  x << 0.3, -0.2, 0.3, 0.9,
       0.1, 0.4, 0.1, -0.5;
  const Vec s = discriminator_forward(st, x);
  CHECK(s[0] == s[2]);
}

TEST_CASE("forward matches a hand-rolled replay of the same parameters") {
  const auto arch = ArchitectureConfig::tiny(2);
  auto st = init_model<double>(arch, 16);
  scramble(st, 777);
  Rng rng(6);
  const Mat z = sample_noise(5, 2, NoisePrior::kUniform, rng);
  const Mat y = generator_forward(st, z);
  const auto ref = replay_generator(st, z);
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      CHECK(std::abs(y(r, c) - ref[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) <
            1e-5);
}

TEST_CASE("noise prior covers the working domain with zero mean") {
  Rng rng(7);
  const Mat z = sample_noise(100000, 2, NoisePrior::kUniform, rng);
  CHECK(z.minCoeff() >= -1.0);
  CHECK(z.maxCoeff() <= 1.0);
  // Uniform on [-1,1]: sd = 1/sqrt(3); 3 sigma of the mean estimate.
  const double tol = 3.0 / std::sqrt(3.0 * 100000.0);
  CHECK(std::abs(z.row(0).mean()) < tol);
  CHECK(std::abs(z.row(1).mean()) < tol);
  Rng g(8);
  const Mat zg = sample_noise(1000, 2, NoisePrior::kGaussian, g);
  CHECK(zg.minCoeff() >= -1.0);
  CHECK(zg.maxCoeff() <= 1.0);
}

TEST_CASE("architecture validation catches inconsistent widths") {
  auto a = ArchitectureConfig::tiny(2);
  a.generator_head.back() = 3;
  CHECK_THROWS(a.validate());
  auto b = ArchitectureConfig::tiny(2);
  b.stn_widths.back() = 5;
  CHECK_THROWS(b.validate());
  auto c = ArchitectureConfig::tiny(2);
  c.global_width = 4;
  CHECK_THROWS(c.validate());
}

TEST_CASE("analytic gradients match central differences (64-bit)") {
  const auto arch = ArchitectureConfig::tiny(2);
  auto st = init_model<double>(arch, 21);
  Rng rng(9);
  const Mat real = sample_noise(4, 2, NoisePrior::kUniform, rng);
  const Mat z = sample_noise(4, 2, NoisePrior::kUniform, rng);
  Mat targets(1, 8);
  targets << 1, 1, 0, 1, 0, 0, 1, 0;

  SUBCASE("discriminator loss") {
    const auto analytic = flatten_grads(dis_grads(st, real, z, targets),
                                        [](auto& p, auto&& fn) { visit_discriminator(p, fn); });
    const long checked = fd_check(
        st.dis, analytic, [](auto& p, auto&& fn) { visit_discriminator(p, fn); },
        [&]() { return dis_loss(st, real, z, targets); }, 1e-5, 1e-6, 1e-9);
    CHECK(checked > 100);
  }
  SUBCASE("generator loss") {
    Mat gt(1, 4);
    gt << 1, 1, 1, 0;
    const auto analytic = flatten_grads(gen_grads(st, z, gt),
                                        [](auto& p, auto&& fn) { visit_generator(p, fn); });
    const long checked = fd_check(
        st.gen, analytic, [](auto& p, auto&& fn) { visit_generator(p, fn); },
        [&]() { return gen_loss(st, z, gt); }, 1e-5, 1e-6, 1e-9);
    CHECK(checked > 100);
  }
}

TEST_CASE("analytic gradients match central differences (32-bit)") {
  // The analytic gradients under test are computed in float; the oracle
  // differentiates an exact double copy of the same parameter values so the
  // comparison measures gradient correctness, not oracle noise.
  const auto arch = ArchitectureConfig::tiny(2);
  auto st = init_model<float>(arch, 22);
  auto wide = widen(st);
  Rng rng(10);
  const MatX<float> real = sample_noise<float>(4, 2, NoisePrior::kUniform, rng);
  const MatX<float> z = sample_noise<float>(4, 2, NoisePrior::kUniform, rng);
  const Mat real_d = real.cast<double>();
  const Mat z_d = z.cast<double>();
  MatX<float> targets(1, 8);
  targets << 1, 1, 0, 1, 0, 0, 1, 0;
  const Mat targets_d = targets.cast<double>();

  SUBCASE("discriminator loss") {
    const auto analytic = flatten_grads(dis_grads(st, real, z, targets),
                                        [](auto& p, auto&& fn) { visit_discriminator(p, fn); });
    const long checked = fd_check(
        wide.dis, analytic, [](auto& p, auto&& fn) { visit_discriminator(p, fn); },
        [&]() { return dis_loss(wide, real_d, z_d, targets_d); }, 1e-5, 1e-3, 1e-4);
    CHECK(checked > 100);
  }
  SUBCASE("generator loss") {
    MatX<float> gt(1, 4);
    gt << 1, 1, 1, 0;
    const Mat gt_d = gt.cast<double>();
    const auto analytic = flatten_grads(gen_grads(st, z, gt),
                                        [](auto& p, auto&& fn) { visit_generator(p, fn); });
    const long checked = fd_check(
        wide.gen, analytic, [](auto& p, auto&& fn) { visit_generator(p, fn); },
        [&]() { return gen_loss(wide, z_d, gt_d); }, 1e-5, 1e-3, 1e-4);
    CHECK(checked > 100);
  }
}
