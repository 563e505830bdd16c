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

#include <algorithm>
#include <set>

#include "geosynth/rng.hpp"

using namespace geosynth;

TEST_CASE("same seed reproduces the sequence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different tags diverge") {
  Rng a = make_stream(7, Stream::kNoise);
  Rng b = make_stream(7, Stream::kBatchSample);
  int same = 0;
  for (int i = 0; i < 16; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("next_double lies in [0,1)") {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_int respects the bound and hits all residues") {
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_int(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("sample_without_replacement returns distinct indices") {
  Rng r(11);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = r.sample_without_replacement(20, 12);
    std::set<std::int64_t> u(s.begin(), s.end());
    CHECK(u.size() == s.size());
    for (auto v : s) CHECK((v >= 0 && v < 20));
  }
}

TEST_CASE("sample_without_replacement with k == n is a permutation") {
  Rng r(3);
  auto s = r.sample_without_replacement(10, 10);
  std::sort(s.begin(), s.end());
  for (int i = 0; i < 10; ++i) CHECK(s[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("gaussian moments are sane") {
  Rng r(17);
  double sum = 0, sum2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sum2 += g * g;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sum2 / n - 1.0) < 0.03);
}
