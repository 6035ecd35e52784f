/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <numeric>
#include <vector>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "vrdial/error.hpp"
#include "vrdial/nn/kernels.hpp"
#include "vrdial/nn/layers.hpp"

namespace vrdial {
namespace {

using nn::ParamStore;
using nn::Tape;
using nn::Var;

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * uniform_open(rng) - 1.0;
  return v;
}

TEST_CASE("serial and parallel kernels agree bitwise") {
  Rng rng(11);
  const int n = 37, m = 29, k = 41;
  auto a = random_vec(n * k, rng);
  auto b = random_vec(m * k, rng);
  auto g = random_vec(n * m, rng);
  auto x = random_vec(k, rng);
  auto xr = random_vec(n, rng);

  std::vector<double> s(n * m, 0.5), o(n * m, 0.5);
  kernels::serial::matmul_nt(a.data(), b.data(), n, m, k, s.data());
  kernels::omp::matmul_nt(a.data(), b.data(), n, m, k, o.data());
  CHECK(s == o);

  std::vector<double> s2(n * k, 0.0), o2(n * k, 0.0);
  kernels::serial::matmul_nn(g.data(), b.data(), n, m, k, s2.data());
  kernels::omp::matmul_nn(g.data(), b.data(), n, m, k, o2.data());
  CHECK(s2 == o2);

  std::vector<double> s3(m * k, 0.0), o3(m * k, 0.0);
  kernels::serial::matmul_tn(g.data(), a.data(), n, m, k, s3.data());
  kernels::omp::matmul_tn(g.data(), a.data(), n, m, k, o3.data());
  CHECK(s3 == o3);

  std::vector<double> s4(n, 0.0), o4(n, 0.0);
  kernels::serial::matvec(a.data(), n, k, x.data(), s4.data());
  kernels::omp::matvec(a.data(), n, k, x.data(), o4.data());
  CHECK(s4 == o4);

  std::vector<double> s5(k, 0.0), o5(k, 0.0);
  kernels::serial::matvec_t(a.data(), n, k, xr.data(), s5.data());
  kernels::omp::matvec_t(a.data(), n, k, xr.data(), o5.data());
  CHECK(s5 == o5);

  std::vector<double> s6(n * k, 1.0), o6(n * k, 1.0);
  kernels::serial::add_outer(s6.data(), n, k, xr.data(), x.data());
  kernels::omp::add_outer(o6.data(), n, k, xr.data(), x.data());
  CHECK(s6 == o6);

  // Independent oracle for one product.
  double ref = 0.5;
  for (int t = 0; t < k; ++t) ref += a[3 * k + t] * b[5 * k + t];
  CHECK(s[3 * m + 5] == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("tape primitives match finite differences") {
  ParamStore store;
  Rng rng(3);
  const int w = store.add("w", 4, 3);
  const int b = store.add("b", 4, 1);
  const int x = store.add("x", 3, 1);
  const int m = store.add("m", 5, 4);
  const int wx = store.add("gru.wx", 12, 3);
  const int wh = store.add("gru.wh", 12, 4);
  const int bx = store.add("gru.bx", 12, 1);
  const int bh = store.add("gru.bh", 12, 1);
  nn::init_uniform(store, rng);

  auto build = [&](Tape& t) {
    Var h = t.tanh(t.affine(t.param(w), t.param(x), t.param(b)));
    Var s = t.sigmoid(t.matvec(t.param(m), h));
    Var att = t.softmax(t.matvec_t(t.param(m), s));
    Var hg = t.gru(t.param(x), h, t.param(wx), t.param(wh), t.param(bx), t.param(bh));
    const Var parts[] = {s, hg};
    Var cat = t.concat(parts);
    Var p = t.softmax(t.slice(cat, 1, 6));
    Var rows = t.matmul_nt(t.param(m), t.param(wh));
    Var r = t.slice(t.row(t.add_row(rows, t.param(bx)), 2), 4, 3);
    const int map[] = {0, 1, 0, 2, 1, 2};
    Var folded = t.fold(p, map, 3);
    const int sup[] = {0, 1, 2};
    Var q = t.softmax(r);
    Var kl = t.kl(q, folded, sup);
    Var e = t.sum(t.exp(t.scale(t.mul(s, s), 0.5)));
    Var lg = t.log(t.sum_at(p, std::vector<int>{0, 3}));
    Var d = t.dot(att, t.tanh(att));
    return t.add_scalar(t.add(t.add(kl, e), t.sub(lg, d)), t.scalar_const(0.25));
  };
  auto res = testing::check_gradients(store, build, 40, 17);
  CHECK(res.checked == 40);
  CHECK(res.worst < 1e-4);
}

TEST_CASE("graph attention gradient and normalization") {
  ParamStore store;
  Rng rng(5);
  nn::Rgat g = nn::Rgat::make(store, "g", 6, 5, 4, 3);
  const int feats = store.add("feats", 4, 6);
  nn::init_uniform(store, rng);
  const nn::GraphEdge edges[] = {{0, 1, 1}, {1, 0, 2}, {2, 1, 1}, {3, 2, 2}, {2, 3, 1}};
  auto build = [&](Tape& t) {
    auto r = g.encode(t, t.param(feats), 4, edges, 2);
    return t.sum(t.mul(r.nodes, r.nodes));
  };
  auto res = testing::check_gradients(store, build, 30, 9);
  CHECK(res.worst < 1e-4);

  Tape t(store);
  auto r = g.encode(t, t.param(feats), 4, edges, 2);
  REQUIRE(r.attention.size() == 2);
  std::vector<double> per_node(4, 0.0);
  for (std::size_t e = 0; e < r.edge_dst.size(); ++e) per_node[r.edge_dst[e]] += r.attention[0][e];
  for (double s : per_node) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rgat is permutation equivariant") {
  ParamStore store;
  Rng rng(8);
  nn::Rgat g = nn::Rgat::make(store, "g", 5, 6, 3, 3);
  nn::init_uniform(store, rng);
  const int n = 5;
  auto feats = random_vec(n * 5, rng);
  std::vector<nn::GraphEdge> edges = {{0, 1, 1}, {1, 0, 2}, {1, 2, 1}, {2, 1, 2}, {3, 4, 1}};
  std::vector<int> perm = {3, 0, 4, 1, 2};  // old index -> new index
  std::vector<double> pf(feats.size());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 5; ++c) pf[perm[i] * 5 + c] = feats[i * 5 + c];
  }
  std::vector<nn::GraphEdge> pe;
  for (auto e : edges) pe.push_back({perm[e.src], perm[e.dst], e.relation});
  Tape t(store);
  auto a = g.encode(t, t.constant(feats, n, 5), n, edges, 2);
  auto b = g.encode(t, t.constant(pf, n, 5), n, pe, 2);
  auto av = t.value(a.nodes);
  auto bv = t.value(b.nodes);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(av[i * 3 + c] == doctest::Approx(bv[perm[i] * 3 + c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gru cell fixed point at zero") {
  ParamStore store;
  nn::GruCell cell = nn::GruCell::make(store, "c", 3, 4);
  Tape t(store);
  Var h = cell.step(t, t.zeros(4), t.zeros(3));
  for (double v : t.value(h)) CHECK(v == 0.0);
  // Zero weights: r = z = 1/2, n = 0, so h' = h / 2.
  const double hv[] = {1.0, -2.0, 0.5, 4.0};
  Var h2 = cell.step(t, t.constant(hv, 4), t.zeros(3));
  for (int i = 0; i < 4; ++i) CHECK(t.value(h2)[i] == doctest::Approx(hv[i] / 2.0));
  CHECK_THROWS_AS(cell.step(t, t.zeros(3), t.zeros(3)), ShapeError);
}

TEST_CASE("attention contract") {
  ParamStore store;
  Rng rng(2);
  auto att = nn::Attention::make(store, "a", 3, 2, 4);
  nn::init_uniform(store, rng);
  Tape t(store);
  const double one[] = {0.3, -0.1, 0.7};
  auto k1 = att.prepare(t, t.constant(one, 1, 3));
  const double q[] = {0.2, 0.9};
  auto r1 = att.attend(t, t.constant(q, 2), k1);
  CHECK(t.value(r1.weights)[0] == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(t.value(r1.context)[i] == doctest::Approx(one[i]));

  const double same[] = {0.3, -0.1, 0.7, 0.3, -0.1, 0.7};
  auto r2 = att.attend(t, t.constant(q, 2), att.prepare(t, t.constant(same, 2, 3)));
  for (int i = 0; i < 3; ++i) CHECK(t.value(r2.context)[i] == doctest::Approx(one[i]));

  const double two[] = {0.3, -0.1, 0.7, -1.0, 2.0, 0.1};
  auto r3 = att.attend(t, t.constant(q, 2), att.prepare(t, t.constant(two, 2, 3)));
  auto w = t.value(r3.weights);
  CHECK(std::abs(w[0] + w[1] - 1.0) < 1e-12);
}

TEST_CASE("bigru encoder shape and order sensitivity") {
  ParamStore store;
  Rng rng(4);
  auto enc = nn::BiGruEncoder::make(store, "e", 3, 5);
  nn::init_uniform(store, rng);
  Tape t(store);
  auto x0 = random_vec(3, rng);
  auto x1 = random_vec(3, rng);
  std::vector<Var> a = {t.constant(x0, 3), t.constant(x1, 3)};
  std::vector<Var> b = {a[1], a[0]};
  auto ea = enc.encode(t, a, t.zeros(5));
  auto eb = enc.encode(t, b, t.zeros(5));
  CHECK(t.rows(ea.per_token) == 2);
  CHECK(t.size(ea.summary) == 5);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= t.value(ea.per_token)[i] != t.value(eb.per_token)[(i + 5) % 10];
  CHECK(differs);
  std::vector<Var> one = {a[0]};
  CHECK(t.rows(enc.encode(t, one, t.zeros(5)).per_token) == 1);
  CHECK_THROWS_AS(enc.encode(t, std::span<const Var>{}, t.zeros(5)), ValidationError);

  ParamStore zero;
  auto ez = nn::BiGruEncoder::make(zero, "e", 3, 5);
  Tape tz(zero);
  std::vector<Var> za = {tz.constant(x0, 3)};
  for (double v : tz.value(ez.encode(tz, za, tz.zeros(5)).summary)) CHECK(std::isfinite(v));
}

TEST_CASE("mlp zero weights give zero logits") {
  ParamStore store;
  auto mlp = nn::Mlp::make(store, "m", 3, 4, 2);
  Tape t(store);
  const double x[] = {1.0, 2.0, 3.0};
  for (double v : t.value(mlp(t, t.constant(x, 3)))) CHECK(v == 0.0);
  CHECK_THROWS(mlp(t, t.zeros(2)));
}

TEST_CASE("gumbel softmax sampling") {
  Rng rng(1);
  const double logits[] = {0.2, -1.0, 3.0};
  for (int i = 0; i < 200; ++i) {
    auto d = nn::gumbel_softmax_sample(logits, 0.5, true, rng);
    CHECK(std::count(d.sample.begin(), d.sample.end(), 1.0) == 1);
    CHECK(std::accumulate(d.sample.begin(), d.sample.end(), 0.0) == 1.0);
  }
  auto soft = nn::gumbel_softmax_sample(logits, 2.0, false, rng);
  CHECK(std::accumulate(soft.sample.begin(), soft.sample.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(nn::gumbel_softmax_sample(logits, 0.0, true, rng), ValidationError);
  Rng a(42), b(42);
  CHECK(nn::gumbel_softmax_sample(logits, 1.0, false, a).sample ==
        nn::gumbel_softmax_sample(logits, 1.0, false, b).sample);
}

}  // namespace
}  // namespace vrdial
