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

#include <omp.h>

#include <cmath>

#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "vrdial/error.hpp"
#include "vrdial/objective/objective.hpp"

namespace vrdial::objective {
namespace {

using testing::small_config;
using testing::small_world;
using testing::tiny_world;

ObjectiveSpec spec_with(LossKind kind, std::uint64_t seed = 3) {
  ObjectiveSpec s;
  s.unsup = kind;
  s.seed = seed;
  s.tau = 0.7;
  return s;
}

TEST_CASE("kl_factorized basics") {
  const std::vector<std::vector<double>> q = {{1.0, 0.0}};
  const std::vector<std::vector<double>> p = {{0.5, 0.5}};
  CHECK(kl_factorized(q, p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(kl_factorized(p, p)) <= 1e-12);
  const std::vector<std::vector<double>> zero = {{0.0, 1.0}};
  CHECK_THROWS_AS(kl_factorized(q, zero), ValidationError);
}

TEST_CASE("joint loss total is reconstruction plus every KL term") {
  auto w = small_world(small_config(), 3);
  auto b = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint));
  CHECK(b.finite);
  CHECK(b.kl_state >= -1e-9);
  CHECK(b.kl_action_category >= -1e-9);
  CHECK(b.kl_action_keywords >= -1e-9);
  CHECK(b.total == doctest::Approx(b.reconstruction + b.kl_state + b.kl_action_category +
                                   b.kl_action_keywords)
                       .epsilon(1e-10));
  CHECK(b.turns == 12);
}

TEST_CASE("stage losses split the bound") {
  auto w = small_world(small_config(), 3);
  auto joint = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint));
  auto s1 = loss_stage1(*w.model, w.kg, w.encoded, spec_with(LossKind::kStage1));
  auto s2 = loss_stage2(*w.model, w.kg, w.encoded, spec_with(LossKind::kStage2));
  auto u1 = loss_unsup(*w.model, w.kg, w.encoded, 1, spec_with(LossKind::kJoint));
  auto u2 = loss_unsup(*w.model, w.kg, w.encoded, 2, spec_with(LossKind::kJoint));
  CHECK(s1.kl_action_category == 0.0);
  CHECK(s1.kl_action_keywords == 0.0);
  CHECK(s1.kl_state == joint.kl_state);
  CHECK(s2.kl_state == 0.0);
  CHECK(s2.kl_action_category + s2.kl_action_keywords > 0.0);
  CHECK(u1.total == s1.total);
  CHECK(u2.total == doctest::Approx(s1.total + s2.total).epsilon(1e-10));
  CHECK_THROWS_AS(loss_unsup(*w.model, w.kg, w.encoded, 3, {}), ValidationError);
}

TEST_CASE("same seed replays identical samples, different seeds differ") {
  auto w = small_world(small_config(), 2);
  auto a = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint, 1));
  auto b = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint, 1));
  auto c = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint, 2));
  CHECK(a.total == b.total);
  CHECK(a.total != c.total);
}

TEST_CASE("supervised loss needs labels and flags zero-support gold tokens") {
  auto w = small_world(small_config(), 2);
  auto b = loss_sup(*w.model, w.kg, w.encoded, {});
  CHECK(b.finite);
  CHECK(b.supervised > 0.0);
  CHECK(b.supervised_turns == 8);
  auto unlabeled = w.encoded;
  unlabeled[0].labeled = false;
  CHECK_THROWS_AS(loss_sup(*w.model, w.kg, unlabeled, {}), ValidationError);

  // Without the context detector the prior policy can only emit NULL or
  // graph entities; a gold keyword outside both has zero support.
  auto cfg = small_config();
  cfg.use_context_detector = false;
  auto v = small_world(cfg, 1);
  auto sessions = v.encoded;
  (*sessions[0].turns[0].keywords)[0] = v.model->vocab().find("you");
  auto inf = loss_sup(*v.model, v.kg, sessions, {});
  CHECK_FALSE(inf.finite);
  CHECK(std::isinf(inf.supervised));
  CHECK(std::isinf(inf.total));
}

TEST_CASE("ablations remove their KL terms") {
  auto cfg = small_config();
  cfg.use_state = false;
  auto w = small_world(cfg, 2);
  auto b = loss_joint(*w.model, w.kg, w.encoded, spec_with(LossKind::kJoint));
  CHECK(b.kl_state == 0.0);
  cfg = small_config();
  cfg.use_action = false;
  auto v = small_world(cfg, 2);
  auto c = loss_joint(*v.model, v.kg, v.encoded, spec_with(LossKind::kJoint));
  CHECK(c.kl_action_category == 0.0);
  CHECK(c.kl_action_keywords == 0.0);
  CHECK(c.kl_state > 0.0);
  cfg = small_config();
  cfg.use_context_detector = false;
  auto x = small_world(cfg, 2);
  auto d = loss_joint(*x.model, x.kg, x.encoded, spec_with(LossKind::kJoint));
  CHECK(d.finite);
}

TEST_CASE("parallel evaluation is bitwise identical to the serial path") {
  auto w = small_world(small_config(), 5);
  ObjectiveSpec spec = spec_with(LossKind::kUnsupStage2);
  spec.supervised = true;
  nn::GradBuffer g1(w.model->params());
  nn::GradBuffer g2(w.model->params());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = evaluate(*w.model, w.kg, w.encoded, spec, &g1);
  omp_set_num_threads(3);
  auto b = evaluate(*w.model, w.kg, w.encoded, spec, &g2);
  omp_set_num_threads(saved);
  CHECK(a.total == b.total);
  bool same = true;
  for (int p = 0; p < g1.size(); ++p) {
    auto x = g1.grad(p);
    auto y = g2.grad(p);
    for (std::size_t i = 0; i < x.size(); ++i) same = same && x[i] == y[i];
  }
  CHECK(same);
}

TEST_CASE("objective gradients match finite differences") {
  auto w = small_world(small_config(), 1, 11, 3);
  for (LossKind kind : {LossKind::kJoint, LossKind::kStage1, LossKind::kStage2, LossKind::kNone}) {
    ObjectiveSpec spec = spec_with(kind);
    spec.mode = model::SampleMode::kGumbelSoft;
    spec.supervised = kind == LossKind::kNone;
    auto res = testing::check_gradients(
        w.model->params(),
        [&](Tape& t) { return session_terms(*w.model, t, w.kg, w.encoded[0], 0, spec, {}).objective; },
        12, 17);
    INFO("kind " << static_cast<int>(kind) << " param " << w.model->params().name(res.worst_param)
                 << " analytic " << res.worst_analytic << " numeric " << res.worst_numeric);
    CHECK(res.checked == 12);
    CHECK(res.worst < 1e-3);
  }
}

TEST_CASE("the joint loss is in expectation an upper bound on -log p(R)") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto w = tiny_world(seed);
    const double exact = exact_log_marginal(*w.model, w.kg, w.encoded[0]);
    const double expected = expected_loss_joint(*w.model, w.kg, w.encoded[0], {});
    CHECK(std::isfinite(exact));
    CHECK(exact < 0.0);
    CHECK(-expected <= exact + 1e-6);
  }
}

TEST_CASE("enumeration refuses latent spaces that are too large") {
  auto w = small_world(small_config(), 1);
  CHECK_THROWS_AS(exact_log_marginal(*w.model, w.kg, w.encoded[0]), ValidationError);
}

TEST_CASE("disabling both latents reduces the marginal to the response likelihood") {
  auto w = tiny_world(4);
  // Rebuild the tiny model with both latents ablated.
  auto cfg = w.model->config();
  cfg.use_state = false;
  cfg.use_action = false;
  model::Model m(cfg, w.model->vocab(), w.model->relations());
  m.init(4);
  auto s = m.encode(w.sessions[0]);
  const double exact = exact_log_marginal(m, w.kg, s);
  const double loss = expected_loss_joint(m, w.kg, s, {});
  CHECK(-loss == doctest::Approx(exact).epsilon(1e-12));
}

}  // namespace
}  // namespace vrdial::objective
