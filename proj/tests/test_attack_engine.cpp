// Copyright 2026 The Jadena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "jadena/attack.hpp"
#include "jadena/rng.hpp"
#include "test_util.hpp"

using namespace jadena;

namespace {

AttackConfig small_config() {
  AttackConfig cfg;
  cfg.iterations = 4;
  cfg.degree = 2;
  cfg.variant = Variant::augment;
  return cfg;
}

}  // namespace

TEST_CASE("zero initialization applies as the identity, bit-exact") {
  Rng rng(3);
  const RasterImage img = testing::random_image(rng, 16, 16);
  AttackConfig cfg = small_config();
  const PerturbationState state = init_state(cfg, img);
  CHECK(apply(state, img).data == img.data);
  CHECK(j_smooth(state.field, cfg.loss_weights()).value == 0.0);

  cfg.seed = 123456;  // zero init does not depend on the seed
  const PerturbationState other = init_state(cfg, img);
  CHECK(other.field.coeffs() == state.field.coeffs());
  CHECK(other.noise.v == state.noise.v);
}

TEST_CASE("reference sets per variant") {
  Rng rng(5);
  std::vector<RasterImage> group;
  for (int i = 0; i < 5; ++i) group.push_back(testing::random_image(rng, 16, 16));

  AttackConfig cfg = small_config();
  cfg.variant = Variant::single;
  CHECK(build_reference_set(cfg, group, 0).empty());

  cfg.variant = Variant::augment;
  CHECK(build_reference_set(cfg, group, 0).size() == 4);

  cfg.variant = Variant::group;
  const auto refs = build_reference_set(cfg, group, 2);
  REQUIRE(refs.size() == 4);
  CHECK(refs[0].data == group[0].data);
  CHECK(refs[1].data == group[1].data);
  CHECK(refs[2].data == group[3].data);
  CHECK(refs[3].data == group[4].data);

  CHECK_THROWS_AS(build_reference_set(cfg, {group[0]}, 0), Error);
}

TEST_CASE("rotated references of non-square targets are resized back") {
  Rng rng(6);
  const RasterImage img = testing::random_image(rng, 12, 20);
  AttackConfig cfg = small_config();
  const auto refs = build_reference_set(cfg, {img}, 0);
  for (const auto& r : refs) {
    CHECK(r.height == 12);
    CHECK(r.width == 20);
  }
}

TEST_CASE("step: zero gradients leave the state unchanged") {
  Rng rng(7);
  const RasterImage img = testing::random_image(rng, 8, 8);
  const AttackConfig cfg = small_config();
  PerturbationState state = init_state(cfg, img);
  ObjectiveGrads grads{state.field.zero_grad(), Tensor3::zeros(3, 8, 8)};
  step(state, grads, cfg);
  CHECK(state.field.coeffs() == std::vector<double>(6, 0.0));
  CHECK(state.noise.v == Tensor3::zeros(3, 8, 8).v);
}

TEST_CASE("step: an all-positive noise gradient moves every entry by alpha_n") {
  Rng rng(8);
  const RasterImage img = testing::random_image(rng, 8, 8);
  AttackConfig cfg = small_config();
  cfg.enable_exposure = false;
  PerturbationState state = init_state(cfg, img);
  ObjectiveGrads grads{state.field.zero_grad(), Tensor3::zeros(3, 8, 8)};
  for (auto& g : grads.noise.v) g = 0.5;
  step(state, grads, cfg);
  for (double v : state.noise.v) CHECK(v == cfg.alpha_n);
}

TEST_CASE("noise stays inside the epsilon ball after every step") {
  Rng rng(9);
  const RasterImage img = testing::random_image(rng, 8, 8);
  AttackConfig cfg = small_config();
  cfg.alpha_n = 0.9;  // giant steps to force the projection
  cfg.epsilon = 0.05;
  PerturbationState state = init_state(cfg, img);
  for (int it = 0; it < 5; ++it) {
    ObjectiveGrads grads{state.field.zero_grad(), Tensor3::zeros(3, 8, 8)};
    for (auto& g : grads.noise.v) g = rng.uniform(-1.0, 1.0);
    step(state, grads, cfg);
    for (double v : state.noise.v) CHECK(std::abs(v) <= cfg.epsilon);
  }
}

TEST_CASE("NaN gradients abort with a diagnostic") {
  Rng rng(10);
  const RasterImage img = testing::random_image(rng, 8, 8);
  const AttackConfig cfg = small_config();
  PerturbationState state = init_state(cfg, img);
  ObjectiveGrads grads{state.field.zero_grad(), Tensor3::zeros(3, 8, 8)};
  grads.noise.v[5] = std::nan("");
  CHECK_THROWS_AS(step(state, grads, cfg), Error);
}

TEST_CASE("disabling both parameter groups reproduces the input bit-exact") {
  Rng rng(11);
  const RasterImage img = testing::random_image(rng, 16, 16);
  AttackConfig cfg = small_config();
  cfg.enable_noise = false;
  cfg.enable_exposure = false;
  const ConvStack stack = ConvStack::seeded(default_arch(8, 2), 1);
  const AttackResult res = run_attack(cfg, stack, img, {});
  CHECK(res.adversarial.data == img.data);
}

TEST_CASE("ablation identities on the final state") {
  Rng rng(12);
  const RasterImage img = testing::random_image(rng, 16, 16, 0.2, 0.8);
  const ConvStack stack = ConvStack::seeded(default_arch(8, 2), 2);

  AttackConfig cfg = small_config();
  cfg.enable_exposure = false;
  const AttackResult noise_only = run_attack(cfg, stack, img, {});
  for (double t : noise_only.state.field.eval()) CHECK(t == 1.0);
  double max_noise = 0.0;
  for (double v : noise_only.state.noise.v) max_noise = std::max(max_noise, std::abs(v));
  CHECK(max_noise > 0.0);

  AttackConfig cfg2 = small_config();
  cfg2.enable_noise = false;
  const AttackResult exposure_only = run_attack(cfg2, stack, img, {});
  for (double v : exposure_only.state.noise.v) CHECK(v == 0.0);
}

TEST_CASE("attack runs are deterministic and respect the noise bound") {
  Rng rng(13);
  const RasterImage img = testing::random_image(rng, 16, 16, 0.2, 0.8);
  const ConvStack stack = ConvStack::seeded(default_arch(8, 2), 3);
  AttackConfig cfg = small_config();
  const auto refs = build_reference_set(cfg, {img}, 0);
  const AttackResult a = run_attack(cfg, stack, img, refs);
  const AttackResult b = run_attack(cfg, stack, img, refs);
  CHECK(a.adversarial.data == b.adversarial.data);
  REQUIRE(a.trace.size() == static_cast<size_t>(cfg.iterations));
  for (const auto& t : a.trace) {
    CHECK(t.max_abs_noise <= cfg.epsilon + 1e-15);
    CHECK(t.total == t.j_contrast + t.j_smooth);
  }
  for (double v : a.adversarial.data) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("divergent exposure aborts with the iteration index in the message") {
  Rng rng(14);
  const RasterImage img = testing::random_image(rng, 16, 16, 0.2, 0.8);
  const ConvStack stack = ConvStack::seeded(default_arch(8, 2), 4);
  AttackConfig cfg = small_config();
  cfg.degree = 0;
  cfg.alpha_a = 31.0;  // one sign step overshoots the |log theta| <= 30 guard
  cfg.lambda_b = 0.0;
  cfg.enable_noise = false;
  try {
    (void)run_attack(cfg, stack, img, {});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::divergent_field);
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("random noise baseline: identity at zero, bounded, deterministic") {
  Rng rng(15);
  const RasterImage img = testing::random_image(rng, 12, 12);
  CHECK(random_noise_baseline(img, 0.0, 5).data == img.data);

  const double eps = 16.0 / 255.0;
  const RasterImage a = random_noise_baseline(img, eps, 5);
  const RasterImage b = random_noise_baseline(img, eps, 5);
  CHECK(a.data == b.data);
  const RasterImage c = random_noise_baseline(img, eps, 6);
  CHECK(a.data != c.data);
  for (size_t i = 0; i < img.data.size(); ++i) {
    CHECK(a.data[i] >= 0.0);
    CHECK(a.data[i] <= 1.0);
    // bounded by eps before clamping; after clamping the difference can only shrink
    CHECK(std::abs(a.data[i] - img.data[i]) <= eps + 1e-15);
  }
}
