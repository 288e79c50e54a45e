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

#include "jadena/exposure_field.hpp"
#include "jadena/rng.hpp"
#include "test_util.hpp"

using namespace jadena;

namespace {

ExposureField random_field(Rng& rng, int degree, int h, int w, double cs, double os) {
  ExposureField f(degree, h, w);
  for (auto& c : f.coeffs()) c = rng.uniform(-cs, cs);
  for (auto& u : f.offsets_u()) u = rng.uniform(-os, os);
  for (auto& v : f.offsets_v()) v = rng.uniform(-os, os);
  return f;
}

}  // namespace

TEST_CASE("coefficient count is (D+1)(D+2)/2") {
  for (int d = 0; d <= 10; ++d) {
    CHECK(ExposureField::coeff_count(d) == (d + 1) * (d + 2) / 2);
    CHECK(static_cast<int>(ExposureField(d, 4, 4).coeffs().size()) ==
          (d + 1) * (d + 2) / 2);
  }
}

TEST_CASE("zero coefficients give the identity field for any offsets") {
  Rng rng(11);
  for (int d : {0, 1, 3, 10}) {
    ExposureField f(d, 6, 5);
    for (auto& u : f.offsets_u()) u = rng.uniform(-3.0, 3.0);
    for (auto& v : f.offsets_v()) v = rng.uniform(-3.0, 3.0);
    for (double t : f.eval()) CHECK(t == 1.0);
    for (double t : f.eval_log()) CHECK(t == 0.0);
  }
}

TEST_CASE("constant term scales the whole field") {
  ExposureField f(2, 4, 4);
  f.a(0, 0) = std::log(2.0);
  for (double t : f.eval()) CHECK(t == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("single linear monomial over a 3-pixel row") {
  ExposureField f(1, 1, 3);
  f.a(1, 0) = 1.0;  // coefficient of (x+u)^1 (y+v)^0
  const auto theta = f.eval();
  CHECK(theta[0] == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(theta[1] == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(theta[2] == Catch::Approx(std::exp(1.0)).epsilon(1e-14));
}

TEST_CASE("eval_log matches the naive double-loop oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = trial % 5;
    const ExposureField f = random_field(rng, d, 8, 8, 0.4, 0.3);
    const auto fast = f.eval_log();
    const auto slow = testing::eval_log_oracle(f);
    for (size_t i = 0; i < fast.size(); ++i) {
      CHECK(testing::rel_err(fast[i], slow[i]) <= 1e-12);
    }
    const auto theta = f.eval();
    for (size_t i = 0; i < fast.size(); ++i) {
      CHECK(testing::rel_err(theta[i], std::exp(fast[i])) <= 1e-12);
    }
  }
}

TEST_CASE("positivity of the evaluated field") {
  Rng rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const ExposureField f = random_field(rng, 3, 8, 8, 0.5, 0.3);
    for (double t : f.eval()) CHECK(t > 0.0);
  }
}

TEST_CASE("divergence guard fires instead of overflowing") {
  ExposureField f(0, 4, 4);
  f.a(0, 0) = 31.0;
  try {
    (void)f.eval();
    FAIL("expected divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::divergent_field);
  }
}

TEST_CASE("backward: zero upstream and constant-polynomial cases") {
  ExposureField f(0, 4, 4);
  f.a(0, 0) = 0.7;
  const std::vector<double> zeros(f.pixel_count(), 0.0);
  const FieldGrad gz = f.backward(zeros);
  for (double g : gz.coeffs) CHECK(g == 0.0);
  for (double g : gz.u) CHECK(g == 0.0);

  std::vector<double> upstream(f.pixel_count());
  Rng rng(3);
  double sum = 0.0;
  for (auto& u : upstream) {
    u = rng.uniform(-1.0, 1.0);
    sum += u;
  }
  const FieldGrad g = f.backward(upstream);
  CHECK(g.coeffs[0] == Catch::Approx(sum).epsilon(1e-14));
  for (double x : g.u) CHECK(x == 0.0);  // constant polynomial has no slope
  for (double x : g.v) CHECK(x == 0.0);
}

TEST_CASE("backward rejects mismatched upstream shapes") {
  ExposureField f(1, 4, 4);
  CHECK_THROWS_AS(f.backward(std::vector<double>(7, 0.0)), Error);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(41);
  double worst = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    for (int d = 0; d <= 3; ++d) {
      const ExposureField f = random_field(rng, d, 8, 8, 0.3, 0.2);
      std::vector<double> upstream(f.pixel_count());
      for (auto& u : upstream) u = rng.uniform(-1.0, 1.0);
      const FieldGrad g = f.backward(upstream);
      auto loss = [&](const ExposureField& field) {
        const auto lt = field.eval_log();
        double v = 0.0;
        for (size_t i = 0; i < lt.size(); ++i) v += upstream[i] * lt[i];
        return v;
      };
      const double h = 1e-4;
      for (size_t i = 0; i < f.coeffs().size(); ++i) {
        ExposureField lo = f, hi = f;
        lo.coeffs()[i] -= h;
        hi.coeffs()[i] += h;
        const double fd = (loss(hi) - loss(lo)) / (2 * h);
        worst = std::max(worst, testing::rel_err(g.coeffs[i], fd));
      }
      for (size_t i = 0; i < f.pixel_count(); i += 11) {
        ExposureField lo = f, hi = f;
        lo.offsets_u()[i] -= h;
        hi.offsets_u()[i] += h;
        const double fd = (loss(hi) - loss(lo)) / (2 * h);
        worst = std::max(worst, testing::rel_err(g.u[i], fd));
      }
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("tv energy of hand-enumerable offsets") {
  ExposureField constant(1, 5, 5);
  for (auto& u : constant.offsets_u()) u = 3.25;
  CHECK(constant.tv_energy().energy == 0.0);

  // u equal to the column index on a 2x2 grid: two horizontal unit steps.
  ExposureField ramp(1, 2, 2);
  ramp.offsets_u() = {0.0, 1.0, 0.0, 1.0};
  CHECK(ramp.tv_energy().energy == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("tv gradient matches finite differences") {
  Rng rng(55);
  ExposureField f(1, 8, 8);
  for (auto& u : f.offsets_u()) u = rng.uniform(-0.5, 0.5);
  for (auto& v : f.offsets_v()) v = rng.uniform(-0.5, 0.5);
  const TvResult tv = f.tv_energy();
  const double h = 1e-6;
  for (size_t i = 0; i < f.pixel_count(); i += 3) {
    ExposureField lo = f, hi = f;
    lo.offsets_v()[i] -= h;
    hi.offsets_v()[i] += h;
    const double fd = (hi.tv_energy().energy - lo.tv_energy().energy) / (2 * h);
    CHECK(testing::rel_err(tv.grad_v[i], fd) <= 1e-6);
  }
}

TEST_CASE("serialization round-trips exactly") {
  Rng rng(77);
  const ExposureField f = random_field(rng, 3, 5, 6, 0.7, 0.4);
  const ExposureField back = ExposureField::deserialize(f.serialize());
  CHECK(back.degree() == f.degree());
  CHECK(back.height() == f.height());
  CHECK(back.width() == f.width());
  CHECK(back.coeffs() == f.coeffs());
  CHECK(back.offsets_u() == f.offsets_u());
  CHECK(back.offsets_v() == f.offsets_v());
}
