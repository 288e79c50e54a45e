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
//
// Central finite-difference verification of every analytic gradient in the
// library. The full-objective cases sample a fixed random subset of the
// per-pixel parameters (checking all of them would cost millions of objective
// evaluations); coefficients are always checked exhaustively. Everything is
// seeded, so a passing suite passes forever.

#ifndef JADENA_GRADCHECK_HPP_
#define JADENA_GRADCHECK_HPP_

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "jadena/attack.hpp"
#include "jadena/conv_stack.hpp"
#include "jadena/exposure_field.hpp"
#include "jadena/objective.hpp"
#include "jadena/raster.hpp"
#include "jadena/rng.hpp"

namespace jadena {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  bool all_pass = true;
  double seconds = 0.0;
};

namespace gradcheck_detail {

inline double rel_err(double analytic, double fd) {
  const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-8});
  return std::abs(analytic - fd) / scale;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Random image with values comfortably inside (0,1) so the clamp after the
/// perturbation stays inactive and the objective is smooth at the probe.
inline RasterImage interior_image(Rng& rng, int h, int w) {
  RasterImage img = RasterImage::zeros(h, w);
  for (auto& v : img.data) v = rng.uniform(0.2, 0.8);
  return img;
}

inline ExposureField random_field(Rng& rng, int degree, int h, int w, double coeff_scale,
                                  double offset_scale) {
  ExposureField f(degree, h, w);
  for (auto& c : f.coeffs()) c = rng.uniform(-coeff_scale, coeff_scale);
  for (auto& u : f.offsets_u()) u = rng.uniform(-offset_scale, offset_scale);
  for (auto& v : f.offsets_v()) v = rng.uniform(-offset_scale, offset_scale);
  return f;
}

}  // namespace gradcheck_detail

/// Exposure-field backward vs finite differences on random 8x8 fields.
inline GradCheckCase check_exposure_backward(int degree, int seeds) {
  using namespace gradcheck_detail;
  GradCheckCase c{"exposure backward D=" + std::to_string(degree), 0.0, 1e-4, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(1000 + s, "gradcheck-exposure", degree));
    ExposureField field = random_field(rng, degree, 8, 8, 0.3, 0.2);
    std::vector<double> upstream(field.pixel_count());
    for (auto& u : upstream) u = rng.uniform(-1.0, 1.0);
    const FieldGrad g = field.backward(upstream);
    auto loss = [&](const ExposureField& f) {
      const auto lt = f.eval_log();
      double v = 0.0;
      for (size_t i = 0; i < lt.size(); ++i) v += upstream[i] * lt[i];
      return v;
    };
    const double h = 1e-4;
    for (size_t i = 0; i < field.coeffs().size(); ++i) {
      auto f1 = [&](double x) {
        ExposureField f = field;
        f.coeffs()[i] = x;
        return loss(f);
      };
      c.max_rel_err = std::max(
          c.max_rel_err, rel_err(g.coeffs[i], central_diff(f1, field.coeffs()[i], h)));
    }
    for (size_t i = 0; i < field.pixel_count(); i += 7) {
      auto fu = [&](double x) {
        ExposureField f = field;
        f.offsets_u()[i] = x;
        return loss(f);
      };
      auto fv = [&](double x) {
        ExposureField f = field;
        f.offsets_v()[i] = x;
        return loss(f);
      };
      c.max_rel_err = std::max(
          c.max_rel_err, rel_err(g.u[i], central_diff(fu, field.offsets_u()[i], h)));
      c.max_rel_err = std::max(
          c.max_rel_err, rel_err(g.v[i], central_diff(fv, field.offsets_v()[i], h)));
    }
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

/// Total-variation gradient vs finite differences on random 8x8 offsets.
inline GradCheckCase check_tv_gradient(int seeds) {
  using namespace gradcheck_detail;
  GradCheckCase c{"tv_energy gradient", 0.0, 1e-6, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(2000 + s, "gradcheck-tv"));
    ExposureField field = random_field(rng, 2, 8, 8, 0.0, 0.5);
    const TvResult tv = field.tv_energy();
    const double h = 1e-5;
    for (size_t i = 0; i < field.pixel_count(); i += 5) {
      auto fu = [&](double x) {
        ExposureField f = field;
        f.offsets_u()[i] = x;
        return f.tv_energy().energy;
      };
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(tv.grad_u[i], central_diff(fu, field.offsets_u()[i], h)));
    }
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

/// j_smooth gradients vs finite differences.
inline GradCheckCase check_j_smooth(int seeds) {
  using namespace gradcheck_detail;
  GradCheckCase c{"j_smooth gradient", 0.0, 1e-5, false};
  const LossWeights w{0.4, 0.7};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(3000 + s, "gradcheck-smooth"));
    ExposureField field = random_field(rng, 3, 8, 8, 0.2, 0.2);
    const SmoothResult r = j_smooth(field, w);
    const double h = 1e-5;
    for (size_t i = 0; i < field.coeffs().size(); ++i) {
      auto f1 = [&](double x) {
        ExposureField f = field;
        f.coeffs()[i] = x;
        return j_smooth(f, w).value;
      };
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(r.grad.coeffs[i], central_diff(f1, field.coeffs()[i], h)));
    }
    for (size_t i = 0; i < field.pixel_count(); i += 9) {
      auto fu = [&](double x) {
        ExposureField f = field;
        f.offsets_u()[i] = x;
        return j_smooth(f, w).value;
      };
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(r.grad.u[i], central_diff(fu, field.offsets_u()[i], h)));
    }
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

/// Extractor VJP vs finite differences on sampled input pixels.
inline GradCheckCase check_conv_backward(int seeds, int sampled_pixels) {
  using namespace gradcheck_detail;
  GradCheckCase c{"conv stack backward", 0.0, 1e-3, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(4000 + s, "gradcheck-conv"));
    const ConvStack stack =
        ConvStack::seeded(default_arch(8, 2), derive_seed(4100 + s, "w"));
    const RasterImage img = interior_image(rng, 16, 16);
    FeatureStack cot = stack.forward(img);
    for (auto& tap : cot.taps) {
      for (auto& v : tap.v) v = rng.uniform(-1.0, 1.0);
    }
    const Tensor3 g = stack.backward(img, cot);
    auto loss = [&](const RasterImage& im) {
      const FeatureStack f = stack.forward(im);
      double v = 0.0;
      for (size_t t = 0; t < f.taps.size(); ++t) {
        for (size_t i = 0; i < f.taps[t].size(); ++i) {
          v += cot.taps[t].v[i] * f.taps[t].v[i];
        }
      }
      return v;
    };
    const double h = 1e-5;
    for (int q = 0; q < sampled_pixels; ++q) {
      const size_t i =
          static_cast<size_t>(rng.next_double() * static_cast<double>(img.data.size()));
      auto f1 = [&](double x) {
        RasterImage im = img;
        im.data[i] = x;
        return loss(im);
      };
      c.max_rel_err =
          std::max(c.max_rel_err, rel_err(g.v[i], central_diff(f1, img.data[i], h)));
    }
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

/// Full-objective gradients (coefficients, offsets, noise) vs finite
/// differences at desk scale: 16x16 images, the given degree, default stack.
inline GradCheckCase check_total_objective(int degree, int seeds) {
  using namespace gradcheck_detail;
  GradCheckCase c{"total objective D=" + std::to_string(degree), 0.0, 1e-3, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(5000 + s, "gradcheck-total", degree));
    const ConvStack stack =
        ConvStack::seeded(default_arch(8, 2), derive_seed(5100 + s, "w", degree));
    const RasterImage img = interior_image(rng, 16, 16);
    ExposureField field = random_field(rng, degree, 16, 16, 0.05, 0.05);
    Tensor3 noise = Tensor3::zeros(3, 16, 16);
    for (auto& v : noise.v) v = rng.uniform(-0.02, 0.02);
    std::vector<RasterImage> refs = augment_references(img);
    std::vector<FeatureStack> ref_feats;
    for (const auto& r : refs) ref_feats.push_back(stack.forward(r));
    const LossWeights w{0.05, 0.05};

    const TotalObjective obj = total_objective(field, noise, img, ref_feats, stack, w);
    auto value = [&](const ExposureField& f, const Tensor3& n) {
      return total_objective(f, n, img, ref_feats, stack, w).report.total;
    };
    // Small step: the objective is piecewise smooth (max-pool switches, ReLU
    // corners), and a wide probe window occasionally straddles a kink.
    const double h = 1e-6;
    for (size_t i = 0; i < field.coeffs().size(); ++i) {
      auto f1 = [&](double x) {
        ExposureField f = field;
        f.coeffs()[i] = x;
        return value(f, noise);
      };
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(obj.field_grad.coeffs[i], central_diff(f1, field.coeffs()[i], h)));
    }
    for (int q = 0; q < 12; ++q) {
      const size_t i = static_cast<size_t>(rng.next_double() *
                                           static_cast<double>(field.pixel_count()));
      auto fu = [&](double x) {
        ExposureField f = field;
        f.offsets_u()[i] = x;
        return value(f, noise);
      };
      auto fv = [&](double x) {
        ExposureField f = field;
        f.offsets_v()[i] = x;
        return value(f, noise);
      };
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(obj.field_grad.u[i], central_diff(fu, field.offsets_u()[i], h)));
      c.max_rel_err = std::max(
          c.max_rel_err,
          rel_err(obj.field_grad.v[i], central_diff(fv, field.offsets_v()[i], h)));
    }
    for (int q = 0; q < 24; ++q) {
      const size_t i =
          static_cast<size_t>(rng.next_double() * static_cast<double>(noise.v.size()));
      auto f1 = [&](double x) {
        Tensor3 n = noise;
        n.v[i] = x;
        return value(field, n);
      };
      c.max_rel_err = std::max(
          c.max_rel_err, rel_err(obj.noise_grad.v[i], central_diff(f1, noise.v[i], h)));
    }
  }
  c.pass = c.max_rel_err <= c.tolerance;
  return c;
}

/// The complete suite; `emit` receives one line per case as it finishes.
inline GradCheckReport run_gradcheck(
    const std::function<void(const GradCheckCase&)>& emit = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  auto add = [&](GradCheckCase c) {
    report.all_pass = report.all_pass && c.pass;
    if (emit) emit(c);
    report.cases.push_back(std::move(c));
  };
  for (int d = 0; d <= 3; ++d) add(check_exposure_backward(d, 10));
  add(check_tv_gradient(10));
  add(check_j_smooth(10));
  add(check_conv_backward(5, 32));
  for (int d = 0; d <= 3; ++d) add(check_total_objective(d, 10));
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace jadena

#endif  // JADENA_GRADCHECK_HPP_
