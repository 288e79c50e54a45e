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
// Momentum sign-gradient ascent over (a, U, theta_n). Each parameter group
// keeps its own momentum buffer, accumulated from whole-tensor L1-normalized
// gradients; parameters move by a fixed step along the momentum sign and the
// noise is projected back onto the L-infinity ball after every update.

#ifndef JADENA_ATTACK_HPP_
#define JADENA_ATTACK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jadena/conv_stack.hpp"
#include "jadena/error.hpp"
#include "jadena/exposure_field.hpp"
#include "jadena/objective.hpp"
#include "jadena/raster.hpp"
#include "jadena/rng.hpp"

namespace jadena {

enum class Variant { single, group, augment };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::single: return "single";
    case Variant::group: return "group";
    case Variant::augment: return "augment";
  }
  return "?";
}

struct AttackConfig {
  Variant variant = Variant::augment;
  int iterations = 20;
  double alpha_a = 0.1;
  double alpha_u = 0.01;
  double alpha_n = 1.0 / 255.0;
  double epsilon = 16.0 / 255.0;  // noise bound, [0,1] pixel units
  double mu = 1.0;                // momentum decay
  int degree = 10;
  double lambda_b = 0.01;
  double lambda_s = 0.01;
  bool enable_noise = true;
  bool enable_exposure = true;
  std::uint64_t seed = 1;

  LossWeights loss_weights() const { return {lambda_b, lambda_s}; }

  void validate() const {
    require(iterations >= 1, Errc::bad_config, "iterations must be >= 1");
    require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0,
            Errc::bad_config, "epsilon must be in [0,1]");
    require(std::isfinite(mu) && mu >= 0.0, Errc::bad_config, "mu must be >= 0");
    require(degree >= 0, Errc::bad_config, "degree must be >= 0");
    if (enable_noise) {
      require(std::isfinite(alpha_n) && alpha_n > 0.0, Errc::bad_config,
              "alpha_n must be > 0 when noise is enabled");
    }
    if (enable_exposure) {
      require(std::isfinite(alpha_a) && alpha_a > 0.0, Errc::bad_config,
              "alpha_a must be > 0 when exposure is enabled");
      require(std::isfinite(alpha_u) && alpha_u > 0.0, Errc::bad_config,
              "alpha_u must be > 0 when exposure is enabled");
    }
    LossWeights{lambda_b, lambda_s}.validate();
  }
};

struct PerturbationState {
  ExposureField field;
  Tensor3 noise;
  // momentum buffers, same shapes as their parameters
  std::vector<double> m_coeffs, m_u, m_v;
  Tensor3 m_noise;

  PerturbationState(int degree, int height, int width)
      : field(degree, height, width),
        noise(Tensor3::zeros(3, height, width)),
        m_coeffs(ExposureField::coeff_count(degree), 0.0),
        m_u(static_cast<size_t>(height) * width, 0.0),
        m_v(static_cast<size_t>(height) * width, 0.0),
        m_noise(Tensor3::zeros(3, height, width)) {}
};

/// Zero initialization: a, U, theta_n and all momentum buffers start at zero,
/// so the initial perturbation is an identity operation.
inline PerturbationState init_state(const AttackConfig& cfg, const RasterImage& img) {
  cfg.validate();
  return PerturbationState(cfg.degree, img.height, img.width);
}

inline RasterImage apply(const PerturbationState& state, const RasterImage& img) {
  return apply_perturbation(state.field, state.noise, img).image;
}

/// Reference images for the selected variant. `single` uses none, `group`
/// uses every group image except the target, `augment` uses the four
/// augmentations of the target. References that do not match the target's
/// shape (rotations of non-square images, differently sized group members)
/// are resized with nearest-neighbour; references receive no gradient, so the
/// resize needs no adjoint.
inline std::vector<RasterImage> build_reference_set(const AttackConfig& cfg,
                                                    const std::vector<RasterImage>& group,
                                                    int target_index) {
  require(target_index >= 0 && target_index < static_cast<int>(group.size()),
          Errc::bad_argument, "target index out of range");
  const RasterImage& target = group[target_index];
  std::vector<RasterImage> refs;
  switch (cfg.variant) {
    case Variant::single:
      break;
    case Variant::group:
      require(group.size() >= 2, Errc::bad_argument,
              "group variant needs at least one non-target image");
      for (int i = 0; i < static_cast<int>(group.size()); ++i) {
        if (i != target_index) refs.push_back(group[i]);
      }
      break;
    case Variant::augment:
      refs = augment_references(target);
      break;
  }
  for (auto& r : refs) {
    if (r.height != target.height || r.width != target.width) {
      r = resize_nearest(r, target.height, target.width);
    }
  }
  return refs;
}

namespace detail {

inline double l1_norm(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (double x : a) s += std::abs(x);
  for (double x : b) s += std::abs(x);
  return s;
}

inline void check_finite(const std::vector<double>& g, const char* what) {
  for (double x : g) {
    require(std::isfinite(x), Errc::internal,
            std::string("non-finite gradient in ") + what);
  }
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// m <- mu*m + g/||g||_1 (the normalization is skipped for a zero gradient),
/// then p <- p + alpha * sign(m).
inline void momentum_sign_step(std::vector<double>& p, std::vector<double>& m,
                               const std::vector<double>& g, double mu, double alpha,
                               double norm) {
  const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    m[i] = mu * m[i] + g[i] * inv;
    p[i] += alpha * sign(m[i]);
  }
}

}  // namespace detail

struct ObjectiveGrads {
  FieldGrad field;
  Tensor3 noise;
};

/// One ascent step. Disabled parameter groups are left untouched, including
/// their momentum buffers; the noise is clamped elementwise to [-eps, eps]
/// afterwards.
inline void step(PerturbationState& state, const ObjectiveGrads& grads,
                 const AttackConfig& cfg) {
  if (cfg.enable_exposure) {
    detail::check_finite(grads.field.coeffs, "exposure coefficients");
    detail::check_finite(grads.field.u, "offset map u");
    detail::check_finite(grads.field.v, "offset map v");
    std::vector<double> none;
    detail::momentum_sign_step(state.field.coeffs(), state.m_coeffs, grads.field.coeffs,
                               cfg.mu, cfg.alpha_a,
                               detail::l1_norm(grads.field.coeffs, none));
    const double norm_u = detail::l1_norm(grads.field.u, grads.field.v);
    detail::momentum_sign_step(state.field.offsets_u(), state.m_u, grads.field.u,
                               cfg.mu, cfg.alpha_u, norm_u);
    detail::momentum_sign_step(state.field.offsets_v(), state.m_v, grads.field.v,
                               cfg.mu, cfg.alpha_u, norm_u);
  }
  if (cfg.enable_noise) {
    detail::check_finite(grads.noise.v, "noise");
    std::vector<double> none;
    detail::momentum_sign_step(state.noise.v, state.m_noise.v, grads.noise.v, cfg.mu,
                               cfg.alpha_n, detail::l1_norm(grads.noise.v, none));
    for (auto& x : state.noise.v) x = std::clamp(x, -cfg.epsilon, cfg.epsilon);
  }
}

struct TraceEntry {
  int iter = 0;
  double j_contrast = 0.0;
  double j_smooth = 0.0;
  double total = 0.0;
  double max_abs_noise = 0.0;
  double max_abs_log_exposure = 0.0;
};

struct AttackResult {
  RasterImage adversarial;
  std::vector<TraceEntry> trace;
  PerturbationState state;
};

/// Run the full optimization. Trace row i describes the state entering
/// iteration i; the adversarial image is the clamped application of the
/// final state. A diverging exposure field aborts with the iteration index.
inline AttackResult run_attack(const AttackConfig& cfg, const ConvStack& stack,
                               const RasterImage& img,
                               const std::vector<RasterImage>& references) {
  cfg.validate();
  check_image(img);
  // References are constants, so their features are computed once.
  std::vector<FeatureStack> ref_features;
  ref_features.reserve(references.size());
  for (const auto& ref : references) ref_features.push_back(stack.forward(ref));

  AttackResult result{RasterImage{}, {}, init_state(cfg, img)};
  PerturbationState& state = result.state;
  const LossWeights w = cfg.loss_weights();
  for (int it = 0; it < cfg.iterations; ++it) {
    TotalObjective obj;
    try {
      obj = total_objective(state.field, state.noise, img, ref_features, stack, w);
    } catch (const Error& e) {
      if (e.code() == Errc::divergent_field) {
        fail(Errc::divergent_field,
             "exposure diverged at iteration " + std::to_string(it) + ": " + e.what());
      }
      throw;
    }
    TraceEntry t;
    t.iter = it;
    t.j_contrast = obj.report.j_contrast;
    t.j_smooth = obj.report.j_smooth;
    t.total = obj.report.total;
    for (double x : state.noise.v) t.max_abs_noise = std::max(t.max_abs_noise, std::abs(x));
    const auto log_theta = state.field.eval_log();
    for (double x : log_theta) {
      t.max_abs_log_exposure = std::max(t.max_abs_log_exposure, std::abs(x));
    }
    result.trace.push_back(t);
    step(state, {obj.field_grad, obj.noise_grad}, cfg);
  }
  try {
    result.adversarial = apply(state, img);
  } catch (const Error& e) {
    if (e.code() == Errc::divergent_field) {
      fail(Errc::divergent_field,
           "exposure diverged at iteration " + std::to_string(cfg.iterations) + ": " +
               e.what());
    }
    throw;
  }
  return result;
}

/// Unoptimized baseline: independent uniform noise in (-eps, eps) per pixel
/// and channel, added and clamped. Deterministic per seed.
inline RasterImage random_noise_baseline(const RasterImage& img, double eps_u,
                                         std::uint64_t seed) {
  require(eps_u >= 0.0 && eps_u <= 1.0, Errc::bad_argument,
          "noise amplitude must be in [0,1]");
  Rng rng(seed);
  RasterImage out = img;
  for (auto& v : out.data) {
    v = std::clamp(v + rng.uniform(-eps_u, eps_u), 0.0, 1.0);
  }
  return out;
}

}  // namespace jadena

#endif  // JADENA_ATTACK_HPP_
