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
// Attack losses. The contrast loss is the negated average (over taps) of the
// per-channel population standard deviation of feature maps, either of the
// perturbed image alone or of the spliced feature block of the perturbed
// image plus its references. The smoothness loss penalizes the exposure
// field's log magnitude and the total variation of its offset map.

#ifndef JADENA_OBJECTIVE_HPP_
#define JADENA_OBJECTIVE_HPP_

#include <cmath>
#include <vector>

#include "jadena/conv_stack.hpp"
#include "jadena/error.hpp"
#include "jadena/exposure_field.hpp"
#include "jadena/raster.hpp"

namespace jadena {

struct LossWeights {
  double lambda_b = 0.01;  // weight of the squared-log exposure penalty
  double lambda_s = 0.01;  // weight of the offset-map total variation

  void validate() const {
    require(std::isfinite(lambda_b) && lambda_b >= 0.0 && std::isfinite(lambda_s) &&
                lambda_s >= 0.0,
            Errc::bad_config, "loss weights must be finite and >= 0");
  }
};

struct ObjectiveReport {
  double j_contrast = 0.0;
  double j_smooth = 0.0;
  double total = 0.0;
  std::vector<double> tap_std_means;  // per-tap channel-std averages
};

struct ChannelStdResult {
  std::vector<double> per_tap;  // average channel std per tap
  double mean = 0.0;            // arithmetic mean over taps
};

namespace detail {

struct ChannelMoments {
  double mean = 0.0;
  double stddev = 0.0;  // population std (divide by element count)
};

inline ChannelMoments channel_moments(const Tensor3& t, int c) {
  const size_t n = static_cast<size_t>(t.height) * t.width;
  const double* p = &t.v[static_cast<size_t>(c) * n];
  // A constant channel has exactly zero deviation; short-circuiting keeps the
  // std == 0 corner (and its zero subgradient) exact instead of epsilon-sized.
  bool constant = true;
  for (size_t i = 1; i < n && constant; ++i) constant = (p[i] == p[0]);
  ChannelMoments m;
  if (constant) {
    m.mean = p[0];
    m.stddev = 0.0;
    return m;
  }
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += p[i];
  const double mean = s / static_cast<double>(n);
  double q = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = p[i] - mean;
    q += d * d;
  }
  m.mean = mean;
  m.stddev = std::sqrt(q / static_cast<double>(n));
  return m;
}

}  // namespace detail

/// Per tap: the mean over channels of the population standard deviation of
/// each channel over spatial positions; plus the plain average across taps.
inline ChannelStdResult channel_std_mean(const FeatureStack& features) {
  require(!features.taps.empty(), Errc::empty_input, "feature stack has no taps");
  ChannelStdResult r;
  r.per_tap.reserve(features.taps.size());
  for (const auto& tap : features.taps) {
    require(static_cast<size_t>(tap.height) * tap.width >= 2, Errc::bad_argument,
            "tap with fewer than 2 spatial elements is degenerate");
    double acc = 0.0;
    for (int c = 0; c < tap.channels; ++c) {
      acc += detail::channel_moments(tap, c).stddev;
    }
    r.per_tap.push_back(acc / tap.channels);
  }
  double s = 0.0;
  for (double v : r.per_tap) s += v;
  r.mean = s / static_cast<double>(r.per_tap.size());
  return r;
}

namespace detail {

/// Cotangent of `upstream * channel_std_mean(features).mean` with respect to
/// the features. d std/dx_i = (x_i - mean) / (N * std); the subgradient at a
/// constant channel (std == 0) is taken as zero.
inline FeatureStack channel_std_mean_backward(const FeatureStack& features,
                                              double upstream) {
  FeatureStack grads;
  grads.taps.reserve(features.taps.size());
  const double tap_scale = upstream / static_cast<double>(features.taps.size());
  for (const auto& tap : features.taps) {
    Tensor3 g = Tensor3::zeros(tap.channels, tap.height, tap.width);
    const size_t n = static_cast<size_t>(tap.height) * tap.width;
    const double chan_scale = tap_scale / tap.channels;
    for (int c = 0; c < tap.channels; ++c) {
      const ChannelMoments m = channel_moments(tap, c);
      if (m.stddev == 0.0) continue;
      const double k = chan_scale / (static_cast<double>(n) * m.stddev);
      const double* src = &tap.v[static_cast<size_t>(c) * n];
      double* dst = &g.v[static_cast<size_t>(c) * n];
      for (size_t i = 0; i < n; ++i) dst[i] = k * (src[i] - m.mean);
    }
    grads.taps.push_back(std::move(g));
  }
  return grads;
}

/// Restrict a spliced-tensor cotangent to block `block` of `n_blocks`.
inline FeatureStack take_splice_block(const FeatureStack& spliced_grads, int block,
                                      int n_blocks) {
  FeatureStack out;
  out.taps.reserve(spliced_grads.taps.size());
  for (const auto& g : spliced_grads.taps) {
    const int h = g.height / n_blocks;
    Tensor3 t = Tensor3::zeros(g.channels, h, g.width);
    for (int c = 0; c < g.channels; ++c) {
      for (int y = 0; y < h; ++y) {
        const size_t src_off =
            (static_cast<size_t>(c) * g.height + block * h + y) * g.width;
        std::memcpy(&t.at(c, y, 0), &g.v[src_off], sizeof(double) * g.width);
      }
    }
    out.taps.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

struct ContrastResult {
  double value = 0.0;            // <= 0
  Tensor3 image_grad;            // gradient on the (perturbed) input image
  std::vector<double> per_tap;   // channel-std averages entering the loss
};

/// Single-image contrast loss: -avg over taps of channel-std averages.
inline ContrastResult j_cons(const RasterImage& img_adv, const ConvStack& stack) {
  const FeatureStack feats = stack.forward(img_adv);
  const ChannelStdResult stds = channel_std_mean(feats);
  ContrastResult r;
  r.value = -stds.mean;
  r.per_tap = stds.per_tap;
  const FeatureStack cot = detail::channel_std_mean_backward(feats, -1.0);
  r.image_grad = stack.backward(img_adv, cot);
  return r;
}

/// Group contrast loss over the spliced features of the perturbed image and
/// its (constant) references; the gradient flows only into the perturbed
/// image's block. With no references this reduces exactly to j_cons.
inline ContrastResult j_co_cons_cached(const RasterImage& img_adv,
                                       const std::vector<FeatureStack>& ref_features,
                                       const ConvStack& stack) {
  const FeatureStack own = stack.forward(img_adv);
  std::vector<FeatureStack> all;
  all.reserve(1 + ref_features.size());
  all.push_back(own);
  for (const auto& f : ref_features) all.push_back(f);
  const FeatureStack spliced = splice(all);
  const ChannelStdResult stds = channel_std_mean(spliced);
  ContrastResult r;
  r.value = -stds.mean;
  r.per_tap = stds.per_tap;
  const FeatureStack spliced_cot = detail::channel_std_mean_backward(spliced, -1.0);
  const FeatureStack own_cot =
      detail::take_splice_block(spliced_cot, 0, static_cast<int>(all.size()));
  r.image_grad = stack.backward(img_adv, own_cot);
  return r;
}

inline ContrastResult j_co_cons(const RasterImage& img_adv,
                                const std::vector<RasterImage>& references,
                                const ConvStack& stack) {
  std::vector<FeatureStack> ref_features;
  ref_features.reserve(references.size());
  for (const auto& ref : references) ref_features.push_back(stack.forward(ref));
  return j_co_cons_cached(img_adv, ref_features, stack);
}

struct SmoothResult {
  double value = 0.0;  // <= 0
  FieldGrad grad;
};

/// J_smooth = -lambda_b * ||log theta_e||^2 - lambda_s * ||grad U||^2,
/// with analytic gradients on the coefficients and the offset map.
inline SmoothResult j_smooth(const ExposureField& field, const LossWeights& w) {
  w.validate();
  SmoothResult r;
  const std::vector<double> log_theta = field.eval_log();
  double sq = 0.0;
  std::vector<double> upstream(log_theta.size());
  for (size_t i = 0; i < log_theta.size(); ++i) {
    sq += log_theta[i] * log_theta[i];
    upstream[i] = -2.0 * w.lambda_b * log_theta[i];
  }
  const TvResult tv = field.tv_energy();
  r.value = -w.lambda_b * sq - w.lambda_s * tv.energy;
  r.grad = field.backward(upstream);
  for (size_t i = 0; i < r.grad.u.size(); ++i) {
    r.grad.u[i] -= w.lambda_s * tv.grad_u[i];
    r.grad.v[i] -= w.lambda_s * tv.grad_v[i];
  }
  return r;
}

/// Result of applying theta_e * I + theta_n with a final clamp to [0,1].
struct PerturbResult {
  RasterImage image;
  std::vector<double> log_theta;   // per pixel
  std::vector<double> theta;       // per pixel, exp(log_theta)
  std::vector<std::uint8_t> active;  // per pixel-channel: 1 iff not clamped
};

inline PerturbResult apply_perturbation(const ExposureField& field,
                                        const Tensor3& noise,
                                        const RasterImage& img) {
  require(field.height() == img.height && field.width() == img.width,
          Errc::shape_mismatch, "exposure field does not match image shape");
  require(noise.channels == 3 && noise.height == img.height &&
              noise.width == img.width,
          Errc::shape_mismatch, "noise does not match image shape");
  PerturbResult r;
  r.log_theta = field.eval_log();
  r.theta.resize(r.log_theta.size());
  for (size_t i = 0; i < r.log_theta.size(); ++i) {
    require(std::isfinite(r.log_theta[i]) &&
                std::abs(r.log_theta[i]) <= kMaxAbsLogExposure,
            Errc::divergent_field, "exposure field diverged (|log theta| > 30)");
    r.theta[i] = std::exp(r.log_theta[i]);
  }
  const size_t n = img.pixel_count();
  r.image = RasterImage::zeros(img.height, img.width);
  r.active.assign(3 * n, 0);
  for (int c = 0; c < 3; ++c) {
    for (size_t p = 0; p < n; ++p) {
      const size_t i = c * n + p;
      const double raw = r.theta[p] * img.data[i] + noise.v[i];
      // Pixels clamped at 0 or 1 receive zero gradient (exact subgradient of
      // the clamped composition, not straight-through).
      r.active[i] = (raw > 0.0 && raw < 1.0) ? 1 : 0;
      r.image.data[i] = std::clamp(raw, 0.0, 1.0);
    }
  }
  return r;
}

struct TotalObjective {
  ObjectiveReport report;
  FieldGrad field_grad;
  Tensor3 noise_grad;
};

/// Full objective of the joint attack: the selected contrast loss of the
/// perturbed image plus J_smooth, with gradients for all three parameter
/// groups. `ref_features` is empty for the single variant.
inline TotalObjective total_objective(const ExposureField& field, const Tensor3& noise,
                                      const RasterImage& img,
                                      const std::vector<FeatureStack>& ref_features,
                                      const ConvStack& stack, const LossWeights& w) {
  TotalObjective out;
  const PerturbResult pert = apply_perturbation(field, noise, img);
  const ContrastResult contrast =
      ref_features.empty() ? j_cons(pert.image, stack)
                           : j_co_cons_cached(pert.image, ref_features, stack);

  const size_t n = img.pixel_count();
  out.noise_grad = Tensor3::zeros(3, img.height, img.width);
  std::vector<double> upstream_log_theta(n, 0.0);
  for (int c = 0; c < 3; ++c) {
    for (size_t p = 0; p < n; ++p) {
      const size_t i = c * n + p;
      const double gated =
          pert.active[i] ? contrast.image_grad.v[i] : 0.0;
      out.noise_grad.v[i] = gated;
      upstream_log_theta[p] += gated * pert.theta[p] * img.data[i];
    }
  }
  out.field_grad = field.backward(upstream_log_theta);

  const SmoothResult smooth = j_smooth(field, w);
  out.field_grad.add_scaled(smooth.grad, 1.0);

  out.report.j_contrast = contrast.value;
  out.report.j_smooth = smooth.value;
  out.report.total = contrast.value + smooth.value;
  out.report.tap_std_means = contrast.per_tap;
  return out;
}

}  // namespace jadena

#endif  // JADENA_OBJECTIVE_HPP_
