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
// Built-in cluster-based co-saliency detector. All images of a group are
// clustered jointly in a 5-dim color+position feature space; each cluster is
// scored by a color-contrast cue, a center-prior cue and a cross-image
// correspondence cue, and pixel saliency is the product of its cluster's
// cues, min-max normalized per image.
//
// The detector is deterministic, and deliberately structured so that
// permuting the group order permutes the outputs bit-exactly: the seeded
// farthest-point initialization breaks ties on feature values (never on
// scan order across images), and every accumulation across images combines
// per-image partial sums in sorted order.

#ifndef JADENA_CODETECTOR_HPP_
#define JADENA_CODETECTOR_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "jadena/error.hpp"
#include "jadena/metrics.hpp"
#include "jadena/raster.hpp"
#include "jadena/rng.hpp"

namespace jadena {

struct DetectorConfig {
  int clusters = 8;
  int iterations = 20;
  std::uint64_t seed = 1;

  void validate() const {
    require(clusters >= 2, Errc::bad_config, "detector needs at least 2 clusters");
    require(iterations >= 1, Errc::bad_config, "detector needs at least 1 iteration");
  }
};

namespace codet_detail {

using Feature = std::array<double, 5>;  // r, g, b, 0.3*x, 0.3*y

inline constexpr double kCoordWeight = 0.3;
inline constexpr double kSpatialSigma = 0.25;  // of the [0,1] coordinate frame

inline double dist2(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double color_dist(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Sum a handful of per-image partials in value order, so the result does not
/// depend on the order the images were given in.
inline double sorted_sum(std::vector<double> parts) {
  std::sort(parts.begin(), parts.end());
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

struct PointSet {
  std::vector<Feature> features;      // concatenated over images
  std::vector<int> image_of;          // image index per point
  std::vector<double> center_dist;    // normalized distance to own image center
  std::vector<size_t> image_offset;   // first point index per image
  std::vector<size_t> image_size;     // pixel count per image
};

inline PointSet build_points(const std::vector<RasterImage>& group) {
  PointSet ps;
  size_t total = 0;
  for (const auto& img : group) total += img.pixel_count();
  ps.features.reserve(total);
  ps.image_of.reserve(total);
  ps.center_dist.reserve(total);
  for (int i = 0; i < static_cast<int>(group.size()); ++i) {
    const RasterImage& img = group[i];
    ps.image_offset.push_back(ps.features.size());
    ps.image_size.push_back(img.pixel_count());
    const size_t n = img.pixel_count();
    for (int y = 0; y < img.height; ++y) {
      const double cy = img.height > 1 ? static_cast<double>(y) / (img.height - 1) : 0.5;
      for (int x = 0; x < img.width; ++x) {
        const double cx = img.width > 1 ? static_cast<double>(x) / (img.width - 1) : 0.5;
        const size_t p = static_cast<size_t>(y) * img.width + x;
        Feature f{img.data[0 * n + p], img.data[1 * n + p], img.data[2 * n + p],
                  kCoordWeight * cx, kCoordWeight * cy};
        ps.features.push_back(f);
        ps.image_of.push_back(i);
        ps.center_dist.push_back(std::hypot(cx - 0.5, cy - 0.5));
      }
    }
  }
  return ps;
}

/// Seeded farthest-point initialization. The seed picks a probe location in
/// feature space; the first center is the point closest to the probe and each
/// further center is the point farthest from its nearest chosen center. All
/// ties are broken on lexicographic feature order, which keeps the choice
/// independent of the group ordering.
inline std::vector<Feature> init_centers(const PointSet& ps, int k, std::uint64_t seed) {
  Rng rng(seed);
  Feature probe;
  for (int i = 0; i < 3; ++i) probe[i] = rng.next_double();
  for (int i = 3; i < 5; ++i) probe[i] = kCoordWeight * rng.next_double();

  std::vector<Feature> centers;
  centers.reserve(k);
  {
    size_t best = 0;
    double best_d = dist2(ps.features[0], probe);
    for (size_t i = 1; i < ps.features.size(); ++i) {
      const double d = dist2(ps.features[i], probe);
      if (d < best_d || (d == best_d && ps.features[i] < ps.features[best])) {
        best = i;
        best_d = d;
      }
    }
    centers.push_back(ps.features[best]);
  }
  std::vector<double> min_d(ps.features.size());
  for (size_t i = 0; i < ps.features.size(); ++i) {
    min_d[i] = dist2(ps.features[i], centers[0]);
  }
  while (static_cast<int>(centers.size()) < k) {
    size_t best = 0;
    for (size_t i = 1; i < ps.features.size(); ++i) {
      if (min_d[i] > min_d[best] ||
          (min_d[i] == min_d[best] && ps.features[i] < ps.features[best])) {
        best = i;
      }
    }
    centers.push_back(ps.features[best]);
    for (size_t i = 0; i < ps.features.size(); ++i) {
      min_d[i] = std::min(min_d[i], dist2(ps.features[i], centers.back()));
    }
  }
  return centers;
}

}  // namespace codet_detail

/// Joint cluster-based co-saliency detection; one map per input image,
/// values in [0,1]. A degenerate group whose pixels are all identical yields
/// uniform 0.5 maps.
inline std::vector<SaliencyMap> detect_group(const DetectorConfig& cfg,
                                             const std::vector<RasterImage>& group) {
  using namespace codet_detail;
  cfg.validate();
  require(!group.empty(), Errc::empty_input, "detector needs at least one image");
  for (const auto& img : group) check_image(img);

  const PointSet ps = build_points(group);
  const size_t n_points = ps.features.size();
  const int n_images = static_cast<int>(group.size());
  const int k = cfg.clusters;

  // Degenerate rule: if every pixel of the group has the same color there is
  // nothing to contrast; return flat 0.5 maps.
  bool degenerate = true;
  for (size_t i = 1; i < n_points && degenerate; ++i) {
    degenerate = ps.features[i][0] == ps.features[0][0] &&
                 ps.features[i][1] == ps.features[0][1] &&
                 ps.features[i][2] == ps.features[0][2];
  }
  auto uniform_maps = [&] {
    std::vector<SaliencyMap> maps;
    for (const auto& img : group) {
      maps.push_back(SaliencyMap::filled(img.height, img.width, 0.5));
    }
    return maps;
  };
  if (degenerate) return uniform_maps();

  std::vector<Feature> centers = init_centers(ps, k, cfg.seed);
  std::vector<int> assign(n_points, 0);

  double prev_objective = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.iterations; ++it) {
    // assignment: nearest center, lowest index on ties
    for (size_t i = 0; i < n_points; ++i) {
      int best = 0;
      double best_d = dist2(ps.features[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = dist2(ps.features[i], centers[c]);
        if (d < best_d) {
          best = c;
          best_d = d;
        }
      }
      assign[i] = best;
    }
    // objective (for the monotonicity check), combined order-independently
    std::vector<double> obj_parts(n_images, 0.0);
    for (size_t i = 0; i < n_points; ++i) {
      obj_parts[ps.image_of[i]] += dist2(ps.features[i], centers[assign[i]]);
    }
    const double objective = sorted_sum(obj_parts);
    require(objective <= prev_objective + 1e-9 * (1.0 + std::abs(prev_objective)),
            Errc::internal, "k-means objective increased");
    prev_objective = objective;

    // update: per-image partial sums, folded in sorted order; empty clusters
    // keep their center
    std::vector<std::vector<double>> part_sum(
        static_cast<size_t>(k) * 5, std::vector<double>(n_images, 0.0));
    std::vector<std::vector<double>> part_cnt(k, std::vector<double>(n_images, 0.0));
    for (size_t i = 0; i < n_points; ++i) {
      const int c = assign[i];
      const int im = ps.image_of[i];
      for (int d = 0; d < 5; ++d) part_sum[c * 5 + d][im] += ps.features[i][d];
      part_cnt[c][im] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      const double cnt = sorted_sum(part_cnt[c]);
      if (cnt == 0.0) continue;
      for (int d = 0; d < 5; ++d) {
        centers[c][d] = sorted_sum(part_sum[c * 5 + d]) / cnt;
      }
    }
  }
  // final assignment against the last centers
  for (size_t i = 0; i < n_points; ++i) {
    int best = 0;
    double best_d = dist2(ps.features[i], centers[0]);
    for (int c = 1; c < k; ++c) {
      const double d = dist2(ps.features[i], centers[c]);
      if (d < best_d) {
        best = c;
        best_d = d;
      }
    }
    assign[i] = best;
  }

  // contrast cue: mean color distance of the center to all other centers, /max
  std::vector<double> contrast(k, 0.0);
  for (int c = 0; c < k; ++c) {
    std::vector<double> d;
    d.reserve(k - 1);
    for (int o = 0; o < k; ++o) {
      if (o != c) d.push_back(color_dist(centers[c], centers[o]));
    }
    contrast[c] = sorted_sum(d) / std::max(1, k - 1);
  }
  const double max_contrast = *std::max_element(contrast.begin(), contrast.end());
  if (max_contrast > 0.0) {
    for (auto& v : contrast) v /= max_contrast;
  }

  // spatial: a Gaussian prior on the mean distance of member pixels to their
  // image center
  std::vector<double> spatial(k, 1.0);
  {
    std::vector<std::vector<double>> dist_parts(k, std::vector<double>(n_images, 0.0));
    std::vector<std::vector<double>> cnt_parts(k, std::vector<double>(n_images, 0.0));
    for (size_t i = 0; i < n_points; ++i) {
      dist_parts[assign[i]][ps.image_of[i]] += ps.center_dist[i];
      cnt_parts[assign[i]][ps.image_of[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      const double cnt = sorted_sum(cnt_parts[c]);
      if (cnt == 0.0) continue;
      const double rho = sorted_sum(dist_parts[c]) / cnt;
      spatial[c] = std::exp(-(rho * rho) / (2.0 * kSpatialSigma * kSpatialSigma));
    }
  }

  // correspondence: 1 - normalized variance of the occupancy ratio across
  // images, where the variance is first made scale-free by dividing by the
  // squared mean occupancy
  std::vector<double> correspondence(k, 1.0);
  {
    std::vector<std::vector<double>> occ(k, std::vector<double>(n_images, 0.0));
    for (size_t i = 0; i < n_points; ++i) occ[assign[i]][ps.image_of[i]] += 1.0;
    std::vector<double> nvar(k, 0.0);
    for (int c = 0; c < k; ++c) {
      std::vector<double> ratios(n_images);
      for (int i = 0; i < n_images; ++i) {
        ratios[i] = occ[c][i] / static_cast<double>(ps.image_size[i]);
      }
      std::sort(ratios.begin(), ratios.end());
      double mean = 0.0;
      for (double r : ratios) mean += r;
      mean /= n_images;
      double var = 0.0;
      for (double r : ratios) var += (r - mean) * (r - mean);
      var /= n_images;
      nvar[c] = var / (mean * mean + 1e-12);
    }
    const double max_nvar = *std::max_element(nvar.begin(), nvar.end());
    if (max_nvar > 0.0) {
      for (int c = 0; c < k; ++c) correspondence[c] = 1.0 - nvar[c] / max_nvar;
    }
  }

  std::vector<double> cluster_saliency(k);
  for (int c = 0; c < k; ++c) {
    cluster_saliency[c] = contrast[c] * spatial[c] * correspondence[c];
  }

  // pixel saliency + per-image min-max normalization
  std::vector<SaliencyMap> maps;
  maps.reserve(n_images);
  for (int i = 0; i < n_images; ++i) {
    const RasterImage& img = group[i];
    SaliencyMap m = SaliencyMap::filled(img.height, img.width, 0.0);
    const size_t off = ps.image_offset[i];
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t p = 0; p < ps.image_size[i]; ++p) {
      const double v = cluster_saliency[assign[off + p]];
      m.data[p] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > 0.0) {
      for (auto& v : m.data) v = (v - lo) / (hi - lo);
    } else {
      for (auto& v : m.data) v = 0.5;
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

/// Detector-output binarization; shared rule with the F-measure.
inline BinaryMask binarize(const SaliencyMap& map) { return binarize_adaptive(map); }

}  // namespace jadena

#endif  // JADENA_CODETECTOR_HPP_
