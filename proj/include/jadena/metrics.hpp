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
// Saliency evaluation suite: IoU-based success rate, average precision over a
// 256-threshold precision-recall sweep, adaptive-threshold F-measure with
// beta^2 = 0.3, and mean absolute error.

#ifndef JADENA_METRICS_HPP_
#define JADENA_METRICS_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "jadena/error.hpp"
#include "jadena/raster.hpp"

namespace jadena {

inline constexpr double kFBetaSquared = 0.3;

/// Adaptive binarization at threshold min(2*mean, 0.95); values equal to the
/// threshold go to 0. This rule is shared by the detector output binarizer
/// and the F-measure, and is part of the evaluation contract.
inline BinaryMask binarize_adaptive(const SaliencyMap& map) {
  require(!map.data.empty(), Errc::empty_input, "cannot binarize an empty map");
  double mean = 0.0;
  for (double v : map.data) mean += v;
  mean /= static_cast<double>(map.data.size());
  const double threshold = std::min(2.0 * mean, 0.95);
  BinaryMask out = BinaryMask::zeros(map.height, map.width);
  for (size_t i = 0; i < map.data.size(); ++i) {
    out.data[i] = (map.data[i] > threshold) ? 1 : 0;
  }
  return out;
}

/// Intersection over union; an empty union counts as perfect agreement (1).
inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
  require(pred.height == gt.height && pred.width == gt.width, Errc::shape_mismatch,
          "mask shapes differ");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    inter += (pred.data[i] & gt.data[i]);
    uni += (pred.data[i] | gt.data[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct EvalRecord {
  double iou = 0.0;
  bool success = false;  // attack success: iou < 0.5
  double ap = 0.0;
  double f_beta = 0.0;
  double mae = 0.0;
};

/// Fraction of records whose IoU is below 0.5.
inline double success_rate(const std::vector<EvalRecord>& records) {
  require(!records.empty(), Errc::empty_input, "success rate of an empty list");
  size_t n = 0;
  for (const auto& r : records) n += (r.iou < 0.5) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(records.size());
}

/// Area under the precision-recall curve swept over the 256 thresholds
/// t = k/255, k = 0..255, binarizing at pred >= t. Precision is defined as 1
/// when nothing is predicted positive. Points are traversed from the highest
/// threshold down (recall is non-decreasing along that order), anchored at
/// (recall 0, precision at the highest threshold), and integrated with the
/// trapezoidal rule.
inline double average_precision(const SaliencyMap& pred, const BinaryMask& gt) {
  require(pred.height == gt.height && pred.width == gt.width, Errc::shape_mismatch,
          "prediction and ground truth shapes differ");
  size_t gt_pos = gt.area();
  require(gt_pos > 0, Errc::empty_input, "average precision needs a nonempty ground truth");

  double area = 0.0;
  double prev_recall = 0.0, prev_precision = 0.0;
  bool have_prev = false;
  for (int k = 255; k >= 0; --k) {
    const double t = static_cast<double>(k) / 255.0;
    size_t pos = 0, tp = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
      if (pred.data[i] >= t) {
        ++pos;
        tp += gt.data[i];
      }
    }
    const double precision =
        pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pos);
    const double recall = static_cast<double>(tp) / static_cast<double>(gt_pos);
    if (!have_prev) {
      // anchor: (recall 0, precision at the highest threshold)
      prev_recall = 0.0;
      prev_precision = precision;
      have_prev = true;
    }
    area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
  }
  return area;
}

/// F_beta with beta^2 = 0.3 on the adaptively binarized prediction; defined
/// as 0 when precision + recall vanishes.
inline double f_beta(const SaliencyMap& pred, const BinaryMask& gt) {
  require(pred.height == gt.height && pred.width == gt.width, Errc::shape_mismatch,
          "prediction and ground truth shapes differ");
  require(gt.area() > 0, Errc::empty_input, "F-measure needs a nonempty ground truth");
  const BinaryMask bin = binarize_adaptive(pred);
  size_t tp = 0, pos = 0;
  for (size_t i = 0; i < bin.data.size(); ++i) {
    pos += bin.data[i];
    tp += (bin.data[i] & gt.data[i]);
  }
  const double precision = pos == 0 ? 0.0 : static_cast<double>(tp) / pos;
  const double recall = static_cast<double>(tp) / static_cast<double>(gt.area());
  if (precision + recall == 0.0) return 0.0;
  return (1.0 + kFBetaSquared) * precision * recall /
         (kFBetaSquared * precision + recall);
}

inline double mae(const SaliencyMap& pred, const BinaryMask& gt) {
  require(pred.height == gt.height && pred.width == gt.width, Errc::shape_mismatch,
          "prediction and ground truth shapes differ");
  double s = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    s += std::abs(pred.data[i] - static_cast<double>(gt.data[i]));
  }
  return s / static_cast<double>(pred.data.size());
}

/// One evaluation of a continuous prediction against its ground truth. IoU
/// uses the shared adaptive binarization rule.
inline EvalRecord evaluate(const SaliencyMap& pred, const BinaryMask& gt) {
  EvalRecord r;
  r.iou = iou(binarize_adaptive(pred), gt);
  r.success = r.iou < 0.5;
  r.ap = average_precision(pred, gt);
  r.f_beta = f_beta(pred, gt);
  r.mae = mae(pred, gt);
  return r;
}

struct Aggregate {
  double s = 0.0;       // success rate
  double ap = 0.0;      // mean average precision
  double f_beta = 0.0;  // mean F-measure
  double mae = 0.0;     // mean MAE
};

inline Aggregate aggregate_records(const std::vector<EvalRecord>& records) {
  require(!records.empty(), Errc::empty_input, "cannot aggregate an empty list");
  Aggregate a;
  a.s = success_rate(records);
  for (const auto& r : records) {
    a.ap += r.ap;
    a.f_beta += r.f_beta;
    a.mae += r.mae;
  }
  const double n = static_cast<double>(records.size());
  a.ap /= n;
  a.f_beta /= n;
  a.mae /= n;
  return a;
}

namespace detail {

inline std::string double_str(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// CSV rows with header: image, iou, success, ap, f_beta, mae.
inline std::string records_to_csv(const std::vector<std::string>& names,
                                  const std::vector<EvalRecord>& records) {
  require(names.size() == records.size(), Errc::shape_mismatch,
          "name/record count mismatch");
  std::string out = "image,iou,success,ap,f_beta,mae\n";
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out += names[i] + "," + detail::double_str(r.iou) + "," +
           (r.success ? "1" : "0") + "," + detail::double_str(r.ap) + "," +
           detail::double_str(r.f_beta) + "," + detail::double_str(r.mae) + "\n";
  }
  return out;
}

}  // namespace jadena

#endif  // JADENA_METRICS_HPP_
