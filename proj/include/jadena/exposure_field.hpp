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
// Locally-variant polynomial exposure model, evaluated in the log domain:
//
//   log theta_p = sum_{d=0}^{D} sum_{l=0}^{D-d} a[d,l] (x_p+u_p)^d (y_p+v_p)^l
//
// with per-pixel coordinate offsets (u_p, v_p). Pixel coordinates are
// affinely normalized to [-1,1] per axis (x = 2*col/(W-1)-1,
// y = 2*row/(H-1)-1); raw pixel coordinates overflow for high degrees.
// 0^0 is taken as 1 so the constant term is well defined everywhere.

#ifndef JADENA_EXPOSURE_FIELD_HPP_
#define JADENA_EXPOSURE_FIELD_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "jadena/error.hpp"

namespace jadena {

/// Exposure may not exceed e^30 in magnitude of its logarithm; evaluation
/// fails loudly instead of silently clamping a diverged field.
inline constexpr double kMaxAbsLogExposure = 30.0;

/// Gradient container matching the optimizable field parameters.
struct FieldGrad {
  std::vector<double> coeffs;  // one per polynomial coefficient
  std::vector<double> u, v;    // per-pixel offset gradients, row-major

  void add_scaled(const FieldGrad& o, double s) {
    for (size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += s * o.coeffs[i];
    for (size_t i = 0; i < u.size(); ++i) u[i] += s * o.u[i];
    for (size_t i = 0; i < v.size(); ++i) v[i] += s * o.v[i];
  }
};

struct TvResult {
  double energy = 0.0;
  std::vector<double> grad_u, grad_v;
};

inline double norm_coord(int index, int extent) {
  return extent > 1 ? 2.0 * index / (extent - 1) - 1.0 : 0.0;
}

class ExposureField {
 public:
  ExposureField(int degree, int height, int width)
      : degree_(degree), height_(height), width_(width) {
    require(degree >= 0, Errc::bad_argument, "polynomial degree must be >= 0");
    require(height > 0 && width > 0, Errc::bad_argument,
            "field extent must be positive");
    coeffs_.assign(coeff_count(degree), 0.0);
    u_.assign(pixel_count(), 0.0);
    v_.assign(pixel_count(), 0.0);
  }

  static int coeff_count(int degree) { return (degree + 1) * (degree + 2) / 2; }

  int degree() const { return degree_; }
  int height() const { return height_; }
  int width() const { return width_; }
  size_t pixel_count() const { return static_cast<size_t>(height_) * width_; }

  /// Coefficients in (d,l) lexicographic order: (0,0),(0,1),...,(0,D),(1,0),...
  int coeff_index(int d, int l) const {
    require(d >= 0 && l >= 0 && d + l <= degree_, Errc::bad_argument,
            "coefficient index out of range");
    return d * (degree_ + 1) - d * (d - 1) / 2 + l;
  }
  double& a(int d, int l) { return coeffs_[coeff_index(d, l)]; }
  double a(int d, int l) const { return coeffs_[coeff_index(d, l)]; }

  std::vector<double>& coeffs() { return coeffs_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::vector<double>& offsets_u() { return u_; }
  const std::vector<double>& offsets_u() const { return u_; }
  std::vector<double>& offsets_v() { return v_; }
  const std::vector<double>& offsets_v() const { return v_; }

  FieldGrad zero_grad() const {
    FieldGrad g;
    g.coeffs.assign(coeffs_.size(), 0.0);
    g.u.assign(pixel_count(), 0.0);
    g.v.assign(pixel_count(), 0.0);
    return g;
  }

  /// The inner polynomial sum, one value per pixel (row-major).
  std::vector<double> eval_log() const {
    std::vector<double> out(pixel_count(), 0.0);
    std::vector<double> pow_x(degree_ + 1), pow_y(degree_ + 1);
    size_t p = 0;
    for (int row = 0; row < height_; ++row) {
      const double y0 = norm_coord(row, height_);
      for (int col = 0; col < width_; ++col, ++p) {
        const double x = norm_coord(col, width_) + u_[p];
        const double y = y0 + v_[p];
        fill_powers(pow_x, x);
        fill_powers(pow_y, y);
        double s = 0.0;
        for (int d = 0; d <= degree_; ++d) {
          const int base = d * (degree_ + 1) - d * (d - 1) / 2;
          for (int l = 0; l <= degree_ - d; ++l) {
            s += coeffs_[base + l] * pow_x[d] * pow_y[l];
          }
        }
        out[p] = s;
      }
    }
    return out;
  }

  /// theta_e per pixel; strictly positive. Fails if |log theta| exceeds the
  /// divergence guard anywhere.
  std::vector<double> eval() const {
    std::vector<double> log_theta = eval_log();
    for (auto& v : log_theta) {
      require(std::isfinite(v) && std::abs(v) <= kMaxAbsLogExposure,
              Errc::divergent_field, "exposure field diverged (|log theta| > 30)");
      v = std::exp(v);
    }
    return log_theta;
  }

  /// Pull a per-pixel cotangent on log(theta) back to the parameters:
  ///   grad_a[d,l] = sum_p up_p (x_p+u_p)^d (y_p+v_p)^l
  ///   grad_u[p]   = up_p * d(poly)/du_p,  grad_v analogous,
  /// with 0*(.)^(-1) taken as 0.
  FieldGrad backward(const std::vector<double>& upstream) const {
    require(upstream.size() == pixel_count(), Errc::shape_mismatch,
            "upstream cotangent shape mismatch");
    FieldGrad g = zero_grad();
    std::vector<double> pow_x(degree_ + 1), pow_y(degree_ + 1);
    size_t p = 0;
    for (int row = 0; row < height_; ++row) {
      const double y0 = norm_coord(row, height_);
      for (int col = 0; col < width_; ++col, ++p) {
        const double up = upstream[p];
        const double x = norm_coord(col, width_) + u_[p];
        const double y = y0 + v_[p];
        fill_powers(pow_x, x);
        fill_powers(pow_y, y);
        double du = 0.0, dv = 0.0;
        for (int d = 0; d <= degree_; ++d) {
          const int base = d * (degree_ + 1) - d * (d - 1) / 2;
          for (int l = 0; l <= degree_ - d; ++l) {
            const double c = coeffs_[base + l];
            g.coeffs[base + l] += up * pow_x[d] * pow_y[l];
            if (d >= 1) du += c * d * pow_x[d - 1] * pow_y[l];
            if (l >= 1) dv += c * l * pow_x[d] * pow_y[l - 1];
          }
        }
        g.u[p] = up * du;
        g.v[p] = up * dv;
      }
    }
    return g;
  }

  /// Squared L2 norm of the forward-difference gradient of the offset map
  /// (both channels, both axes, replicate boundary), with its analytic
  /// gradient with respect to the offsets.
  TvResult tv_energy() const {
    TvResult r;
    r.grad_u.assign(pixel_count(), 0.0);
    r.grad_v.assign(pixel_count(), 0.0);
    accumulate_tv(u_, r.grad_u, r.energy);
    accumulate_tv(v_, r.grad_v, r.energy);
    return r;
  }

  /// Key-value text block: degree, coefficients in (d,l) lexicographic order,
  /// then the raw offset arrays. Round-trips doubles exactly.
  std::string serialize() const {
    std::ostringstream os;
    os << "exposure-field v1\n";
    os << "degree " << degree_ << "\n";
    os << "height " << height_ << "\n";
    os << "width " << width_ << "\n";
    os << "coeffs";
    for (double c : coeffs_) os << " " << format_double(c);
    os << "\noffsets_u";
    for (double c : u_) os << " " << format_double(c);
    os << "\noffsets_v";
    for (double c : v_) os << " " << format_double(c);
    os << "\n";
    return os.str();
  }

  static ExposureField deserialize(const std::string& text) {
    std::istringstream is(text);
    std::string word, version;
    is >> word >> version;
    require(word == "exposure-field" && version == "v1", Errc::unsupported_format,
            "unrecognized exposure field block");
    int degree = -1, height = 0, width = 0;
    auto read_kv = [&](const char* key, int& out) {
      is >> word >> out;
      require(is.good() && word == key, Errc::unsupported_format,
              std::string("expected key '") + key + "' in field block");
    };
    read_kv("degree", degree);
    read_kv("height", height);
    read_kv("width", width);
    ExposureField f(degree, height, width);
    auto read_array = [&](const char* key, std::vector<double>& out) {
      is >> word;
      require(word == key, Errc::unsupported_format,
              std::string("expected key '") + key + "' in field block");
      for (auto& v : out) {
        is >> v;
        require(!is.fail(), Errc::unsupported_format, "short field array");
      }
    };
    read_array("coeffs", f.coeffs_);
    read_array("offsets_u", f.u_);
    read_array("offsets_v", f.v_);
    return f;
  }

 private:
  static void fill_powers(std::vector<double>& pows, double x) {
    pows[0] = 1.0;  // 0^0 == 1 by convention
    for (size_t i = 1; i < pows.size(); ++i) pows[i] = pows[i - 1] * x;
  }

  void accumulate_tv(const std::vector<double>& f, std::vector<double>& grad,
                     double& energy) const {
    const int h = height_, w = width_;
    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < w; ++col) {
        const size_t p = static_cast<size_t>(row) * w + col;
        if (col + 1 < w) {
          const double d = f[p + 1] - f[p];
          energy += d * d;
          grad[p + 1] += 2.0 * d;
          grad[p] -= 2.0 * d;
        }
        if (row + 1 < h) {
          const double d = f[p + w] - f[p];
          energy += d * d;
          grad[p + w] += 2.0 * d;
          grad[p] -= 2.0 * d;
        }
      }
    }
  }

  static std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }

  int degree_, height_, width_;
  std::vector<double> coeffs_;
  std::vector<double> u_, v_;  // per-pixel offsets, row-major
};

}  // namespace jadena

#endif  // JADENA_EXPOSURE_FIELD_HPP_
