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
// Fixed multi-stage convolutional feature extractor with tapped outputs and
// exact vector-Jacobian products. The extractor is never trained; its role is
// to expose spatial feature contrast that the attack objective suppresses.

#ifndef JADENA_CONV_STACK_HPP_
#define JADENA_CONV_STACK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jadena/error.hpp"
#include "jadena/raster.hpp"
#include "jadena/rng.hpp"

namespace jadena {

/// Channel-major volume, index (c*height + y)*width + x.
struct Tensor3 {
  int channels = 0, height = 0, width = 0;
  std::vector<double> v;

  static Tensor3 zeros(int c, int h, int w) {
    Tensor3 t;
    t.channels = c;
    t.height = h;
    t.width = w;
    t.v.assign(static_cast<size_t>(c) * h * w, 0.0);
    return t;
  }
  double& at(int c, int y, int x) {
    return v[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

inline Tensor3 image_tensor(const RasterImage& img) {
  Tensor3 t;
  t.channels = 3;
  t.height = img.height;
  t.width = img.width;
  t.v = img.data;
  return t;
}

// Layer vocabulary: 3x3 stride-1 convolution with replicate same-padding,
// pointwise max(0,.), and 2x2 stride-2 max pooling.
enum class LayerKind { conv, relu, pool };

struct LayerSpec {
  LayerKind kind;
  int channels = 0;  // conv output channels; unused otherwise
};

struct ArchSpec {
  int input_channels = 3;
  std::vector<LayerSpec> layers;
  std::vector<int> taps;  // layer indices whose outputs are exposed
};

/// Three stages of [conv-relu-conv-relu-pool] with a tap after each pool.
inline ArchSpec default_arch(int channels = 16, int stages = 3) {
  require(channels >= 1 && stages >= 1, Errc::bad_argument,
          "extractor needs at least one channel and one stage");
  ArchSpec spec;
  for (int s = 0; s < stages; ++s) {
    spec.layers.push_back({LayerKind::conv, channels});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::conv, channels});
    spec.layers.push_back({LayerKind::relu});
    spec.layers.push_back({LayerKind::pool});
    spec.taps.push_back(static_cast<int>(spec.layers.size()) - 1);
  }
  return spec;
}

/// Feature maps at every tap, in tap order.
struct FeatureStack {
  std::vector<Tensor3> taps;
};

class ConvStack {
 public:
  /// Deterministic seeded weights: each kernel entry is drawn uniformly from
  /// (-s, s) with s = (fan-in)^(-1/2), then snapped to float32 so that the
  /// 32-bit weight file round-trips bit-exactly. Biases start at zero.
  static ConvStack seeded(const ArchSpec& spec, std::uint64_t seed) {
    ConvStack stack(spec);
    Rng rng(seed);
    for (auto& conv : stack.convs_) {
      const double s = 1.0 / std::sqrt(static_cast<double>(conv.in_ch) * 9.0);
      for (auto& w : conv.w) {
        w = static_cast<double>(static_cast<float>(rng.uniform(-s, s)));
      }
      // biases stay zero
    }
    return stack;
  }

  static ConvStack from_file(const ArchSpec& spec, const std::filesystem::path& path) {
    ConvStack stack(spec);
    stack.load_weights(path);
    return stack;
  }

  const ArchSpec& arch() const { return arch_; }

  int pool_count() const {
    int n = 0;
    for (const auto& l : arch_.layers) n += (l.kind == LayerKind::pool) ? 1 : 0;
    return n;
  }

  /// Weight file: a text header listing per-conv shapes, then raw
  /// little-endian float32 data (per conv: out*in*3*3 weights, then out
  /// biases). See README for the exact grammar.
  void save_weights(const std::filesystem::path& path) const {
    std::string header = "jadena-weights v1\n";
    for (const auto& conv : convs_) {
      header += "conv " + std::to_string(conv.in_ch) + " " +
                std::to_string(conv.out_ch) + " 3 3\n";
    }
    header += "data\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    auto put_f32 = [&](double d) {
      const float f = static_cast<float>(d);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      bytes.push_back(static_cast<std::uint8_t>(u));
      bytes.push_back(static_cast<std::uint8_t>(u >> 8));
      bytes.push_back(static_cast<std::uint8_t>(u >> 16));
      bytes.push_back(static_cast<std::uint8_t>(u >> 24));
    };
    for (const auto& conv : convs_) {
      for (double w : conv.w) put_f32(w);
      for (double b : conv.b) put_f32(b);
    }
    io_detail::write_file_atomic(path, bytes);
  }

  void load_weights(const std::filesystem::path& path) {
    const auto bytes = io_detail::read_file(path);
    size_t pos = 0;
    auto read_line = [&]() -> std::string {
      std::string line;
      while (pos < bytes.size() && bytes[pos] != '\n') line += static_cast<char>(bytes[pos++]);
      require(pos < bytes.size(), Errc::bad_weight_file, "truncated weight header");
      ++pos;
      return line;
    };
    require(read_line() == "jadena-weights v1", Errc::bad_weight_file,
            "unrecognized weight file magic: " + path.string());
    for (auto& conv : convs_) {
      std::istringstream ls(read_line());
      std::string kw;
      int in = 0, out = 0, kh = 0, kw2 = 0;
      ls >> kw >> in >> out >> kh >> kw2;
      require(kw == "conv" && !ls.fail(), Errc::bad_weight_file,
              "malformed layer line in weight file");
      require(in == conv.in_ch && out == conv.out_ch && kh == 3 && kw2 == 3,
              Errc::bad_weight_file,
              "weight file shapes do not match the architecture");
    }
    require(read_line() == "data", Errc::bad_weight_file,
            "missing data marker in weight file");
    auto get_f32 = [&]() -> double {
      require(pos + 4 <= bytes.size(), Errc::bad_weight_file, "truncated weight data");
      std::uint32_t u = bytes[pos] | (bytes[pos + 1] << 8) | (bytes[pos + 2] << 16) |
                        (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
      pos += 4;
      float f;
      std::memcpy(&f, &u, 4);
      require(std::isfinite(f), Errc::bad_weight_file, "non-finite weight");
      return static_cast<double>(f);
    };
    for (auto& conv : convs_) {
      for (auto& w : conv.w) w = get_f32();
      for (auto& b : conv.b) b = get_f32();
    }
    require(pos == bytes.size(), Errc::bad_weight_file,
            "trailing bytes in weight file");
  }

  FeatureStack forward(const RasterImage& img) const {
    const auto acts = run_all(image_tensor(img));
    FeatureStack fs;
    fs.taps.reserve(arch_.taps.size());
    for (int t : arch_.taps) fs.taps.push_back(acts[t]);
    return fs;
  }

  /// Exact VJP of forward: accumulates the given per-tap cotangents back to a
  /// gradient on the input image. Max-pool routes to the first maximal
  /// element in row-major window order; ReLU passes gradient only where the
  /// pre-activation is strictly positive.
  Tensor3 backward(const RasterImage& img, const FeatureStack& cotangents) const {
    require(cotangents.taps.size() == arch_.taps.size(), Errc::shape_mismatch,
            "cotangent count does not match tap count");
    const Tensor3 input = image_tensor(img);
    const auto acts = run_all(input);
    const int n_layers = static_cast<int>(arch_.layers.size());
    std::vector<Tensor3> grads(n_layers);
    for (int i = 0; i < n_layers; ++i) {
      grads[i] = Tensor3::zeros(acts[i].channels, acts[i].height, acts[i].width);
    }
    for (size_t k = 0; k < arch_.taps.size(); ++k) {
      Tensor3& g = grads[arch_.taps[k]];
      const Tensor3& c = cotangents.taps[k];
      require(g.same_shape(c), Errc::shape_mismatch, "cotangent shape mismatch");
      for (size_t i = 0; i < g.size(); ++i) g.v[i] += c.v[i];
    }
    int conv_idx = conv_index_before(n_layers);
    Tensor3 image_grad;
    for (int i = n_layers - 1; i >= 0; --i) {
      const Tensor3& layer_input = (i == 0) ? input : acts[i - 1];
      Tensor3 gin;
      switch (arch_.layers[i].kind) {
        case LayerKind::conv:
          --conv_idx;
          gin = conv_backward(convs_[conv_idx], layer_input, grads[i]);
          break;
        case LayerKind::relu:
          gin = relu_backward(layer_input, grads[i]);
          break;
        case LayerKind::pool:
          gin = pool_backward(layer_input, grads[i]);
          break;
      }
      if (i == 0) {
        image_grad = std::move(gin);
      } else {
        for (size_t k = 0; k < gin.size(); ++k) grads[i - 1].v[k] += gin.v[k];
      }
    }
    return image_grad;
  }

 private:
  struct ConvLayer {
    int in_ch = 0, out_ch = 0;
    std::vector<double> w;  // [out][in][ky][kx], 3x3 kernels
    std::vector<double> b;  // [out]
  };

  explicit ConvStack(const ArchSpec& spec) : arch_(spec) {
    require(!arch_.taps.empty(), Errc::bad_argument,
            "extractor must declare at least one tap");
    int ch = arch_.input_channels;
    for (const auto& l : arch_.layers) {
      if (l.kind == LayerKind::conv) {
        require(l.channels >= 1, Errc::bad_argument, "conv needs output channels");
        ConvLayer conv;
        conv.in_ch = ch;
        conv.out_ch = l.channels;
        conv.w.assign(static_cast<size_t>(conv.out_ch) * conv.in_ch * 9, 0.0);
        conv.b.assign(conv.out_ch, 0.0);
        convs_.push_back(std::move(conv));
        ch = l.channels;
      }
    }
    for (int t : arch_.taps) {
      require(t >= 0 && t < static_cast<int>(arch_.layers.size()), Errc::bad_argument,
              "tap index out of range");
    }
  }

  int conv_index_before(int layer_end) const {
    int n = 0;
    for (int i = 0; i < layer_end; ++i) {
      n += (arch_.layers[i].kind == LayerKind::conv) ? 1 : 0;
    }
    return n;
  }

  // Same-size convolution with replicate (clamp-to-edge) padding: a constant
  // input stays exactly constant through every conv layer.
  static Tensor3 conv_forward(const ConvLayer& conv, const Tensor3& in) {
    Tensor3 out = Tensor3::zeros(conv.out_ch, in.height, in.width);
    const int h = in.height, w = in.width;
    for (int oc = 0; oc < conv.out_ch; ++oc) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = conv.b[oc];
          for (int ic = 0; ic < conv.in_ch; ++ic) {
            const double* wk = &conv.w[(static_cast<size_t>(oc) * conv.in_ch + ic) * 9];
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = std::clamp(y + ky - 1, 0, h - 1);
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = std::clamp(x + kx - 1, 0, w - 1);
                acc += wk[ky * 3 + kx] * in.at(ic, iy, ix);
              }
            }
          }
          out.at(oc, y, x) = acc;
        }
      }
    }
    return out;
  }

  static Tensor3 conv_backward(const ConvLayer& conv, const Tensor3& in,
                               const Tensor3& gout) {
    Tensor3 gin = Tensor3::zeros(in.channels, in.height, in.width);
    const int h = in.height, w = in.width;
    for (int oc = 0; oc < conv.out_ch; ++oc) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double go = gout.at(oc, y, x);
          if (go == 0.0) continue;
          for (int ic = 0; ic < conv.in_ch; ++ic) {
            const double* wk = &conv.w[(static_cast<size_t>(oc) * conv.in_ch + ic) * 9];
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = std::clamp(y + ky - 1, 0, h - 1);
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = std::clamp(x + kx - 1, 0, w - 1);
                gin.at(ic, iy, ix) += wk[ky * 3 + kx] * go;
              }
            }
          }
        }
      }
    }
    return gin;
  }

  static Tensor3 relu_forward(const Tensor3& in) {
    Tensor3 out = in;
    for (auto& v : out.v) v = std::max(0.0, v);
    return out;
  }

  static Tensor3 relu_backward(const Tensor3& in, const Tensor3& gout) {
    Tensor3 gin = gout;
    for (size_t i = 0; i < gin.size(); ++i) {
      if (!(in.v[i] > 0.0)) gin.v[i] = 0.0;
    }
    return gin;
  }

  static Tensor3 pool_forward(const Tensor3& in) {
    const int oh = in.height / 2, ow = in.width / 2;
    Tensor3 out = Tensor3::zeros(in.channels, oh, ow);
    for (int c = 0; c < in.channels; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double m = in.at(c, 2 * y, 2 * x);
          m = std::max(m, in.at(c, 2 * y, 2 * x + 1));
          m = std::max(m, in.at(c, 2 * y + 1, 2 * x));
          m = std::max(m, in.at(c, 2 * y + 1, 2 * x + 1));
          out.at(c, y, x) = m;
        }
      }
    }
    return out;
  }

  static Tensor3 pool_backward(const Tensor3& in, const Tensor3& gout) {
    Tensor3 gin = Tensor3::zeros(in.channels, in.height, in.width);
    const int oh = gout.height, ow = gout.width;
    for (int c = 0; c < in.channels; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          // First maximal element in row-major window order wins ties.
          int by = 2 * y, bx = 2 * x;
          double best = in.at(c, by, bx);
          const int cand[3][2] = {{2 * y, 2 * x + 1}, {2 * y + 1, 2 * x}, {2 * y + 1, 2 * x + 1}};
          for (const auto& yx : cand) {
            const double v = in.at(c, yx[0], yx[1]);
            if (v > best) {
              best = v;
              by = yx[0];
              bx = yx[1];
            }
          }
          gin.at(c, by, bx) += gout.at(c, y, x);
        }
      }
    }
    return gin;
  }

  std::vector<Tensor3> run_all(const Tensor3& input) const {
    const int pools = pool_count();
    require(input.height >= (1 << pools) && input.width >= (1 << pools),
            Errc::image_too_small, "image too small for the pooling depth");
    std::vector<Tensor3> acts;
    acts.reserve(arch_.layers.size());
    const Tensor3* cur = &input;
    int conv_idx = 0;
    for (const auto& l : arch_.layers) {
      switch (l.kind) {
        case LayerKind::conv:
          acts.push_back(conv_forward(convs_[conv_idx++], *cur));
          break;
        case LayerKind::relu:
          acts.push_back(relu_forward(*cur));
          break;
        case LayerKind::pool:
          acts.push_back(pool_forward(*cur));
          break;
      }
      cur = &acts.back();
    }
    return acts;
  }

  ArchSpec arch_;
  std::vector<ConvLayer> convs_;
};

/// The four reference augmentations, in order: vertical flip, horizontal
/// mirror, rotate 90 degrees counter-clockwise, rotate 90 degrees clockwise.
/// All are lossless pixel permutations.
inline std::vector<RasterImage> augment_references(const RasterImage& img) {
  const int h = img.height, w = img.width;
  RasterImage vflip = RasterImage::zeros(h, w);
  RasterImage mirror = RasterImage::zeros(h, w);
  RasterImage rot_left = RasterImage::zeros(w, h);
  RasterImage rot_right = RasterImage::zeros(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = img.at(c, y, x);
        vflip.at(c, h - 1 - y, x) = v;
        mirror.at(c, y, w - 1 - x) = v;
        rot_left.at(c, w - 1 - x, y) = v;
        rot_right.at(c, x, h - 1 - y) = v;
      }
    }
  }
  return {std::move(vflip), std::move(mirror), std::move(rot_left), std::move(rot_right)};
}

/// Concatenate same-layer features along the first spatial axis:
/// n stacks of C x H x W become C x (n*H) x W per tap.
inline FeatureStack splice(const std::vector<FeatureStack>& stacks) {
  require(!stacks.empty(), Errc::empty_input, "splice needs at least one stack");
  const size_t n_taps = stacks[0].taps.size();
  for (const auto& s : stacks) {
    require(s.taps.size() == n_taps, Errc::shape_mismatch,
            "feature stacks have different tap counts");
  }
  FeatureStack out;
  out.taps.reserve(n_taps);
  for (size_t t = 0; t < n_taps; ++t) {
    const Tensor3& first = stacks[0].taps[t];
    for (const auto& s : stacks) {
      require(s.taps[t].channels == first.channels, Errc::shape_mismatch,
              "spliced stacks must share channel counts per tap");
      require(s.taps[t].height == first.height && s.taps[t].width == first.width,
              Errc::shape_mismatch, "spliced stacks must share spatial sizes per tap");
    }
    Tensor3 cat = Tensor3::zeros(first.channels,
                                 first.height * static_cast<int>(stacks.size()),
                                 first.width);
    for (int c = 0; c < first.channels; ++c) {
      for (size_t i = 0; i < stacks.size(); ++i) {
        const Tensor3& src = stacks[i].taps[t];
        for (int y = 0; y < first.height; ++y) {
          const size_t src_off =
              (static_cast<size_t>(c) * src.height + y) * src.width;
          std::memcpy(&cat.at(c, static_cast<int>(i) * first.height + y, 0),
                      &src.v[src_off], sizeof(double) * first.width);
        }
      }
    }
    out.taps.push_back(std::move(cat));
  }
  return out;
}

}  // namespace jadena

#endif  // JADENA_CONV_STACK_HPP_
