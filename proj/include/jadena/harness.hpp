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
// Experiment orchestration: JSON configuration with paper-default fallbacks,
// group ingestion, synthetic fixture generation, condition sweeps and report
// emission. Reports are written atomically and re-verified on load
// (aggregates must equal recomputation from their rows). Wall-clock time is
// printed, never written into report files, so identical configurations
// produce byte-identical outputs.

#ifndef JADENA_HARNESS_HPP_
#define JADENA_HARNESS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "jadena/attack.hpp"
#include "jadena/codetector.hpp"
#include "jadena/conv_stack.hpp"
#include "jadena/error.hpp"
#include "jadena/metrics.hpp"
#include "jadena/raster.hpp"
#include "jadena/rng.hpp"

namespace jadena {

using json = nlohmann::json;

inline const std::vector<std::string> kAllConditions = {
    "clean", "jadena", "wo-noise", "wo-exposure", "noise-baseline"};

struct ExtractorOptions {
  int channels = 16;
  int stages = 3;
  std::string weights_file;  // optional; empty means seeded weights
};

struct RunOptions {
  std::vector<std::string> conditions = kAllConditions;
  double noise_baseline_epsilon = 16.0 / 255.0;
  ExtractorOptions extractor;
};

struct FullConfig {
  AttackConfig attack;
  DetectorConfig detector;
  RunOptions run;
  bool lambda_b_explicit = false;
  bool detector_seed_explicit = false;

  /// Effective values after defaulting; echoed into every report.
  json echo() const {
    json j;
    j["variant"] = variant_name(attack.variant);
    j["iterations"] = attack.iterations;
    j["alpha_a"] = attack.alpha_a;
    j["alpha_u"] = attack.alpha_u;
    j["alpha_n"] = attack.alpha_n * 255.0;
    j["epsilon"] = attack.epsilon * 255.0;
    j["mu"] = attack.mu;
    j["degree"] = attack.degree;
    j["lambda_b"] = attack.lambda_b;
    j["lambda_s"] = attack.lambda_s;
    j["enable_noise"] = attack.enable_noise;
    j["enable_exposure"] = attack.enable_exposure;
    j["seed"] = attack.seed;
    j["noise_baseline_epsilon"] = run.noise_baseline_epsilon * 255.0;
    j["conditions"] = run.conditions;
    j["detector"] = {{"clusters", detector.clusters},
                     {"iterations", detector.iterations},
                     {"seed", detector.seed}};
    j["extractor"] = {{"channels", run.extractor.channels},
                      {"stages", run.extractor.stages},
                      {"weights_file", run.extractor.weights_file}};
    return j;
  }
};

namespace harness_detail {

inline void check_range(bool ok, const std::string& key) {
  require(ok, Errc::bad_config, "config value out of range: " + key);
}

template <typename T>
T get_checked(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(Errc::bad_config, "config value has the wrong type: " + key);
  }
}

}  // namespace harness_detail

/// Parse a JSON config; unset keys take the attack's published defaults
/// (N=20, alpha_n=1, epsilon=16, mu=1, alpha_a=0.1, alpha_u=0.01, D=10,
/// lambda_s=0.01, lambda_b 0.5 for `single` / 0.01 otherwise). `epsilon`,
/// `alpha_n` and `noise_baseline_epsilon` are given in 0..255 pixel units and
/// divided by 255 at this boundary. Unknown keys are rejected by name.
inline FullConfig parse_config_json(const json& j) {
  using harness_detail::check_range;
  using harness_detail::get_checked;
  require(j.is_object(), Errc::bad_config, "config root must be a JSON object");

  static const std::vector<std::string> known = {
      "variant", "iterations", "alpha_a", "alpha_u", "alpha_n", "epsilon", "mu",
      "degree", "lambda_b", "lambda_s", "enable_noise", "enable_exposure", "seed",
      "noise_baseline_epsilon", "conditions", "detector", "extractor"};
  for (const auto& [key, value] : j.items()) {
    require(std::find(known.begin(), known.end(), key) != known.end(),
            Errc::bad_config, "unknown config key: " + key);
  }

  FullConfig cfg;
  const std::string variant = get_checked<std::string>(j, "variant", "augment");
  if (variant == "single") {
    cfg.attack.variant = Variant::single;
  } else if (variant == "group") {
    cfg.attack.variant = Variant::group;
  } else if (variant == "augment") {
    cfg.attack.variant = Variant::augment;
  } else {
    fail(Errc::bad_config, "config value out of range: variant");
  }

  cfg.attack.iterations = get_checked<int>(j, "iterations", 20);
  check_range(cfg.attack.iterations >= 1, "iterations");
  cfg.attack.alpha_a = get_checked<double>(j, "alpha_a", 0.1);
  check_range(cfg.attack.alpha_a > 0, "alpha_a");
  cfg.attack.alpha_u = get_checked<double>(j, "alpha_u", 0.01);
  check_range(cfg.attack.alpha_u > 0, "alpha_u");
  const double alpha_n_255 = get_checked<double>(j, "alpha_n", 1.0);
  check_range(alpha_n_255 > 0 && alpha_n_255 <= 255.0, "alpha_n");
  cfg.attack.alpha_n = alpha_n_255 / 255.0;
  const double eps_255 = get_checked<double>(j, "epsilon", 16.0);
  check_range(eps_255 >= 0 && eps_255 <= 255.0, "epsilon");
  cfg.attack.epsilon = eps_255 / 255.0;
  cfg.attack.mu = get_checked<double>(j, "mu", 1.0);
  check_range(cfg.attack.mu >= 0, "mu");
  cfg.attack.degree = get_checked<int>(j, "degree", 10);
  check_range(cfg.attack.degree >= 0, "degree");
  cfg.lambda_b_explicit = j.contains("lambda_b");
  const double default_lambda_b = (cfg.attack.variant == Variant::single) ? 0.5 : 0.01;
  cfg.attack.lambda_b = get_checked<double>(j, "lambda_b", default_lambda_b);
  check_range(cfg.attack.lambda_b >= 0, "lambda_b");
  cfg.attack.lambda_s = get_checked<double>(j, "lambda_s", 0.01);
  check_range(cfg.attack.lambda_s >= 0, "lambda_s");
  cfg.attack.enable_noise = get_checked<bool>(j, "enable_noise", true);
  cfg.attack.enable_exposure = get_checked<bool>(j, "enable_exposure", true);
  cfg.attack.seed = get_checked<std::uint64_t>(j, "seed", 1);

  const double bl_255 = get_checked<double>(j, "noise_baseline_epsilon", 16.0);
  check_range(bl_255 >= 0 && bl_255 <= 255.0, "noise_baseline_epsilon");
  cfg.run.noise_baseline_epsilon = bl_255 / 255.0;

  if (j.contains("conditions")) {
    cfg.run.conditions = j.at("conditions").get<std::vector<std::string>>();
    for (const auto& c : cfg.run.conditions) {
      require(std::find(kAllConditions.begin(), kAllConditions.end(), c) !=
                  kAllConditions.end(),
              Errc::bad_config, "unknown condition: " + c);
    }
    require(!cfg.run.conditions.empty(), Errc::bad_config,
            "conditions must not be empty");
  }

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    require(d.is_object(), Errc::bad_config, "detector must be an object");
    for (const auto& [key, value] : d.items()) {
      require(key == "clusters" || key == "iterations" || key == "seed",
              Errc::bad_config, "unknown config key: detector." + key);
    }
    cfg.detector.clusters = get_checked<int>(d, "clusters", cfg.detector.clusters);
    check_range(cfg.detector.clusters >= 2, "detector.clusters");
    cfg.detector.iterations =
        get_checked<int>(d, "iterations", cfg.detector.iterations);
    check_range(cfg.detector.iterations >= 1, "detector.iterations");
    cfg.detector_seed_explicit = d.contains("seed");
    cfg.detector.seed = get_checked<std::uint64_t>(d, "seed", cfg.detector.seed);
  }
  if (!cfg.detector_seed_explicit) {
    cfg.detector.seed = derive_seed(cfg.attack.seed, "detector");
  }

  if (j.contains("extractor")) {
    const json& e = j.at("extractor");
    require(e.is_object(), Errc::bad_config, "extractor must be an object");
    for (const auto& [key, value] : e.items()) {
      require(key == "channels" || key == "stages" || key == "weights_file",
              Errc::bad_config, "unknown config key: extractor." + key);
    }
    cfg.run.extractor.channels = get_checked<int>(e, "channels", 16);
    check_range(cfg.run.extractor.channels >= 1, "extractor.channels");
    cfg.run.extractor.stages = get_checked<int>(e, "stages", 3);
    check_range(cfg.run.extractor.stages >= 1, "extractor.stages");
    cfg.run.extractor.weights_file = get_checked<std::string>(e, "weights_file", "");
  }

  cfg.attack.validate();
  cfg.detector.validate();
  return cfg;
}

inline FullConfig parse_config(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(Errc::bad_config, "config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config_json(j);
}

/// Build the extractor the configuration describes.
inline ConvStack build_extractor(const FullConfig& cfg) {
  const ArchSpec arch = default_arch(cfg.run.extractor.channels, cfg.run.extractor.stages);
  if (!cfg.run.extractor.weights_file.empty()) {
    return ConvStack::from_file(arch, cfg.run.extractor.weights_file);
  }
  return ConvStack::seeded(arch, derive_seed(cfg.attack.seed, "weights"));
}

// ---- groups and fixtures ----------------------------------------------------

struct GroupManifest {
  struct Item {
    std::string stem;
    std::filesystem::path image;
    std::filesystem::path mask;
  };
  std::string name;
  std::vector<Item> items;
  std::vector<int> targets;  // indices to attack; defaults to every image
};

/// Directory layout: <dir>/images/<stem>.png + <dir>/masks/<stem>.png with
/// matching stems; ordering is lexicographic by stem.
inline GroupManifest ingest_group(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir / "images"), Errc::file_not_found,
          "group directory has no images/ subdirectory: " + dir.string());
  require(fs::is_directory(dir / "masks"), Errc::file_not_found,
          "group directory has no masks/ subdirectory: " + dir.string());
  GroupManifest m;
  m.name = dir.filename().string();
  std::vector<fs::path> image_files;
  for (const auto& e : fs::directory_iterator(dir / "images")) {
    if (e.is_regular_file()) image_files.push_back(e.path());
  }
  std::sort(image_files.begin(), image_files.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });
  require(!image_files.empty(), Errc::empty_input,
          "group has no images: " + dir.string());
  for (const auto& img_path : image_files) {
    const std::string stem = img_path.stem().string();
    fs::path mask_path;
    for (const char* ext : {".png", ".ppm"}) {
      fs::path cand = dir / "masks" / (stem + ext);
      if (fs::exists(cand)) {
        mask_path = cand;
        break;
      }
    }
    require(!mask_path.empty(), Errc::file_not_found,
            "image without matching mask: " + stem);
    m.items.push_back({stem, img_path, mask_path});
  }
  for (int i = 0; i < static_cast<int>(m.items.size()); ++i) m.targets.push_back(i);
  return m;
}

struct LoadedGroup {
  std::vector<RasterImage> images;
  std::vector<BinaryMask> masks;
  std::vector<std::string> stems;
};

inline LoadedGroup load_group(const GroupManifest& manifest) {
  LoadedGroup g;
  for (const auto& item : manifest.items) {
    RasterImage img = load_image(item.image);
    BinaryMask mask = load_mask(item.mask);
    require(img.height == mask.height && img.width == mask.width,
            Errc::shape_mismatch, "image and mask shapes differ for " + item.stem);
    g.images.push_back(std::move(img));
    g.masks.push_back(std::move(mask));
    g.stems.push_back(item.stem);
  }
  return g;
}

enum class FixtureKind { disc_group, stripe_group };

struct FixtureInfo {
  FixtureKind kind;
  int count = 0;
  int size = 0;
  std::uint64_t seed = 0;
  json meta;  // per-image geometry (centers/radius or stripe bounds)
};

namespace harness_detail {

// Fixture palette: a bright, nearly neutral object over a dark, lightly
// textured background. The object is defined by brightness contrast, the cue
// the built-in color-clustering victim keys on, and stays below saturation so
// multiplicative exposure always has somewhere to push.
inline constexpr double kObjectColor[3] = {0.78, 0.76, 0.74};
inline constexpr double kBackgroundBase = 0.10;
inline constexpr double kBackgroundAmplitude = 0.12;

inline RasterImage textured_background(Rng& rng, int size) {
  RasterImage img = RasterImage::zeros(size, size);
  for (auto& v : img.data) {
    v = kBackgroundBase + kBackgroundAmplitude * rng.next_double();
  }
  return img;
}

}  // namespace harness_detail

/// Write a synthetic group: n images with one common bright object (disc or
/// vertical stripe) at a random location in the middle third, over a dark
/// textured background, with exact geometric masks. Deterministic per seed.
inline FixtureInfo make_fixture(FixtureKind kind, int n, int size, std::uint64_t seed,
                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  require(n >= 2, Errc::bad_argument, "fixture needs at least 2 images");
  require(size >= 32, Errc::bad_argument, "fixture images must be at least 32 px");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  FixtureInfo info{kind, n, size, seed, json::array()};
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "fixture-image", static_cast<std::uint64_t>(i)));
    RasterImage img = harness_detail::textured_background(rng, size);
    BinaryMask mask = BinaryMask::zeros(size, size);
    json meta;
    if (kind == FixtureKind::disc_group) {
      const double radius = size / 6.0;
      const double cy = rng.uniform(size / 3.0, 2.0 * size / 3.0);
      const double cx = rng.uniform(size / 3.0, 2.0 * size / 3.0);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double dy = y - cy, dx = x - cx;
          if (dy * dy + dx * dx <= radius * radius) {
            for (int c = 0; c < 3; ++c) {
              img.at(c, y, x) = harness_detail::kObjectColor[c];
            }
            mask.at(y, x) = 1;
          }
        }
      }
      meta = {{"cy", cy}, {"cx", cx}, {"radius", radius}};
    } else {
      const double half_width = size / 10.0;
      const double cx = rng.uniform(size / 3.0, 2.0 * size / 3.0);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (std::abs(x - cx) <= half_width) {
            for (int c = 0; c < 3; ++c) {
              img.at(c, y, x) = harness_detail::kObjectColor[c];
            }
            mask.at(y, x) = 1;
          }
        }
      }
      meta = {{"cx", cx}, {"half_width", half_width}};
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img%02d", i);
    save_image(img, out_dir / "images" / (std::string(name) + ".png"));
    save_mask(mask, out_dir / "masks" / (std::string(name) + ".png"));
    info.meta.push_back(meta);
  }
  json fixture_json = {{"kind", kind == FixtureKind::disc_group ? "disc-group" : "stripe-group"},
                       {"count", n},
                       {"size", size},
                       {"seed", seed},
                       {"images", info.meta}};
  io_detail::write_file_atomic(out_dir / "fixture.json", [&] {
    const std::string s = fixture_json.dump(2) + "\n";
    return std::vector<std::uint8_t>(s.begin(), s.end());
  }());
  return info;
}

// ---- experiment -------------------------------------------------------------

struct ConditionResult {
  json config_echo;
  std::vector<std::string> names;
  std::vector<EvalRecord> records;
  Aggregate aggregate;
};

struct RunReport {
  json config_echo;
  std::string group_name;
  std::map<std::string, ConditionResult> conditions;
  double wall_seconds = 0.0;  // printed, never serialized
};

namespace harness_detail {

inline json record_json(const std::string& name, const EvalRecord& r) {
  return json{{"image", name}, {"iou", r.iou},         {"success", r.success},
              {"ap", r.ap},    {"f_beta", r.f_beta},   {"mae", r.mae}};
}

inline json aggregate_json(const Aggregate& a) {
  return json{{"S", a.s}, {"AP", a.ap}, {"F_beta", a.f_beta}, {"MAE", a.mae}};
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& s) {
  io_detail::write_file_atomic(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

inline std::string trace_jsonl(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& t : trace) {
    json j = {{"iter", t.iter},
              {"j_contrast", t.j_contrast},
              {"j_smooth", t.j_smooth},
              {"total", t.total},
              {"max_abs_noise", t.max_abs_noise},
              {"max_abs_log_exposure", t.max_abs_log_exposure}};
    out += j.dump() + "\n";
  }
  return out;
}

inline AttackConfig condition_attack_config(const FullConfig& cfg,
                                            const std::string& condition) {
  AttackConfig a = cfg.attack;
  if (condition == "wo-noise") {
    a.enable_noise = false;
  } else if (condition == "wo-exposure") {
    a.enable_exposure = false;
  }
  return a;
}

}  // namespace harness_detail

inline RunReport load_report(const std::filesystem::path& path);

/// Run the requested conditions over a group. For each attacked target the
/// detector sees the group with only that target replaced; every other image
/// stays untouched. Evaluation and detection run on 8-bit quantized pixels so
/// re-running `detect` on the saved files reproduces the reported numbers.
inline RunReport run_experiment(const FullConfig& cfg, const GroupManifest& manifest,
                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedGroup group = load_group(manifest);
  const ConvStack stack = build_extractor(cfg);

  RunReport report;
  report.config_echo = cfg.echo();
  report.group_name = manifest.name;

  for (const std::string& condition : cfg.run.conditions) {
    const fs::path cond_dir = out_dir / condition;
    fs::create_directories(cond_dir);
    ConditionResult result;
    const AttackConfig attack_cfg = harness_detail::condition_attack_config(cfg, condition);
    {
      FullConfig echo_cfg = cfg;
      echo_cfg.attack = attack_cfg;
      result.config_echo = echo_cfg.echo();
      result.config_echo["condition"] = condition;
    }

    if (condition == "clean") {
      std::vector<RasterImage> quantized;
      for (const auto& img : group.images) quantized.push_back(quantize_image(img));
      const auto maps = detect_group(cfg.detector, quantized);
      for (size_t i = 0; i < maps.size(); ++i) {
        const SaliencyMap map_q = [&] {
          SaliencyMap m = maps[i];
          for (auto& v : m.data) v = quantize8(v) / 255.0;
          return m;
        }();
        save_saliency(map_q, cond_dir / ("sal_" + group.stems[i] + ".png"));
        result.names.push_back(group.stems[i]);
        result.records.push_back(evaluate(map_q, group.masks[i]));
      }
    } else {
      for (int target : manifest.targets) {
        RasterImage adv;
        if (condition == "noise-baseline") {
          adv = random_noise_baseline(
              group.images[target], cfg.run.noise_baseline_epsilon,
              derive_seed(cfg.attack.seed, "noise-baseline",
                          static_cast<std::uint64_t>(target)));
        } else {
          const auto refs =
              build_reference_set(attack_cfg, group.images, target);
          const AttackResult res =
              run_attack(attack_cfg, stack, group.images[target], refs);
          harness_detail::write_text_atomic(
              cond_dir / ("trace_" + group.stems[target] + ".jsonl"),
              harness_detail::trace_jsonl(res.trace));
          adv = res.adversarial;
        }
        adv = quantize_image(adv);
        save_image(adv, cond_dir / ("adv_" + group.stems[target] + ".png"));

        std::vector<RasterImage> attacked_group;
        for (int i = 0; i < static_cast<int>(group.images.size()); ++i) {
          attacked_group.push_back(i == target ? adv : quantize_image(group.images[i]));
        }
        const auto maps = detect_group(cfg.detector, attacked_group);
        SaliencyMap map_q = maps[target];
        for (auto& v : map_q.data) v = quantize8(v) / 255.0;
        save_saliency(map_q, cond_dir / ("sal_" + group.stems[target] + ".png"));
        result.names.push_back(group.stems[target]);
        result.records.push_back(evaluate(map_q, group.masks[target]));
      }
    }
    result.aggregate = aggregate_records(result.records);
    harness_detail::write_text_atomic(
        out_dir / ("metrics_" + condition + ".csv"),
        records_to_csv(result.names, result.records));
    report.conditions[condition] = std::move(result);
  }

  json j;
  j["config"] = report.config_echo;
  j["group"] = report.group_name;
  json conds = json::object();
  for (const auto& [name, result] : report.conditions) {
    json rows = json::array();
    for (size_t i = 0; i < result.records.size(); ++i) {
      rows.push_back(harness_detail::record_json(result.names[i], result.records[i]));
    }
    conds[name] = {{"config", result.config_echo},
                   {"records", rows},
                   {"aggregate", harness_detail::aggregate_json(result.aggregate)}};
  }
  j["conditions"] = conds;
  harness_detail::write_text_atomic(out_dir / "report.json", j.dump(2) + "\n");

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // Loading back validates that written aggregates match their rows.
  (void)load_report(out_dir / "report.json");
  return report;
}

/// Load a report and verify that each condition's aggregate equals the
/// recomputation from its per-image rows.
inline RunReport load_report(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(Errc::unsupported_format, "report is not valid JSON: " + std::string(e.what()));
  }
  RunReport report;
  report.config_echo = j.at("config");
  report.group_name = j.at("group").get<std::string>();
  for (const auto& [name, cj] : j.at("conditions").items()) {
    ConditionResult r;
    r.config_echo = cj.at("config");
    for (const auto& row : cj.at("records")) {
      EvalRecord rec;
      rec.iou = row.at("iou").get<double>();
      rec.success = row.at("success").get<bool>();
      rec.ap = row.at("ap").get<double>();
      rec.f_beta = row.at("f_beta").get<double>();
      rec.mae = row.at("mae").get<double>();
      require(rec.success == (rec.iou < 0.5), Errc::unsupported_format,
              "report record has inconsistent success flag");
      r.names.push_back(row.at("image").get<std::string>());
      r.records.push_back(rec);
    }
    const Aggregate recomputed = aggregate_records(r.records);
    const json& aj = cj.at("aggregate");
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    require(close(recomputed.s, aj.at("S").get<double>()) &&
                close(recomputed.ap, aj.at("AP").get<double>()) &&
                close(recomputed.f_beta, aj.at("F_beta").get<double>()) &&
                close(recomputed.mae, aj.at("MAE").get<double>()),
            Errc::unsupported_format,
            "report aggregate does not match its rows: " + name);
    r.aggregate = recomputed;
    report.conditions[name] = std::move(r);
  }
  return report;
}

}  // namespace jadena

#endif  // JADENA_HARNESS_HPP_
