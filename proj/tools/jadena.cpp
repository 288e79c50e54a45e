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
// Command line front end: fixture generation, attacks, detection, evaluation,
// full experiments and the finite-difference gradient check.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jadena/attack.hpp"
#include "jadena/codetector.hpp"
#include "jadena/gradcheck.hpp"
#include "jadena/harness.hpp"
#include "jadena/metrics.hpp"
#include "jadena/raster.hpp"

namespace fs = std::filesystem;
using namespace jadena;

namespace {

FullConfig load_config_or_default(const std::string& config_path) {
  if (config_path.empty()) return parse_config_json(json::object());
  return parse_config(config_path);
}

void apply_overrides(FullConfig& cfg, const std::string& variant,
                     std::int64_t seed) {
  if (!variant.empty()) {
    // Re-derive lambda_b's variant-dependent default unless it was pinned.
    json base = json::object();
    base["variant"] = variant;
    if (cfg.lambda_b_explicit) base["lambda_b"] = cfg.attack.lambda_b;
    FullConfig reparsed = parse_config_json(base);
    cfg.attack.variant = reparsed.attack.variant;
    cfg.attack.lambda_b = reparsed.attack.lambda_b;
  }
  if (seed >= 0) {
    cfg.attack.seed = static_cast<std::uint64_t>(seed);
    if (!cfg.detector_seed_explicit) {
      cfg.detector.seed = derive_seed(cfg.attack.seed, "detector");
    }
  }
}

int run_fixture(const std::string& kind, int n, int size, std::uint64_t seed,
                const std::string& out) {
  const FixtureKind k = (kind == "stripe-group") ? FixtureKind::stripe_group
                                                 : FixtureKind::disc_group;
  require(kind == "disc-group" || kind == "stripe-group", Errc::bad_argument,
          "unknown fixture kind: " + kind);
  make_fixture(k, n, size, seed, out);
  std::printf("wrote %s fixture (%d images, %dx%d, seed %llu) to %s\n", kind.c_str(),
              n, size, size, static_cast<unsigned long long>(seed), out.c_str());
  return 0;
}

int run_attack_cmd(const FullConfig& cfg, const std::string& group_dir,
                   const std::string& out, const std::string& condition) {
  const GroupManifest manifest = ingest_group(group_dir);
  const LoadedGroup group = load_group(manifest);
  const ConvStack stack = build_extractor(cfg);
  fs::create_directories(out);
  AttackConfig attack_cfg = cfg.attack;
  if (condition == "wo-noise") attack_cfg.enable_noise = false;
  if (condition == "wo-exposure") attack_cfg.enable_exposure = false;
  for (int target : manifest.targets) {
    const auto refs = build_reference_set(attack_cfg, group.images, target);
    const AttackResult res = run_attack(attack_cfg, stack, group.images[target], refs);
    save_image(quantize_image(res.adversarial),
               fs::path(out) / ("adv_" + group.stems[target] + ".png"));
    std::string jsonl;
    for (const auto& t : res.trace) {
      json j = {{"iter", t.iter},
                {"j_contrast", t.j_contrast},
                {"j_smooth", t.j_smooth},
                {"total", t.total},
                {"max_abs_noise", t.max_abs_noise},
                {"max_abs_log_exposure", t.max_abs_log_exposure}};
      jsonl += j.dump() + "\n";
    }
    io_detail::write_file_atomic(
        fs::path(out) / ("trace_" + group.stems[target] + ".jsonl"),
        std::vector<std::uint8_t>(jsonl.begin(), jsonl.end()));
    std::printf("attacked %s (final total %.6f)\n", group.stems[target].c_str(),
                res.trace.empty() ? 0.0 : res.trace.back().total);
  }
  return 0;
}

int run_detect(const FullConfig& cfg, const std::string& group_dir,
               const std::string& out) {
  const GroupManifest manifest = ingest_group(group_dir);
  const LoadedGroup group = load_group(manifest);
  std::vector<RasterImage> quantized;
  for (const auto& img : group.images) quantized.push_back(quantize_image(img));
  const auto maps = detect_group(cfg.detector, quantized);
  fs::create_directories(out);
  for (size_t i = 0; i < maps.size(); ++i) {
    save_saliency(maps[i], fs::path(out) / ("sal_" + group.stems[i] + ".png"));
  }
  std::printf("wrote %zu saliency maps to %s\n", maps.size(), out.c_str());
  return 0;
}

int run_eval(const std::string& group_dir, const std::string& maps_dir,
             const std::string& out) {
  const GroupManifest manifest = ingest_group(group_dir);
  const LoadedGroup group = load_group(manifest);
  std::vector<std::string> names;
  std::vector<EvalRecord> records;
  for (size_t i = 0; i < group.stems.size(); ++i) {
    const fs::path map_path = fs::path(maps_dir) / ("sal_" + group.stems[i] + ".png");
    const SaliencyMap pred = load_saliency(map_path);
    names.push_back(group.stems[i]);
    records.push_back(evaluate(pred, group.masks[i]));
  }
  fs::create_directories(out);
  const std::string csv = records_to_csv(names, records);
  io_detail::write_file_atomic(fs::path(out) / "metrics.csv",
                               std::vector<std::uint8_t>(csv.begin(), csv.end()));
  const Aggregate agg = aggregate_records(records);
  json j = {{"S", agg.s}, {"AP", agg.ap}, {"F_beta", agg.f_beta}, {"MAE", agg.mae}};
  const std::string dumped = j.dump(2) + "\n";
  io_detail::write_file_atomic(fs::path(out) / "aggregate.json",
                               std::vector<std::uint8_t>(dumped.begin(), dumped.end()));
  std::printf("S=%.4f AP=%.4f F_beta=%.4f MAE=%.4f (%zu images)\n", agg.s, agg.ap,
              agg.f_beta, agg.mae, records.size());
  return 0;
}

int run_experiment_cmd(FullConfig cfg, const std::string& group_dir,
                       const std::string& out, const std::string& condition) {
  if (!condition.empty()) {
    if (condition != "all") cfg.run.conditions = {condition};
  }
  const GroupManifest manifest = ingest_group(group_dir);
  const RunReport report = run_experiment(cfg, manifest, out);
  for (const auto& [name, result] : report.conditions) {
    std::printf("%-16s S=%.4f AP=%.4f F_beta=%.4f MAE=%.4f\n", name.c_str(),
                result.aggregate.s, result.aggregate.ap, result.aggregate.f_beta,
                result.aggregate.mae);
  }
  std::printf("wall-clock: %.2fs; report written to %s\n", report.wall_seconds,
              (fs::path(out) / "report.json").string().c_str());
  return 0;
}

int run_gradcheck_cmd() {
  const GradCheckReport report = run_gradcheck([](const GradCheckCase& c) {
    std::printf("%-28s max rel err %.3e (tol %.0e)  %s\n", c.name.c_str(),
                c.max_rel_err, c.tolerance, c.pass ? "PASS" : "FAIL");
  });
  std::printf("gradcheck %s in %.1fs\n", report.all_pass ? "passed" : "FAILED",
              report.seconds);
  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jadena: joint adversarial exposure and noise attack on co-saliency detection"};
  app.require_subcommand(1);

  std::string config_path, group_dir, out_dir, variant, condition, kind = "disc-group";
  std::string maps_dir;
  int fixture_n = 5, fixture_size = 64;
  std::uint64_t fixture_seed = 7;
  std::int64_t seed_override = -1;

  auto add_common = [&](CLI::App* cmd, bool needs_group) {
    cmd->add_option("--config", config_path, "JSON config file (defaults apply if omitted)");
    if (needs_group) {
      cmd->add_option("--group", group_dir, "group directory (images/ + masks/)")
          ->required();
    }
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--variant", variant, "single|group|augment");
    cmd->add_option("--seed", seed_override, "master seed override");
  };

  CLI::App* fixture = app.add_subcommand("fixture", "generate a synthetic group");
  fixture->add_option("--kind", kind, "disc-group|stripe-group");
  fixture->add_option("--n", fixture_n, "number of images");
  fixture->add_option("--size", fixture_size, "image side length");
  fixture->add_option("--seed", fixture_seed, "fixture seed");
  fixture->add_option("--out", out_dir, "output directory")->required();

  CLI::App* attack = app.add_subcommand("attack", "attack all targets of a group");
  add_common(attack, true);
  attack->add_option("--condition", condition, "jadena|wo-noise|wo-exposure");

  CLI::App* detect = app.add_subcommand("detect", "run the built-in detector on a group");
  add_common(detect, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate saliency maps against masks");
  eval->add_option("--group", group_dir, "group directory (for masks)")->required();
  eval->add_option("--maps", maps_dir, "directory of sal_<stem>.png maps")->required();
  eval->add_option("--out", out_dir, "output directory")->required();

  CLI::App* experiment =
      app.add_subcommand("experiment", "attack, detect and evaluate all conditions");
  add_common(experiment, true);
  experiment->add_option("--condition", condition,
                         "clean|jadena|wo-noise|wo-exposure|noise-baseline|all");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  (void)gradcheck;

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(fixture)) {
      return run_fixture(kind, fixture_n, fixture_size, fixture_seed, out_dir);
    }
    if (app.got_subcommand(gradcheck)) {
      return run_gradcheck_cmd();
    }
    FullConfig cfg = load_config_or_default(config_path);
    apply_overrides(cfg, variant, seed_override);
    if (app.got_subcommand(attack)) {
      return run_attack_cmd(cfg, group_dir, out_dir, condition);
    }
    if (app.got_subcommand(detect)) {
      return run_detect(cfg, group_dir, out_dir);
    }
    if (app.got_subcommand(eval)) {
      return run_eval(group_dir, maps_dir, out_dir);
    }
    if (app.got_subcommand(experiment)) {
      return run_experiment_cmd(cfg, group_dir, out_dir, condition);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
