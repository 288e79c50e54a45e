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

#include <fstream>

#include "jadena/harness.hpp"
#include "test_util.hpp"

using namespace jadena;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) { return io_detail::read_file(p); }

void dump(const fs::path& p, const std::string& s) {
  io_detail::write_file_atomic(p, std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace

TEST_CASE("empty config takes the published defaults") {
  const FullConfig cfg = parse_config_json(json::object());
  CHECK(cfg.attack.variant == Variant::augment);
  CHECK(cfg.attack.iterations == 20);
  CHECK(cfg.attack.alpha_n == Catch::Approx(1.0 / 255.0).epsilon(1e-15));
  CHECK(cfg.attack.epsilon == Catch::Approx(16.0 / 255.0).epsilon(1e-15));
  CHECK(cfg.attack.mu == 1.0);
  CHECK(cfg.attack.alpha_a == 0.1);
  CHECK(cfg.attack.alpha_u == 0.01);
  CHECK(cfg.attack.degree == 10);
  CHECK(cfg.attack.lambda_s == 0.01);
  CHECK(cfg.attack.lambda_b == 0.01);  // augment default
  CHECK(cfg.attack.enable_noise);
  CHECK(cfg.attack.enable_exposure);
}

TEST_CASE("lambda_b default follows the variant") {
  CHECK(parse_config_json({{"variant", "single"}}).attack.lambda_b == 0.5);
  CHECK(parse_config_json({{"variant", "group"}}).attack.lambda_b == 0.01);
  CHECK(parse_config_json({{"variant", "augment"}}).attack.lambda_b == 0.01);
  CHECK(parse_config_json({{"variant", "single"}, {"lambda_b", 0.2}}).attack.lambda_b ==
        0.2);
}

TEST_CASE("config validation names the offending key") {
  try {
    parse_config_json({{"iterations", 0}});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_config);
    CHECK(std::string(e.what()).find("iterations") != std::string::npos);
  }
  try {
    parse_config_json({{"momentum", 0.9}});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("momentum") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_json({{"variant", "both"}}), Error);
  CHECK_THROWS_AS(parse_config_json({{"epsilon", 300.0}}), Error);
  CHECK_THROWS_AS(parse_config_json({{"detector", {{"clusters", 1}}}}), Error);
}

TEST_CASE("pixel-unit constants are divided by 255 at the boundary") {
  const FullConfig cfg =
      parse_config_json({{"epsilon", 8.0}, {"alpha_n", 2.0}, {"noise_baseline_epsilon", 4.0}});
  CHECK(cfg.attack.epsilon == Catch::Approx(8.0 / 255.0).epsilon(1e-15));
  CHECK(cfg.attack.alpha_n == Catch::Approx(2.0 / 255.0).epsilon(1e-15));
  CHECK(cfg.run.noise_baseline_epsilon == Catch::Approx(4.0 / 255.0).epsilon(1e-15));
  // the echo reports them back in 0..255 units
  CHECK(cfg.echo()["epsilon"].get<double>() == Catch::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("fixtures are deterministic per seed") {
  const auto d1 = testing::temp_dir("fix_a");
  const auto d2 = testing::temp_dir("fix_b");
  make_fixture(FixtureKind::disc_group, 3, 32, 21, d1);
  make_fixture(FixtureKind::disc_group, 3, 32, 21, d2);
  for (const char* rel : {"images/img00.png", "images/img01.png", "masks/img02.png",
                          "fixture.json"}) {
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
  }
  const auto d3 = testing::temp_dir("fix_c");
  make_fixture(FixtureKind::disc_group, 3, 32, 22, d3);
  CHECK(slurp(d1 / "images/img00.png") != slurp(d3 / "images/img00.png"));
}

TEST_CASE("disc masks are exactly the disc predicate") {
  const auto dir = testing::temp_dir("fix_mask");
  const FixtureInfo info = make_fixture(FixtureKind::disc_group, 2, 32, 5, dir);
  const GroupManifest manifest = ingest_group(dir);
  const LoadedGroup group = load_group(manifest);
  for (size_t i = 0; i < group.masks.size(); ++i) {
    const double cy = info.meta[i]["cy"].get<double>();
    const double cx = info.meta[i]["cx"].get<double>();
    const double r = info.meta[i]["radius"].get<double>();
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const bool inside = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
        REQUIRE(group.masks[i].at(y, x) == (inside ? 1 : 0));
      }
    }
  }
}

TEST_CASE("fixture argument validation") {
  const auto dir = testing::temp_dir("fix_args");
  CHECK_THROWS_AS(make_fixture(FixtureKind::disc_group, 1, 32, 1, dir), Error);
  CHECK_THROWS_AS(make_fixture(FixtureKind::disc_group, 2, 16, 1, dir), Error);
}

TEST_CASE("stripe fixture also ingests cleanly") {
  const auto dir = testing::temp_dir("fix_stripe");
  make_fixture(FixtureKind::stripe_group, 2, 32, 9, dir);
  const LoadedGroup group = load_group(ingest_group(dir));
  CHECK(group.images.size() == 2);
  CHECK(group.masks[0].area() > 0);
}

TEST_CASE("ingest_group orders by stem and validates pairing") {
  const auto dir = testing::temp_dir("ingest");
  make_fixture(FixtureKind::disc_group, 5, 32, 3, dir);
  const GroupManifest m = ingest_group(dir);
  REQUIRE(m.items.size() == 5);
  for (size_t i = 1; i < m.items.size(); ++i) {
    CHECK(m.items[i - 1].stem < m.items[i].stem);
  }
  CHECK(m.targets == std::vector<int>{0, 1, 2, 3, 4});

  SECTION("image without mask names the stem") {
    fs::remove(dir / "masks" / "img03.png");
    try {
      ingest_group(dir);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("img03") != std::string::npos);
    }
  }
  SECTION("empty group directory") {
    const auto empty = testing::temp_dir("ingest_empty");
    fs::create_directories(empty / "images");
    fs::create_directories(empty / "masks");
    CHECK_THROWS_AS(ingest_group(empty), Error);
  }
}

TEST_CASE("experiment runs are byte-identical and echo their conditions") {
  const auto fix = testing::temp_dir("exp_fix");
  make_fixture(FixtureKind::disc_group, 2, 32, 13, fix);
  const GroupManifest manifest = ingest_group(fix);

  FullConfig cfg = parse_config_json({{"iterations", 3},
                                      {"degree", 2},
                                      {"seed", 5},
                                      {"detector", {{"clusters", 6}, {"iterations", 8}}}});
  const auto out1 = testing::temp_dir("exp_out1");
  const auto out2 = testing::temp_dir("exp_out2");
  const RunReport r1 = run_experiment(cfg, manifest, out1);
  const RunReport r2 = run_experiment(cfg, manifest, out2);

  // every output file byte-identical across the two runs
  std::vector<fs::path> rels;
  for (const auto& e : fs::recursive_directory_iterator(out1)) {
    if (e.is_regular_file()) rels.push_back(fs::relative(e.path(), out1));
  }
  REQUIRE(!rels.empty());
  for (const auto& rel : rels) {
    CHECK(slurp(out1 / rel) == slurp(out2 / rel));
  }

  // config echoes record the ablation switches
  CHECK(r1.conditions.at("wo-noise").config_echo["enable_noise"] == false);
  CHECK(r1.conditions.at("wo-noise").config_echo["enable_exposure"] == true);
  CHECK(r1.conditions.at("wo-exposure").config_echo["enable_exposure"] == false);
  CHECK(r1.conditions.at("clean").config_echo["condition"] == "clean");

  // per-condition CSVs exist
  for (const auto& c : kAllConditions) {
    CHECK(fs::exists(out1 / ("metrics_" + c + ".csv")));
  }

  // loading the report re-verifies aggregates
  const RunReport loaded = load_report(out1 / "report.json");
  CHECK(loaded.conditions.at("clean").aggregate.s == r1.conditions.at("clean").aggregate.s);

  SECTION("tampered aggregates are rejected on load") {
    auto bytes = slurp(out1 / "report.json");
    json j = json::parse(bytes.begin(), bytes.end());
    j["conditions"]["clean"]["aggregate"]["MAE"] =
        j["conditions"]["clean"]["aggregate"]["MAE"].get<double>() + 0.25;
    dump(out1 / "tampered.json", j.dump(2));
    CHECK_THROWS_AS(load_report(out1 / "tampered.json"), Error);
  }
}

TEST_CASE("clean detection on the 64px disc fixture is solid") {
  // Clean-baseline regression: the built-in detector must find the disc
  // (IoU >= 0.5) in at least 4 of the 5 fixture images.
  const auto fix = testing::temp_dir("exp_fix64");
  make_fixture(FixtureKind::disc_group, 5, 64, 7, fix);
  const LoadedGroup group = load_group(ingest_group(fix));
  FullConfig cfg = parse_config_json(json::object());
  std::vector<RasterImage> quantized;
  for (const auto& img : group.images) quantized.push_back(quantize_image(img));
  const auto maps = detect_group(cfg.detector, quantized);
  int solid = 0;
  for (size_t i = 0; i < maps.size(); ++i) {
    solid += (iou(binarize_adaptive(maps[i]), group.masks[i]) >= 0.5) ? 1 : 0;
  }
  CHECK(solid >= 4);
}
