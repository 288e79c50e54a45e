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

#include "jadena/codetector.hpp"
#include "jadena/harness.hpp"
#include "jadena/rng.hpp"
#include "test_util.hpp"

using namespace jadena;

TEST_CASE("degenerate solid-color group yields uniform 0.5 maps") {
  RasterImage flat = RasterImage::zeros(16, 16);
  for (auto& v : flat.data) v = 0.3;
  const auto maps = detect_group(DetectorConfig{}, {flat});
  REQUIRE(maps.size() == 1);
  for (double v : maps[0].data) CHECK(v == 0.5);
}

TEST_CASE("detection is deterministic per seed") {
  Rng rng(3);
  std::vector<RasterImage> group = {testing::random_image(rng, 16, 16),
                                    testing::random_image(rng, 16, 16)};
  DetectorConfig cfg;
  cfg.seed = 9;
  const auto a = detect_group(cfg, group);
  const auto b = detect_group(cfg, group);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].data == b[i].data);
}

TEST_CASE("outputs stay in [0,1] and match input shapes") {
  Rng rng(4);
  std::vector<RasterImage> group = {testing::random_image(rng, 12, 18),
                                    testing::random_image(rng, 16, 16),
                                    testing::random_image(rng, 20, 10)};
  const auto maps = detect_group(DetectorConfig{}, group);
  REQUIRE(maps.size() == 3);
  for (size_t i = 0; i < maps.size(); ++i) {
    CHECK(maps[i].height == group[i].height);
    CHECK(maps[i].width == group[i].width);
    for (double v : maps[i].data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("permuting the group order permutes the outputs bit-exactly") {
  Rng rng(5);
  std::vector<RasterImage> group = {testing::random_image(rng, 12, 12),
                                    testing::random_image(rng, 12, 12),
                                    testing::random_image(rng, 12, 12)};
  DetectorConfig cfg;
  cfg.seed = 11;
  const auto forward = detect_group(cfg, group);
  const auto reversed = detect_group(cfg, {group[2], group[1], group[0]});
  CHECK(forward[0].data == reversed[2].data);
  CHECK(forward[1].data == reversed[1].data);
  CHECK(forward[2].data == reversed[0].data);
}

TEST_CASE("disc fixture: the disc is the salient region in every image") {
  const auto dir = testing::temp_dir("codet_fixture");
  make_fixture(FixtureKind::disc_group, 5, 64, 7, dir);
  const GroupManifest manifest = ingest_group(dir);
  const LoadedGroup group = load_group(manifest);
  const auto maps = detect_group(DetectorConfig{}, group.images);
  for (size_t i = 0; i < maps.size(); ++i) {
    double disc_mean = 0.0, bg_mean = 0.0;
    size_t disc_n = 0, bg_n = 0;
    for (size_t p = 0; p < maps[i].data.size(); ++p) {
      if (group.masks[i].data[p]) {
        disc_mean += maps[i].data[p];
        ++disc_n;
      } else {
        bg_mean += maps[i].data[p];
        ++bg_n;
      }
    }
    disc_mean /= static_cast<double>(disc_n);
    bg_mean /= static_cast<double>(bg_n);
    CHECK(disc_mean > bg_mean);
  }
}

TEST_CASE("binarize follows the adaptive 2*mean rule with a 0.95 cap") {
  SaliencyMap zeros = SaliencyMap::filled(2, 2, 0.0);
  CHECK(binarize(zeros).area() == 0);

  SaliencyMap quarter = SaliencyMap::filled(2, 2, 0.0);
  quarter.data = {0.0, 0.0, 0.0, 1.0};  // mean 0.25, threshold 0.5
  const BinaryMask m = binarize(quarter);
  CHECK(m.data == std::vector<std::uint8_t>{0, 0, 0, 1});

  SaliencyMap ones = SaliencyMap::filled(2, 2, 1.0);  // threshold capped at 0.95
  CHECK(binarize(ones).area() == 4);

  // ties go to zero: {0.6, 0} has mean 0.3, so 0.6 sits exactly on 2*mean
  SaliencyMap tie = SaliencyMap::filled(1, 2, 0.0);
  tie.data = {0.6, 0.0};
  CHECK(binarize(tie).area() == 0);
}
