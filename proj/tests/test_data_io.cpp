#include "helpers.hpp"

#include "doctest.h"
#include "rgbdsal/data_io.hpp"

#include <fstream>

using namespace rgbdsal;
using namespace rgbdsal::testing;

namespace {

SynthSpec spec(int n, int size = 32, std::uint64_t seed = 3) {
  SynthSpec s;
  s.n_samples = n;
  s.size = size;
  s.seed = seed;
  return s;
}

bool same_sample(const RgbdSample& a, const RgbdSample& b) {
  for (int c = 0; c < 3; ++c) {
    if (!(a.rgb.channels[c] == b.rgb.channels[c]).all()) return false;
  }
  return a.id == b.id && a.tag == b.tag && equal(a.depth, b.depth) && equal(*a.gt, *b.gt);
}

}  // namespace

TEST_CASE("synthesis is deterministic in the spec") {
  const auto a = synthesize_dataset(spec(8));
  const auto b = synthesize_dataset(spec(8));
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same_sample(a[i], b[i]));
  CHECK(a[0].id == "s0000");
  CHECK_FALSE(same_sample(a[0], synthesize_dataset(spec(8, 32, 4))[0]));
}

TEST_CASE("depth-mode mix yields exact counts") {
  const auto counts = mode_counts({{DepthMode::clean, 0.5}, {DepthMode::misleading, 0.25}, {DepthMode::flat, 0.25}}, 200);
  CHECK(counts.at(DepthMode::clean) == 100);
  CHECK(counts.at(DepthMode::misleading) == 50);
  CHECK(counts.at(DepthMode::flat) == 50);
  const auto odd = mode_counts({{DepthMode::clean, 1.0}, {DepthMode::flat, 1.0}}, 7);
  CHECK(odd.at(DepthMode::clean) + odd.at(DepthMode::flat) == 7);

  const auto s = synthesize_dataset(spec(20));
  std::map<std::string, int> tags;
  for (const auto& x : s) ++tags[x.tag];
  CHECK(tags["clean"] == 10);
  CHECK(tags["misleading"] == 5);
  CHECK(tags["flat"] == 5);
}

TEST_CASE("clean depth separates the object and flat depth is constant") {
  auto sp = spec(12, 48);
  sp.mix = {{DepthMode::clean, 1.0}};
  for (const auto& s : synthesize_dataset(sp)) {
    const auto& d = s.depth.values();
    const auto& g = s.gt->values();
    CHECK((g > 0.5f).select(d, 2.0f).minCoeff() > (g > 0.5f).select(-1.0f, d).maxCoeff());
    CHECK(g.sum() > 0.0f);
  }
  sp.mix = {{DepthMode::flat, 1.0}};
  for (const auto& s : synthesize_dataset(sp)) {
    CHECK(s.depth.values().maxCoeff() == s.depth.values().minCoeff());
    CHECK(s.tag == "flat");
  }
}

TEST_CASE("synth spec validation") {
  auto sp = spec(4);
  sp.size = 8;
  CHECK_THROWS_AS(synthesize_dataset(sp), Error);
  sp = spec(4);
  sp.contrast_min = 0.6;
  sp.contrast_max = 0.2;
  CHECK_THROWS_AS(synthesize_dataset(sp), Error);
  sp = spec(4);
  sp.object_scale_max = 0.5;
  CHECK_THROWS_AS(synthesize_dataset(sp), Error);
  CHECK(parse_depth_mode("misleading") == DepthMode::misleading);
  CHECK_THROWS_AS(parse_depth_mode("wobbly"), Error);
}

TEST_CASE("maps round trip through 8-bit PNG within one level") {
  const auto dir = scratch_dir("maps");
  Rng rng(1);
  const auto m = random_map(rng, 9, 13);
  save_map(m, dir / "m.png");
  const auto back = load_map(dir / "m.png");
  REQUIRE(back.same_shape(m));
  CHECK((back.values() - m.values()).abs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  const auto grid = random_grid_map(rng, 5, 5);
  save_map(grid, dir / "g.png");
  CHECK(equal(load_map(dir / "g.png"), grid));
  CHECK_THROWS_AS(load_map(dir / "nope.png"), Error);
}

TEST_CASE("dataset write and load") {
  const auto dir = scratch_dir("dataset");
  const auto s = synthesize_dataset(spec(6, 32));
  write_dataset(s, dir / "set");
  CHECK_THROWS_AS(write_dataset(s, dir / "set"), Error);
  write_dataset(s, dir / "set", true);

  LoadOptions native;
  native.working_resolution = 0;
  native.depth_normalization = DepthNormalization::none;
  const auto back = load_dataset(dir / "set", "", native);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].id == s[i].id);
    CHECK(back[i].tag == s[i].tag);
    CHECK(equal(*back[i].gt, *s[i].gt));
    CHECK((back[i].depth.values() - s[i].depth.values()).abs().maxCoeff() <= 1.0f / 65535.0f);
    for (int c = 0; c < 3; ++c) {
      CHECK((back[i].rgb.channels[c] - s[i].rgb.channels[c]).abs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
    }
  }

  LoadOptions resized;
  resized.working_resolution = 16;
  const auto small = load_dataset(dir / "set", "", resized);
  CHECK(small[0].height() == 16);
  CHECK(small[0].gt->width() == 16);
}

TEST_CASE("dataset loading: GT binarisation, splits and missing parts") {
  const auto dir = scratch_dir("dataset_fixture");
  const auto root = dir / "data" / "test";
  for (const char* sub : {"RGB", "depth", "GT"}) std::filesystem::create_directories(root / sub);
  save_map(ScalarMap::constant(4, 4, 0.5f), root / "RGB" / "a.png");
  save_map(map_of({{0, 1, 0, 1}, {0, 1, 0, 1}, {0, 1, 0, 1}, {0, 1, 0, 1}}), root / "depth" / "a.png");
  save_map(map_of({{100 / 255.f, 200 / 255.f, 0, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}), root / "GT" / "a.png");
  LoadOptions o;
  o.working_resolution = 0;
  o.invert_depth = true;
  const auto got = load_dataset(dir / "data", "test", o);
  REQUIRE(got.size() == 1);
  CHECK(got[0].gt->values()(0, 0) == 0.0f);
  CHECK(got[0].gt->values()(0, 1) == 1.0f);
  CHECK(got[0].depth(0, 0) == 1.0f);
  CHECK(got[0].rgb.channels[1](2, 2) == doctest::Approx(128 / 255.0f));

  save_map(ScalarMap::constant(4, 4, 0.5f), root / "RGB" / "b.png");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "data", "test", o), doctest::Contains("b has no depth"), Error);
  save_map(ScalarMap::constant(4, 4, 0.5f), root / "depth" / "b.png");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "data", "test", o), doctest::Contains("b has no GT"), Error);
  std::filesystem::remove_all(root / "GT");
  CHECK_THROWS_WITH_AS(load_dataset(dir / "data", "test", o), doctest::Contains("GT/"), Error);
  o.allow_missing_gt = true;
  const auto no_gt = load_dataset(dir / "data", "test", o);
  CHECK(no_gt.size() == 2);
  CHECK_FALSE(no_gt[0].gt.has_value());
  CHECK_THROWS_AS(load_dataset(dir / "data", "train", o), Error);
}

TEST_CASE("map directories strip suffixes") {
  const auto dir = scratch_dir("mapdir");
  save_map(ScalarMap::constant(2, 2, 1.0f), dir / "x_pgt.png");
  save_map(ScalarMap::constant(2, 2, 0.0f), dir / "y_pgt.png");
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto maps = load_map_dir(dir, "_pgt");
  CHECK(maps.size() == 2);
  CHECK(maps.count("x") == 1);
  CHECK(list_images(dir).size() == 2);
  CHECK(dir_empty(dir / "missing"));
  CHECK_FALSE(dir_empty(dir));
}
