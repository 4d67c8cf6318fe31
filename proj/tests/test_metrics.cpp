#include "helpers.hpp"

#include "doctest.h"
#include "rgbdsal/metrics.hpp"

#include <cmath>
#include <numeric>

using namespace rgbdsal;
using namespace rgbdsal::testing;

namespace {

// Fixture builders mirrored in tests/oracles/metric_oracle.py, which produced
// the pinned values below.
ScalarMap hashed_map(int h, int w, int k) {
  Plane<float> p(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) p(r, c) = static_cast<float>(((r * 31 + c * 17 + k * 7) % 23) / 22.0);
  }
  return ScalarMap(p);
}

BinaryMask square_gt(int n, int top, int left, int size) {
  Plane<float> p = Plane<float>::Zero(n, n);
  p.block(top, left, size, size).setOnes();
  return BinaryMask(ScalarMap(p));
}

ScalarMap shifted_pred(int n) {
  Plane<float> p = Plane<float>::Constant(n, n, 0.1f);
  p.block(6, 5, 6, 6).setConstant(0.9f);
  return ScalarMap(p);
}

void five_image_fixture(std::map<std::string, ScalarMap>& preds, std::map<std::string, BinaryMask>& gts) {
  for (int k = 0; k < 5; ++k) {
    const auto gt = square_gt(12, 2 + k % 3, 3 + k % 2, 4 + k);
    const Plane<float> p = hashed_map(12, 12, k).values() * 0.5f + gt.values() * 0.5f;
    preds.emplace("img" + std::to_string(k), ScalarMap(p));
    gts.emplace("img" + std::to_string(k), gt);
  }
}

double brute_mean_f(const ScalarMap& s, const BinaryMask& gt) {
  double total = 0.0;
  for (int k = 0; k < 256; ++k) {
    const double t = k / 255.0;
    double tp = 0, on = 0, pos = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const bool pred = s.values().data()[i] > t;
      const bool g = gt.values().data()[i] > 0.5f;
      tp += pred && g;
      on += pred;
      pos += g;
    }
    const double p = on > 0 ? tp / on : 0.0;
    const double r = tp / pos;
    total += (0.3 * p + r) == 0.0 ? 0.0 : 1.3 * p * r / (0.3 * p + r);
  }
  return total / 256.0;
}

}  // namespace

TEST_CASE("mae identities") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto gt = random_mask(rng, 6, 7);
    CHECK(mae(gt.map(), gt) == 0.0);
    CHECK(mae(complement(gt.map()), gt) == 1.0);
    CHECK(mae(ScalarMap::constant(6, 7, 0.5f), gt) == 0.5);
    const auto s = random_map(rng, 6, 7);
    CHECK(mae(s, gt) == doctest::Approx(mae(complement(s), gt.complement())).epsilon(1e-6));
  }
  CHECK_THROWS_AS(mae(ScalarMap(2, 3), mask_of({{1, 0}})), Error);
}

TEST_CASE("precision_recall fixtures") {
  const auto gt = mask_of({{1, 1}, {0, 0}});
  auto pr = precision_recall(ScalarMap::constant(2, 2, 1.0f), gt, 0.5);
  CHECK(pr.precision == 0.5);
  CHECK(pr.recall == 1.0);
  pr = precision_recall(gt.map(), gt, 0.3);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
  pr = precision_recall(ScalarMap::constant(2, 2, 0.9f), gt, 1.0);
  CHECK(pr.precision == 0.0);
  CHECK(pr.recall == 0.0);
  CHECK_THROWS_WITH(precision_recall(gt.map(), mask_of({{0, 0}, {0, 0}}), 0.5), doctest::Contains("undefined recall"));
}

TEST_CASE("f_measure values and monotonicity") {
  CHECK(std::abs(f_measure(1.0, 0.5) - 0.8125) <= 1e-12);
  CHECK(f_measure(0.8, 0.8) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(f_measure(0.0, 0.7) == 0.0);
  CHECK(f_measure(0.0, 0.0) == 0.0);
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double p = i / 10.0, r = j / 10.0;
      CHECK(f_measure(p, r + 0.1) >= f_measure(p, r));
      CHECK(f_measure(r + 0.1, p) >= f_measure(r, p));
    }
  }
}

TEST_CASE("mean_f equals the explicit threshold loop") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_map(rng, 8, 8);
    const auto gt = random_mixed_mask(rng, 8, 8);
    CHECK(mean_f(s, gt) == brute_mean_f(s, gt));
  }
  const auto gt = random_mixed_mask(rng, 8, 8);
  CHECK(mean_f(gt.map(), gt) >= 255.0 / 256.0);
  CHECK(mean_f(ScalarMap(8, 8), gt) == 0.0);
}

TEST_CASE("s_measure endpoints") {
  Rng rng(3);
  const auto gt = random_mixed_mask(rng, 10, 10);
  CHECK(s_measure(gt.map(), gt) == doctest::Approx(1.0).epsilon(1e-12));
  const auto s = random_map(rng, 10, 10);
  CHECK(s_measure(s, gt, 1.0) == doctest::Approx(s_object(s, gt)).epsilon(1e-12));
  CHECK(s_measure(s, gt, 0.0) == doctest::Approx(std::max(0.0, s_region(s, gt))).epsilon(1e-12));
  const auto zeros = mask_of({{0, 0}, {0, 0}});
  CHECK(s_measure(map_of({{0.25f, 0.25f}, {0.25f, 0.25f}}), zeros) == doctest::Approx(0.75));
  CHECK(s_measure(map_of({{0.25f, 0.25f}, {0.25f, 0.25f}}), zeros.complement()) == doctest::Approx(0.25));
}

TEST_CASE("pinned reference values") {
  const auto gt = square_gt(16, 4, 4, 8);
  const auto pred = shifted_pred(16);
  CHECK(s_measure(pred, gt) == doctest::Approx(0.76620050414500684).epsilon(1e-6));
  CHECK(s_object(pred, gt) == doctest::Approx(0.9073835181801081).epsilon(1e-6));
  CHECK(s_region(pred, gt) == doctest::Approx(0.6250174901099057).epsilon(1e-6));
  CHECK(e_measure(pred, gt) == doctest::Approx(0.79536937923461404).epsilon(1e-6));
  CHECK(mean_f(pred, gt) == doctest::Approx(0.70631635490394418).epsilon(1e-9));
  CHECK(std::abs(e_measure(complement(gt.map()), gt)) < 1e-12);
  CHECK(e_measure(ScalarMap::constant(16, 16, 0.5f), gt) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(e_measure(gt.map(), gt) == doctest::Approx(1.0).epsilon(1e-12));
  const auto hashed = hashed_map(16, 16, 3);
  CHECK(s_measure(hashed, gt) == doctest::Approx(0.32255327250218979).epsilon(1e-6));
  CHECK(e_measure(hashed, gt) == doctest::Approx(0.36870351892995434).epsilon(1e-6));
}

TEST_CASE("omega diagnostics fixtures") {
  const auto gt = mask_of({{1, 0}, {0, 0}});
  const auto omega = map_of({{0.9f, 0.9f}, {0.5f, 0.9f}});
  const auto dsal = map_of({{0.5f, 0.05f}, {0.2f, 0.5f}});
  CHECK(*omega1(omega, gt) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(*omega2(omega, gt, dsal) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(*omega1(map_of({{0.9f, 0.1f}, {0.1f, 0.1f}}), gt) == 0.0);
  CHECK(*omega1(map_of({{0.1f, 0.9f}, {0.1f, 0.1f}}), gt) == 1.0);
  CHECK_FALSE(omega1(ScalarMap::constant(2, 2, 0.8f), gt).has_value());
  CHECK(*omega2(omega, gt, ScalarMap::constant(2, 2, 0.1f)) == 0.0);
  CHECK(*omega2(omega, gt, ScalarMap::constant(2, 2, 0.0f)) == 1.0);
  CHECK_FALSE(omega2(map_of({{0.9f, 0.1f}, {0.1f, 0.1f}}), gt, dsal).has_value());
}

TEST_CASE("omega diagnostics stay in range") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto om = random_map(rng, 5, 5);
    const auto gt = random_mask(rng, 5, 5);
    const auto d = random_map(rng, 5, 5);
    if (auto v = omega1(om, gt)) CHECK((*v >= 0.0 && *v <= 1.0));
    if (auto v = omega2(om, gt, d)) CHECK((*v >= 0.0 && *v <= 1.0));
  }
}

TEST_CASE("pixelwise metrics are permutation invariant") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_map(rng, 6, 6);
    const auto gt = random_mixed_mask(rng, 6, 6);
    std::vector<int> perm(36);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Plane<float> ps(6, 6), pg(6, 6);
    for (int i = 0; i < 36; ++i) {
      ps.data()[i] = s.values().data()[perm[i]];
      pg.data()[i] = gt.values().data()[perm[i]];
    }
    const ScalarMap s2(ps);
    const BinaryMask g2{ScalarMap(pg)};
    CHECK(mae(s2, g2) == doctest::Approx(mae(s, gt)).epsilon(1e-12));
    CHECK(mean_f(s2, g2) == doctest::Approx(mean_f(s, gt)).epsilon(1e-12));
    CHECK(s_object(s2, g2) == doctest::Approx(s_object(s, gt)).epsilon(1e-9));
    CHECK(e_measure(s2, g2) >= 0.0);
  }
}

TEST_CASE("evaluate_dataset aggregation") {
  std::map<std::string, ScalarMap> preds;
  std::map<std::string, BinaryMask> gts;
  five_image_fixture(preds, gts);
  EvalOptions opts;
  opts.dataset = "fixture";
  opts.with_e_measure = true;
  const auto r = evaluate_dataset(preds, gts, opts);
  CHECK(r.n == 5);
  CHECK(r.sm == doctest::Approx(0.74603187445606367).epsilon(1e-6));
  CHECK(r.mean_f == doctest::Approx(0.6280920423749643).epsilon(1e-6));
  CHECK(r.mae == doctest::Approx(0.24583333402665125).epsilon(1e-6));
  CHECK(*r.e_measure == doctest::Approx(0.70073069351496509).epsilon(1e-6));
  CHECK(csv_row(r) == "fixture,0.746032,0.628092,0.245833,0.700731,,,5,0");

  std::map<std::string, ScalarMap> one{{"a", preds.at("img1")}};
  std::map<std::string, BinaryMask> one_gt{{"a", gts.at("img1")}};
  const auto single = evaluate_dataset(one, one_gt);
  CHECK(single.sm == s_measure(preds.at("img1"), gts.at("img1")));
  CHECK(single.mae == mae(preds.at("img1"), gts.at("img1")));
  one.emplace("b", preds.at("img1"));
  one_gt.emplace("b", gts.at("img1"));
  const auto twice = evaluate_dataset(one, one_gt);
  CHECK(twice.sm == doctest::Approx(single.sm).epsilon(1e-15));
  CHECK(twice.mean_f == doctest::Approx(single.mean_f).epsilon(1e-15));

  one_gt.erase("b");
  one_gt.emplace("c", gts.at("img2"));
  CHECK_THROWS_WITH(evaluate_dataset(one, one_gt), doctest::Contains("b"));
}

TEST_CASE("evaluate_dataset counts invalid omega diagnostics") {
  std::map<std::string, ScalarMap> preds{{"x", map_of({{1, 0}, {0, 0}})}, {"y", map_of({{1, 0}, {0, 0}})}};
  std::map<std::string, BinaryMask> gts{{"x", mask_of({{1, 0}, {0, 0}})}, {"y", mask_of({{1, 0}, {0, 0}})}};
  std::map<std::string, ScalarMap> omegas{{"x", map_of({{0.9f, 0.9f}, {0.5f, 0.9f}})},
                                          {"y", ScalarMap::constant(2, 2, 0.1f)}};
  std::map<std::string, ScalarMap> dsals{{"x", map_of({{0.5f, 0.05f}, {0.2f, 0.5f}})}, {"y", ScalarMap(2, 2)}};
  EvalOptions opts;
  opts.omegas = &omegas;
  opts.dsals = &dsals;
  const auto r = evaluate_dataset(preds, gts, opts);
  CHECK(*r.omega1 == doctest::Approx(2.0 / 3.0));
  CHECK(*r.omega2 == doctest::Approx(0.5));
  CHECK(r.invalid_omega_n == 1);
  CHECK(r.invalid_omega1_n == 1);
}

TEST_CASE("csv round trip keeps blanks") {
  MetricReport a;
  a.dataset = "run";
  a.sm = 0.5;
  a.mean_f = 0.25;
  a.mae = 0.125;
  a.n = 3;
  MetricReport b = a;
  b.dataset = "other";
  b.e_measure = 0.75;
  b.omega1 = 0.5;
  b.omega2 = 0.0;
  b.invalid_omega_n = 2;
  const auto text = csv_header() + "\n" + csv_row(a) + "\n" + csv_row(b) + "\n";
  CHECK(csv_header() == "dataset,sm,meanf,mae,emeasure,omega1,omega2,n,invalid_omega_n");
  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dataset == "run");
  CHECK_FALSE(rows[0].e_measure.has_value());
  CHECK_FALSE(rows[0].omega1.has_value());
  CHECK(*rows[1].e_measure == 0.75);
  CHECK(*rows[1].omega2 == 0.0);
  CHECK(rows[1].invalid_omega_n == 2);
  const auto table = format_table(rows);
  CHECK(table.find("Sm") != std::string::npos);
  CHECK(table.find("other") != std::string::npos);
}
