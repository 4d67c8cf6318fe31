#include "gradcheck.hpp"
#include "helpers.hpp"

#include "doctest.h"
#include "rgbdsal/data_io.hpp"
#include "rgbdsal/networks.hpp"

#include <cmath>
#include <limits>

using namespace rgbdsal;
using namespace rgbdsal::testing;

namespace {

std::vector<RgbdSample> tiny_samples(int n, int size, std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.seed = seed;
  spec.n_samples = n;
  spec.size = size;
  return synthesize_dataset(spec);
}

nn::Tensor<double> plane_tensor(const Plane<float>& p) { return nn::tensor_from_plane<double>(p); }

}  // namespace

TEST_CASE("encoder pyramid levels halve") {
  const auto s = tiny_samples(1, 64)[0];
  const auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 64, 1);
  nn::Graph<float> g(false);
  const auto pyr = encoder_forward(g, b.params, "rgb/", g.leaf(input_tensor<float>(s, Stream::rgb)), 3);
  const std::array<int, 5> sizes{64, 32, 16, 8, 4};
  for (int k = 0; k < 5; ++k) {
    CHECK(g.value(pyr.levels[k]).height == sizes[k]);
    CHECK(g.value(pyr.levels[k]).channels == b.backbone.widths[k]);
  }
  CHECK_THROWS_AS(encoder_forward(g, b.params, "rgb/", g.leaf(input_tensor<float>(s, Stream::dca)), 3), Error);
}

TEST_CASE("subnet outputs have the documented shapes and ranges") {
  const auto s = tiny_samples(1, 32)[0];
  auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 32, 2);
  nn::Graph<float> g(false);
  const auto out = full_forward(g, b, s);
  const std::array<int, 4> side_sizes{4, 8, 16, 32};
  for (int i = 0; i < 4; ++i) {
    CHECK(g.value(out.rgb.side_outputs[i]).channels == kSideChannels);
    CHECK(g.value(out.rgb.side_outputs[i]).height == side_sizes[i]);
    CHECK(g.value(out.depth.side_outputs[i]).height == side_sizes[i]);
  }
  for (auto v : {out.rgb.saliency, out.depth.saliency, out.dca.omega, out.final_map}) {
    const auto& t = g.value(v);
    CHECK(t.height == 32);
    CHECK(t.width == 32);
    CHECK(t.data.minCoeff() >= 0.0f);
    CHECK(t.data.maxCoeff() <= 1.0f);
  }
}

TEST_CASE("forward passes are deterministic") {
  const auto s = tiny_samples(1, 32)[0];
  const auto b1 = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 32, 5);
  const auto b2 = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 32, 5);
  const auto m1 = predict_all(b1, s), m2 = predict_all(b1, s), m3 = predict_all(b2, s);
  CHECK(equal(m1.final_map, m2.final_map));
  CHECK(equal(m1.omega, m2.omega));
  CHECK(equal(m1.final_map, m3.final_map));
}

TEST_CASE("parameter count of the toy configuration") {
  auto conv = [](long ci, long co, long k) { return co * (ci * k * k + 1); };
  auto subnet = [&](long c, bool sides) {
    const std::array<long, 5> w{16, 32, 64, 64, 64};
    long n = 0, ci = c;
    for (long x : w) {
      n += conv(ci, x, 3) + conv(x, x, 3);
      ci = x;
    }
    n += conv(64, 32, 3);
    for (int k = 4; k >= 1; --k) n += conv(w[k - 1] + 32, 32, 3);
    n += 2 * conv(32, 32, 3) + conv(32, 1, 1);
    if (sides) n += 4 * conv(32, 64, 1);
    return n;
  };
  long expected = subnet(3, true) + subnet(1, true) + subnet(4, false);
  for (long x : {16, 32, 64, 64, 64}) expected += conv(x, x, 1);
  expected += 4 * conv(128, 64, 1) + conv(256, 1, 1) + 3 * (conv(128, 64, 3) + conv(64, 1, 1)) + conv(64, 1, 1);

  const auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 64, 1);
  CHECK(static_cast<long>(b.params.scalar_count()) == expected);
  CHECK(b.params.scalar_count() == 1318872u);
  CHECK(b.params.scalar_count("rgb/") == 352913u);
  CHECK(b.params.scalar_count("d/") == 352625u);
  CHECK(b.params.scalar_count("dca/") == 344609u);
}

TEST_CASE("cross-connections gate the depth influence on RGB") {
  auto samples = tiny_samples(1, 32);
  auto s = samples[0];
  auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 32, 3);
  Rng rng(4);
  for (auto& [name, p] : b.params) {
    if (name.rfind("cross/", 0) == 0 && name.back() == 'w') {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<float>(rng.normal() * 0.2);
    }
  }
  auto other = s;
  Plane<float> d = s.depth.values();
  d(5, 7) = d(5, 7) > 0.5f ? 0.0f : 1.0f;
  other.depth = ScalarMap(d);

  b.cross_connections_enabled = false;
  CHECK(equal(predict_streams(b, s).rgbsal, predict_streams(b, other).rgbsal));
  b.cross_connections_enabled = true;
  CHECK_FALSE(equal(predict_streams(b, s).rgbsal, predict_streams(b, other).rgbsal));
}

TEST_CASE("zero-initialised cross-connections leave the RGB stream unchanged") {
  const auto s = tiny_samples(1, 32)[0];
  auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 32, 3);
  const auto before = predict_streams(b, s).rgbsal;
  b.cross_connections_enabled = true;
  CHECK(equal(predict_streams(b, s).rgbsal, before));
}

TEST_CASE("decoder output is sensitive to encoder activations") {
  const auto s = tiny_samples(1, 16)[0];
  const auto b = make_bundle<double>(BackboneConfig{}, ArchConfig{}, 16, 6);
  auto run = [&](double delta) {
    nn::Graph<double> g(false);
    auto pyr = encoder_forward(g, b.params, "rgb/", g.leaf(input_tensor<double>(s, Stream::rgb)), 3);
    auto lvl = g.value(pyr.levels[2]);
    lvl.data(3, 5) += delta;
    pyr.levels[2] = g.leaf(lvl);
    return g.value(decoder_forward(g, b.params, "rgb/", pyr, true).saliency).data;
  };
  CHECK((run(0.5) - run(0.0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("wrong working resolution is rejected") {
  const auto s = tiny_samples(1, 32)[0];
  const auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 16, 1);
  CHECK_THROWS_AS(predict_all(b, s), Error);
  CHECK_THROWS_AS(make_bundle<float>(BackboneConfig{}, ArchConfig{}, 24, 1), Error);
}

TEST_CASE("dca_loss and saliency_loss analytic values") {
  constexpr double eps = 1e-7;
  const auto half = ScalarMap::constant(4, 4, 0.5f);
  CHECK(dca_loss(half, ScalarMap::constant(4, 4, 1.0f)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Rng rng(7);
  CHECK(dca_loss(half, random_map(rng, 4, 4)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(saliency_loss(half, random_mask(rng, 4, 4)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const auto targets = map_of({{static_cast<float>(eps), static_cast<float>(1 - eps)}});
  CHECK(dca_loss(targets, targets) <= 2 * eps * std::abs(std::log(eps)) + 1e-9);

  const auto gt = random_mixed_mask(rng, 6, 6);
  CHECK(saliency_loss(gt.map(), gt) < 1e-6);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 4; ++k) {
    const float t = k / 4.0f;
    const ScalarMap pred(Plane<float>(0.5f * (1.0f - t) + t * gt.values()));
    const double l = saliency_loss(pred, gt);
    CHECK(l < prev);
    prev = l;
  }
  CHECK_THROWS_AS(dca_loss(half, ScalarMap(3, 4)), Error);
}

TEST_CASE("gradient check: dca loss through the DCA subnet") {
  const auto s = tiny_samples(1, 16, 3)[0];
  auto b = make_bundle<double>(BackboneConfig{}, ArchConfig{}, 16, 9);
  Rng rng(10);
  const auto pgt = plane_tensor(random_map(rng, 16, 16).values());
  auto loss = [&](nn::Graph<double>& g) { return nn::bce_with_logits(g, dca_forward(g, b, s).logits, pgt); };
  const auto r = check_gradients(b, "dca/", 10, rng, loss);
  CHECK(r.worst < 1e-3);
}

TEST_CASE("gradient check: saliency loss through the RGB subnet with cross-connections") {
  const auto s = tiny_samples(1, 16, 4)[0];
  auto b = make_bundle<double>(BackboneConfig{}, ArchConfig{}, 16, 11);
  b.cross_connections_enabled = true;
  Rng rng(12);
  for (auto& [name, p] : b.params) {
    if (name.rfind("cross/", 0) == 0) p.value.setConstant(0.05);
  }
  const auto gt = plane_tensor(s.gt->values());
  auto loss = [&](nn::Graph<double>& g) { return nn::bce_with_logits(g, rgb_subnet_forward(g, b, s).logits, gt); };
  CHECK(check_gradients(b, "rgb/", 10, rng, loss).worst < 1e-3);
  CHECK(check_gradients(b, "cross/", 5, rng, loss).worst < 1e-3);
}

TEST_CASE("gradient check: final loss through the MSF head and live omega") {
  const auto s = tiny_samples(1, 16, 5)[0];
  auto b = make_bundle<double>(BackboneConfig{}, ArchConfig{}, 16, 13);
  Rng rng(14);
  const auto gt = plane_tensor(s.gt->values());
  auto loss = [&](nn::Graph<double>& g) { return nn::bce_with_logits(g, full_forward(g, b, s).final_logits, gt); };
  CHECK(check_gradients(b, "msf/", 6, rng, loss).worst < 1e-3);
  CHECK(check_gradients(b, "dca/", 6, rng, loss).worst < 1e-3);
  CHECK(check_gradients(b, "d/", 6, rng, loss).worst < 1e-3);
}

TEST_CASE("detached omega receives no gradient from the final loss") {
  const auto s = tiny_samples(1, 16, 5)[0];
  ArchConfig arch;
  arch.detach_omega = true;
  auto b = make_bundle<double>(BackboneConfig{}, arch, 16, 13);
  const auto gt = plane_tensor(s.gt->values());
  b.params.zero_grad();
  nn::Graph<double> g(true);
  g.backward(nn::bce_with_logits(g, full_forward(g, b, s).final_logits, gt));
  double dca = 0.0, msf = 0.0;
  for (const auto& [name, p] : b.params) {
    if (name.rfind("dca/", 0) == 0) dca += p.grad.cwiseAbs().sum();
    if (name.rfind("msf/", 0) == 0) msf += p.grad.cwiseAbs().sum();
  }
  CHECK(dca == 0.0);
  CHECK(msf > 0.0);
}

TEST_CASE("fusion modes and heads") {
  const auto s = tiny_samples(1, 16)[0];
  for (const char* name : {"simple", "omega-rgb-d", "omega-rgbd-d", "msf-rgb-d", "msf-rgbd-d"}) {
    for (FusionMode fm : {FusionMode::add, FusionMode::con, FusionMode::omega}) {
      const auto arch = parse_arch(name, fm);
      CHECK(arch_name(arch) == name);
      auto b = make_bundle<float>(BackboneConfig{}, arch, 16, 1);
      b.cross_connections_enabled = arch.cross_connections;
      const auto m = predict_all(b, s);
      CHECK(m.final_map.height() == 16);
    }
  }
  CHECK_THROWS_AS(parse_arch("msf"), Error);
  CHECK(parse_fusion_mode("con") == FusionMode::con);
  CHECK_THROWS_AS(parse_fusion_mode("mul"), Error);
}

TEST_CASE("stage flags are monotone") {
  auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 16, 1);
  CHECK_THROWS_WITH_AS(b.mark_stage_done(2), doctest::Contains("stage ordering violated"), Error);
  b.mark_stage_done(1);
  CHECK_THROWS_AS(b.mark_stage_done(1), Error);
  CHECK_THROWS_AS(b.mark_stage_done(3), Error);
  b.mark_stage_done(2);
  CHECK(b.last_stage() == 2);
}

TEST_CASE("load_pretrained_encoder replicates the RGB kernels") {
  Rng rng(15);
  nn::ParameterStore<float> enc;
  const std::array<int, 5> widths{16, 32, 64, 64, 64};
  int cin = 3;
  for (int k = 1; k <= 5; ++k) {
    nn::add_conv(enc, "enc" + std::to_string(k) + "/conv1", cin, widths[k - 1], 3, rng);
    nn::add_conv(enc, "enc" + std::to_string(k) + "/conv2", widths[k - 1], widths[k - 1], 3, rng);
    cin = widths[k - 1];
  }
  auto b = make_bundle<float>(BackboneConfig{}, ArchConfig{}, 16, 1);
  load_pretrained_encoder(b, enc);
  const auto& w = enc.at("enc1/conv1/w").value;
  const DenseMatrix<float> mean = (w.middleCols(0, 9) + w.middleCols(9, 9) + w.middleCols(18, 9)) / 3.0f;
  CHECK(b.params.at("rgb/enc1/conv1/w").value == w);
  CHECK(b.params.at("d/enc1/conv1/w").value == mean);
  CHECK(b.params.at("dca/enc1/conv1/w").value.middleCols(0, 27) == w);
  CHECK(b.params.at("dca/enc1/conv1/w").value.middleCols(27, 9) == mean);
  CHECK(b.params.at("d/enc3/conv2/w").value == enc.at("enc3/conv2/w").value);

  nn::ParameterStore<float> wrong;
  nn::add_conv(wrong, "enc1/conv1", 3, 8, 3, rng);
  CHECK_THROWS_AS(load_pretrained_encoder(b, wrong), Error);
}
