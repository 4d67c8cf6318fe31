// RGB, depth and depth-contribution subnets, their losses, and the fused
// multi-stream forward pass.
#pragma once

#include "rgbdsal/core.hpp"
#include "rgbdsal/fusion.hpp"
#include "rgbdsal/nn/init.hpp"
#include "rgbdsal/nn/ops.hpp"
#include "rgbdsal/random.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace rgbdsal {

/// Encoder widths and decoder width. The default is a five-block toy
/// encoder (two 3x3 convs per block, 2x max-pool between blocks) that trains
/// on a CPU; wider configurations accept pretrained weights via
/// load_pretrained_encoder().
struct BackboneConfig {
  std::string name = "toy";
  std::array<int, 5> widths{16, 32, 64, 64, 64};
  int decoder_width = 32;

  bool operator==(const BackboneConfig&) const = default;
};

/// Head that turns the fused blocks M1..M4 into the final map.
enum class HeadMode {
  simple,     ///< explicit omega blend of the two stream saliency maps
  omega_sum,  ///< all M_i upsampled, concatenated and projected by one 1x1 conv
  msf,        ///< recursive multi-scale decoder with spatial attention
};

struct ArchConfig {
  HeadMode head = HeadMode::msf;
  bool cross_connections = true;
  FusionMode fusion = FusionMode::omega;
  /// Stops gradients of the final loss from reaching the depth contribution
  /// subnet through omega.
  bool detach_omega = false;

  bool operator==(const ArchConfig&) const = default;
};

/// Parses the architecture names used by the CLI: simple, omega-rgb-d,
/// omega-rgbd-d, msf-rgb-d, msf-rgbd-d.
ArchConfig parse_arch(const std::string& name, FusionMode fusion = FusionMode::omega);
std::string arch_name(const ArchConfig& arch);

enum class Stream { rgb, depth, dca };

constexpr int input_channels(Stream s) { return s == Stream::rgb ? 3 : s == Stream::depth ? 1 : 4; }
std::string stream_prefix(Stream s);

/// All trainable state: the three subnets, the cross-connection and fusion
/// convolutions, and the multi-scale head, plus training-stage provenance.
template <typename T>
struct ModelBundle {
  BackboneConfig backbone;
  ArchConfig arch;
  int working_resolution = 64;
  std::array<bool, 4> stages{};
  bool cross_connections_enabled = false;
  /// Epochs finished inside a stage that has not completed yet (0 = none).
  int partial_stage = 0;
  int partial_epochs = 0;
  nn::ParameterStore<T> params;

  bool stage_done(int k) const { return k >= 1 && k <= 4 && stages[k - 1]; }
  int last_stage() const {
    int k = 0;
    while (k < 4 && stages[k]) ++k;
    return k;
  }
  /// Stage k may only follow stages 1..k-1.
  void require_stage_ready(int k) const {
    for (int i = 1; i < k; ++i) {
      if (!stage_done(i)) {
        throw_invariant("stage ordering violated: stage " + std::to_string(k) + " requires stage " +
                        std::to_string(i));
      }
    }
    if (stage_done(k)) throw_invariant("stage ordering violated: stage " + std::to_string(k) + " already done");
  }
  void mark_stage_done(int k) {
    require_stage_ready(k);
    stages[k - 1] = true;
    partial_stage = 0;
    partial_epochs = 0;
  }
};

void validate_working_resolution(int resolution);

namespace detail {

template <typename T>
void add_subnet_params(nn::ParameterStore<T>& store, const std::string& prefix, int in_channels,
                       const BackboneConfig& bb, bool with_sides, Rng& rng) {
  int cin = in_channels;
  for (int k = 1; k <= 5; ++k) {
    const std::string blk = prefix + "enc" + std::to_string(k);
    nn::add_conv(store, blk + "/conv1", cin, bb.widths[k - 1], 3, rng);
    nn::add_conv(store, blk + "/conv2", bb.widths[k - 1], bb.widths[k - 1], 3, rng);
    cin = bb.widths[k - 1];
  }
  const int dw = bb.decoder_width;
  nn::add_conv(store, prefix + "dec5", bb.widths[4], dw, 3, rng);
  for (int k = 4; k >= 1; --k) {
    nn::add_conv(store, prefix + "dec" + std::to_string(k), bb.widths[k - 1] + dw, dw, 3, rng);
  }
  nn::add_conv(store, prefix + "head_f1", dw, dw, 3, rng);
  nn::add_conv(store, prefix + "head_f2", dw, dw, 3, rng);
  nn::add_conv(store, prefix + "head_out", dw, 1, 1, rng);
  if (with_sides) {
    for (int i = 1; i <= 4; ++i) nn::add_conv(store, prefix + "side" + std::to_string(i), dw, kSideChannels, 1, rng);
  }
}

}  // namespace detail

/// Builds a freshly initialised bundle. Cross-connection convolutions start
/// at zero, so enabling them leaves the RGB stream's function unchanged.
template <typename T>
ModelBundle<T> make_bundle(const BackboneConfig& backbone, const ArchConfig& arch, int working_resolution,
                           std::uint64_t seed) {
  validate_working_resolution(working_resolution);
  ModelBundle<T> b;
  b.backbone = backbone;
  b.arch = arch;
  b.working_resolution = working_resolution;
  Rng rng(seed, 0x5eed);
  detail::add_subnet_params(b.params, "rgb/", 3, backbone, true, rng);
  detail::add_subnet_params(b.params, "d/", 1, backbone, true, rng);
  detail::add_subnet_params(b.params, "dca/", 4, backbone, false, rng);
  for (int k = 1; k <= 5; ++k) {
    const int w = backbone.widths[k - 1];
    nn::add_conv(b.params, "cross/" + std::to_string(k), w, w, 1, rng, nn::Init::zeros);
  }
  for (int i = 1; i <= 4; ++i) {
    nn::add_conv(b.params, "fuse_con/" + std::to_string(i), 2 * kSideChannels, kSideChannels, 1, rng);
  }
  nn::add_conv(b.params, "sumhead/out", 4 * kSideChannels, 1, 1, rng);
  add_msf_params(b.params, rng);
  return b;
}

template <typename T>
using Var = nn::Var<T>;

/// Five feature levels, level k at working / 2^(k-1).
template <typename T>
struct EncoderPyramid {
  std::array<Var<T>, 5> levels;
};

template <typename T>
struct SubnetOutput {
  Var<T> logits;
  Var<T> saliency;
  /// Decoder blocks at working/8, /4, /2 and the full-resolution block F.
  std::array<Var<T>, 4> decoder_blocks;
  /// 64-channel projections of decoder_blocks (absent for the DCA subnet).
  std::array<Var<T>, 4> side_outputs;
};

template <typename T>
nn::Tensor<T> input_tensor(const RgbdSample& s, Stream stream) {
  const int h = s.height(), w = s.width();
  nn::Tensor<T> t(input_channels(stream), h, w);
  int c = 0;
  if (stream != Stream::depth) {
    for (; c < 3; ++c) t.plane(c) = s.rgb.channels[c].template cast<T>();
  }
  if (stream != Stream::rgb) t.plane(c) = s.depth.values().template cast<T>();
  return t;
}

/// Runs the five encoder blocks. When `cross` is given (RGB stream with
/// cross-connections), each level k receives a 1x1 projection of the depth
/// encoder's level k added elementwise before it feeds the next block.
template <typename T>
EncoderPyramid<T> encoder_forward(nn::Graph<T>& g, const nn::ParameterStore<T>& params, const std::string& prefix,
                                  Var<T> input, int expected_channels, const EncoderPyramid<T>* cross = nullptr) {
  const auto& in = g.value(input);
  if (in.channels != expected_channels) {
    throw_invariant("encoder '" + prefix + "': channel mismatch, got " + std::to_string(in.channels) +
                    " expected " + std::to_string(expected_channels));
  }
  EncoderPyramid<T> pyr;
  Var<T> x = input;
  for (int k = 1; k <= 5; ++k) {
    const std::string blk = prefix + "enc" + std::to_string(k);
    if (k > 1) x = nn::max_pool2(g, x);
    auto c1 = nn::conv_ref(params, blk + "/conv1");
    x = nn::relu(g, nn::conv2d(g, x, c1.w, c1.b, 3));
    auto c2 = nn::conv_ref(params, blk + "/conv2");
    x = nn::relu(g, nn::conv2d(g, x, c2.w, c2.b, 3));
    if (cross) {
      auto cc = nn::conv_ref(params, "cross/" + std::to_string(k));
      x = nn::add(g, x, nn::conv2d(g, cross->levels[k - 1], cc.w, cc.b, 1));
    }
    pyr.levels[k - 1] = x;
  }
  return pyr;
}

/// Recursive decoder: block_k = Conv(C(E_k, U(block_{k+1}))) from the
/// deepest level upward, then F = Conv(Conv(block_1)) and a 1x1 saliency
/// head. Side-outputs project the last four blocks to 64 channels.
template <typename T>
SubnetOutput<T> decoder_forward(nn::Graph<T>& g, const nn::ParameterStore<T>& params, const std::string& prefix,
                                const EncoderPyramid<T>& pyr, bool with_sides) {
  SubnetOutput<T> out;
  auto d5 = nn::conv_ref(params, prefix + "dec5");
  Var<T> d = nn::relu(g, nn::conv2d(g, pyr.levels[4], d5.w, d5.b, 3));
  for (int k = 4; k >= 1; --k) {
    auto up = nn::upsample2(g, d);
    auto cat = nn::concat(g, {pyr.levels[k - 1], up});
    auto conv = nn::conv_ref(params, prefix + "dec" + std::to_string(k));
    d = nn::relu(g, nn::conv2d(g, cat, conv.w, conv.b, 3));
    if (k >= 2) out.decoder_blocks[4 - k] = d;
  }
  auto f1 = nn::conv_ref(params, prefix + "head_f1");
  auto f2 = nn::conv_ref(params, prefix + "head_f2");
  Var<T> f = nn::relu(g, nn::conv2d(g, d, f1.w, f1.b, 3));
  f = nn::relu(g, nn::conv2d(g, f, f2.w, f2.b, 3));
  out.decoder_blocks[3] = f;
  auto head = nn::conv_ref(params, prefix + "head_out");
  out.logits = nn::conv2d(g, f, head.w, head.b, 1);
  out.saliency = nn::sigmoid(g, out.logits);
  if (with_sides) {
    for (int i = 0; i < 4; ++i) {
      auto s = nn::conv_ref(params, prefix + "side" + std::to_string(i + 1));
      out.side_outputs[i] = nn::conv2d(g, out.decoder_blocks[i], s.w, s.b, 1);
    }
  }
  return out;
}

template <typename T>
void require_working_resolution(const ModelBundle<T>& bundle, const RgbdSample& s) {
  if (s.height() != bundle.working_resolution || s.width() != bundle.working_resolution) {
    throw_invariant("sample '" + s.id + "' is " + shape_string(s.height(), s.width()) + ", working resolution is " +
                    std::to_string(bundle.working_resolution));
  }
}

template <typename T>
SubnetOutput<T> d_subnet_forward(nn::Graph<T>& g, const ModelBundle<T>& b, const RgbdSample& s,
                                 EncoderPyramid<T>* pyramid_out = nullptr) {
  require_working_resolution(b, s);
  auto in = g.leaf(input_tensor<T>(s, Stream::depth));
  auto pyr = encoder_forward(g, b.params, "d/", in, 1);
  if (pyramid_out) *pyramid_out = pyr;
  return decoder_forward(g, b.params, "d/", pyr, true);
}

/// RGB stream. With cross-connections enabled the depth encoder also runs
/// (or `depth_pyramid` is reused) and feeds every RGB encoder level.
template <typename T>
SubnetOutput<T> rgb_subnet_forward(nn::Graph<T>& g, const ModelBundle<T>& b, const RgbdSample& s,
                                   const EncoderPyramid<T>* depth_pyramid = nullptr) {
  require_working_resolution(b, s);
  auto in = g.leaf(input_tensor<T>(s, Stream::rgb));
  std::optional<EncoderPyramid<T>> own;
  const EncoderPyramid<T>* cross = nullptr;
  if (b.cross_connections_enabled) {
    if (!depth_pyramid) {
      own = encoder_forward(g, b.params, "d/", g.leaf(input_tensor<T>(s, Stream::depth)), 1);
      depth_pyramid = &*own;
    }
    cross = depth_pyramid;
  }
  auto pyr = encoder_forward(g, b.params, "rgb/", in, 3, cross);
  return decoder_forward(g, b.params, "rgb/", pyr, true);
}

template <typename T>
struct DcaOutput {
  Var<T> logits;
  Var<T> omega;
};

/// omega for the 4-channel RGB+D input.
template <typename T>
DcaOutput<T> dca_forward(nn::Graph<T>& g, const ModelBundle<T>& b, const RgbdSample& s) {
  require_working_resolution(b, s);
  auto in = g.leaf(input_tensor<T>(s, Stream::dca));
  auto pyr = encoder_forward(g, b.params, "dca/", in, 4);
  auto out = decoder_forward(g, b.params, "dca/", pyr, false);
  return {out.logits, out.saliency};
}

template <typename T>
struct FusedOutput {
  SubnetOutput<T> rgb;
  SubnetOutput<T> depth;
  DcaOutput<T> dca;
  /// Omega as seen by the fusion (detached when the arch asks for it).
  Var<T> omega;
  std::array<Var<T>, 4> fused;
  /// Final map; `final_logits` is invalid for the simple head, whose output
  /// is a blend of probabilities.
  Var<T> final_map;
  Var<T> final_logits;
};

/// The whole network: both streams, omega, feature fusion of the side
/// outputs, and the head chosen by bundle.arch.
template <typename T>
FusedOutput<T> full_forward(nn::Graph<T>& g, const ModelBundle<T>& b, const RgbdSample& s) {
  FusedOutput<T> out;
  EncoderPyramid<T> dpyr;
  out.depth = d_subnet_forward(g, b, s, &dpyr);
  out.rgb = rgb_subnet_forward(g, b, s, &dpyr);
  out.dca = dca_forward(g, b, s);
  out.omega = b.arch.detach_omega ? nn::detach(g, out.dca.omega) : out.dca.omega;

  if (b.arch.head == HeadMode::simple) {
    out.final_map = nn::blend(g, out.omega, out.depth.saliency, out.rgb.saliency);
    return out;
  }
  for (int i = 0; i < 4; ++i) {
    const auto ds = out.depth.side_outputs[i];
    const auto rs = out.rgb.side_outputs[i];
    switch (b.arch.fusion) {
      case FusionMode::omega:
        out.fused[i] = feature_fusion(g, out.omega, ds, rs);
        break;
      case FusionMode::add:
        out.fused[i] = nn::add(g, ds, rs);
        break;
      case FusionMode::con: {
        auto c = nn::conv_ref(b.params, "fuse_con/" + std::to_string(i + 1));
        out.fused[i] = nn::conv2d(g, nn::concat(g, {ds, rs}), c.w, c.b, 1);
        break;
      }
    }
  }
  if (b.arch.head == HeadMode::msf) {
    auto dec = msf_decode(g, out.fused, b.params, b.working_resolution);
    out.final_logits = dec.logits;
    out.final_map = dec.saliency;
  } else {
    std::vector<Var<T>> ups;
    for (auto m : out.fused) ups.push_back(nn::resize_bilinear(g, m, b.working_resolution, b.working_resolution));
    auto c = nn::conv_ref(b.params, "sumhead/out");
    out.final_logits = nn::conv2d(g, nn::concat(g, ups), c.w, c.b, 1);
    out.final_map = nn::sigmoid(g, out.final_logits);
  }
  return out;
}

/// Value-level predictions of every stream for one sample.
struct StreamMaps {
  ScalarMap rgbsal;
  ScalarMap dsal;
  ScalarMap omega;
  ScalarMap final_map;
};

/// RGB and depth saliency only (cheaper than predict_all).
StreamMaps predict_streams(const ModelBundle<float>& bundle, const RgbdSample& s);
StreamMaps predict_all(const ModelBundle<float>& bundle, const RgbdSample& s);
ScalarMap predict_omega(const ModelBundle<float>& bundle, const RgbdSample& s);

/// Mean soft-target binary cross-entropy, log arguments clamped by 1e-7.
double dca_loss(const ScalarMap& omega, const ScalarMap& pgt);
double saliency_loss(const ScalarMap& pred, const BinaryMask& gt);

/// Copies a pretrained encoder (names `enc<k>/conv<j>/{w,b}`, 3-channel
/// first layer) into all three subnets. The depth stream gets the mean of
/// the RGB kernels; the 4-channel stream gets RGB plus that mean as its
/// fourth channel.
void load_pretrained_encoder(ModelBundle<float>& bundle, const nn::ParameterStore<float>& encoder);

}  // namespace rgbdsal
