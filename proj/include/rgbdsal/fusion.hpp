// Omega-guided fusion: map-level blending, feature-level side-output fusion,
// spatial attention and the recursive multi-scale decoder.
#pragma once

#include "rgbdsal/core.hpp"
#include "rgbdsal/nn/init.hpp"
#include "rgbdsal/nn/ops.hpp"

#include <array>
#include <string>

namespace rgbdsal {

/// Channel count of every side-output and fused feature block.
inline constexpr int kSideChannels = 64;

/// How paired side-outputs are merged into the fused blocks M1..M4.
enum class FusionMode { add, con, omega };

FusionMode parse_fusion_mode(const std::string& s);
std::string to_string(FusionMode mode);

/// omega * dsal + (1 - omega) * rgbsal, per pixel.
ScalarMap simple_fusion(const ScalarMap& omega, const ScalarMap& dsal, const ScalarMap& rgbsal);

/// omega resized to the side-output resolution, then broadcast over channels:
/// M = omega * d_side + (1 - omega) * rgb_side.
template <typename T>
nn::Var<T> feature_fusion(nn::Graph<T>& g, nn::Var<T> omega, nn::Var<T> d_side, nn::Var<T> rgb_side) {
  const auto& d = g.value(d_side);
  const auto& r = g.value(rgb_side);
  if (!d.same_shape(r)) throw_invariant("feature_fusion: channel mismatch " + d.shape() + " vs " + r.shape());
  auto w = nn::resize_bilinear(g, omega, d.height, d.width);
  return nn::blend(g, w, d_side, rgb_side);
}

/// Value-level feature fusion on plain tensors.
template <typename T>
nn::Tensor<T> feature_fusion(const ScalarMap& omega, const nn::Tensor<T>& d_side, const nn::Tensor<T>& rgb_side) {
  nn::Graph<T> g(false);
  auto out = feature_fusion(g, g.leaf(nn::tensor_from_plane<T>(omega.values())), g.leaf(d_side), g.leaf(rgb_side));
  return g.value(out);
}

/// temp * (1 + sigmoid(h(temp))), h a 1x1 convolution to one channel.
template <typename T>
nn::Var<T> spatial_attention(nn::Graph<T>& g, nn::Var<T> temp, const nn::ConvRef<T>& h) {
  nn::detail::require_finite(g.value(temp), "spatial_attention");
  auto s = nn::sigmoid(g, nn::conv2d(g, temp, h.w, h.b, 1));
  return nn::gate(g, temp, s);
}

/// Side outputs ordered deepest (M1) to shallowest (M4).
template <typename T>
using SideOutputSet = std::array<nn::Var<T>, 4>;

template <typename T>
void validate_side_outputs(const nn::Graph<T>& g, const SideOutputSet<T>& sides) {
  for (int i = 0; i < 4; ++i) {
    const auto& m = g.value(sides[i]);
    if (m.channels != kSideChannels) {
      throw_invariant("side-output M" + std::to_string(i + 1) + " has " + std::to_string(m.channels) +
                      " channels, expected " + std::to_string(kSideChannels));
    }
    if (i > 0) {
      const auto& prev = g.value(sides[i - 1]);
      if (m.height != 2 * prev.height || m.width != 2 * prev.width) {
        throw_invariant("resolution chain broken: M" + std::to_string(i + 1) + " is " + m.shape() + ", M" +
                        std::to_string(i) + " is " + prev.shape());
      }
    }
  }
}

template <typename T>
void add_msf_params(nn::ParameterStore<T>& store, Rng& rng, const std::string& prefix = "msf/") {
  for (int step = 1; step <= 3; ++step) {
    const std::string s = prefix + "step" + std::to_string(step);
    nn::add_conv(store, s + "/conv", 2 * kSideChannels, kSideChannels, 3, rng);
    nn::add_conv(store, s + "/attn", kSideChannels, 1, 1, rng);
  }
  nn::add_conv(store, prefix + "out", kSideChannels, 1, 1, rng);
}

template <typename T>
struct DecodeResult {
  nn::Var<T> logits;
  nn::Var<T> saliency;
};

/// Recursive decode of M1..M4: three rounds of
///   temp <- A(Conv(C(U(prev), M_next)))
/// followed by a 1x1 projection, a sigmoid, and a resize to the working
/// resolution when M4 is coarser than it.
template <typename T>
DecodeResult<T> msf_decode(nn::Graph<T>& g, const SideOutputSet<T>& sides, const nn::ParameterStore<T>& params,
                           int working_resolution, const std::string& prefix = "msf/") {
  validate_side_outputs(g, sides);
  auto temp = sides[0];
  for (int step = 1; step <= 3; ++step) {
    const std::string s = prefix + "step" + std::to_string(step);
    auto c = nn::concat(g, {nn::upsample2(g, temp), sides[step]});
    const auto conv = nn::conv_ref(params, s + "/conv");
    temp = nn::relu(g, nn::conv2d(g, c, conv.w, conv.b, 3));
    temp = spatial_attention(g, temp, nn::conv_ref(params, s + "/attn"));
  }
  const auto out = nn::conv_ref(params, prefix + "out");
  auto logits = nn::conv2d(g, temp, out.w, out.b, 1);
  logits = nn::resize_bilinear(g, logits, working_resolution, working_resolution);
  return {logits, nn::sigmoid(g, logits)};
}

}  // namespace rgbdsal
