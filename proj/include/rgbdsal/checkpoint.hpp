// Versioned binary container for model parameters and training state.
//
// Layout: 8-byte magic "RGBDSAL\0", u32 format version, u64 header length,
// a JSON header, then the raw little-endian float32 payload in header order
// (value, then both Adam moments, per tensor).
#pragma once

#include "rgbdsal/networks.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace rgbdsal {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes atomically: the data goes to a temporary file that is renamed.
void save_checkpoint(const ModelBundle<float>& bundle, const std::filesystem::path& path);

/// Loads and validates version, backbone, tensor names and shapes. On any
/// error nothing is returned; there is no partially loaded state.
ModelBundle<float> load_checkpoint(const std::filesystem::path& path);

/// Bare parameter file, used for pretrained encoders (`enc<k>/conv<j>/{w,b}`).
void save_parameters(const nn::ParameterStore<float>& params, const std::filesystem::path& path);
nn::ParameterStore<float> load_parameters(const std::filesystem::path& path);

/// "stage<k>.ckpt"
std::string stage_checkpoint_name(int stage);

}  // namespace rgbdsal
