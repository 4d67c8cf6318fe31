// Dataset loading, synthetic RGB-D scenes, and map persistence.
#pragma once

#include "rgbdsal/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rgbdsal {

namespace fs = std::filesystem;

enum class DepthMode { clean, noisy, misleading, flat };

DepthMode parse_depth_mode(const std::string& s);
std::string to_string(DepthMode mode);

enum class ShapeFamily { rect, ellipse, polygon };

/// Synthetic scene parameters.
///
/// Each scene holds one salient object plus `distractors` look-alike shapes
/// that only depth can tell apart from it. Object colour contrast is drawn
/// per scene from [contrast_min, contrast_max].
struct SynthSpec {
  std::uint64_t seed = 1;
  int n_samples = 50;
  int size = 64;
  std::vector<ShapeFamily> shapes{ShapeFamily::rect, ShapeFamily::ellipse, ShapeFamily::polygon};
  /// Share of each depth mode; normalised, then turned into exact counts.
  std::map<DepthMode, double> mix{{DepthMode::clean, 0.5}, {DepthMode::misleading, 0.25}, {DepthMode::flat, 0.25}};
  double clutter = 0.5;
  int distractors = 1;
  double contrast_min = 0.05;
  double contrast_max = 0.45;
  /// Object half-extent as a fraction of the canvas; look-alikes are drawn
  /// slightly smaller.
  double object_scale_min = 0.13;
  double object_scale_max = 0.2;

  void validate() const;
};

/// Deterministic in `spec`. Sample ids are `s0000`, `s0001`, ...; the tag
/// holds the depth mode. Clean samples are checked at generation time: the
/// midpoint threshold between object and background depth recovers GT.
std::vector<RgbdSample> synthesize_dataset(const SynthSpec& spec);

/// Exact per-mode sample counts for n samples (largest remainder).
std::map<DepthMode, int> mode_counts(const std::map<DepthMode, double>& mix, int n);

enum class DepthNormalization { min_max, none };

struct LoadOptions {
  /// Square size every sample is resized to; 0 keeps the native size.
  int working_resolution = 64;
  DepthNormalization depth_normalization = DepthNormalization::min_max;
  /// For disparity-style maps where larger means farther.
  bool invert_depth = false;
  /// When false, a missing GT/ folder is an error.
  bool allow_missing_gt = false;
};

/// Reads `root/[split/]{RGB,depth,GT}/` with matching file stems, sorted by
/// id. Depth may be 8- or 16-bit; GT is binarised at 127.5/255. A `meta.csv`
/// with `id,tag` rows, when present, fills the sample tags.
std::vector<RgbdSample> load_dataset(const fs::path& root, const std::string& split = "",
                                     const LoadOptions& opts = {});

/// Writes the layout read by load_dataset (8-bit RGB and GT, 16-bit depth,
/// meta.csv). Refuses a non-empty directory unless `force`.
void write_dataset(const std::vector<RgbdSample>& samples, const fs::path& root, bool force = false);

/// 8-bit grayscale PNG; values are rounded to the nearest level.
void save_map(const ScalarMap& m, const fs::path& path);
/// Any single-channel image, scaled by its type's maximum.
ScalarMap load_map(const fs::path& path);
BinaryMask load_mask(const fs::path& path);

/// All images in `dir`, keyed by file stem. A `suffix` such as "_pgt" is
/// stripped from stems that end with it.
std::map<std::string, ScalarMap> load_map_dir(const fs::path& dir, const std::string& suffix = "");
std::map<std::string, BinaryMask> load_mask_dir(const fs::path& dir);

/// Image files in `dir` (png, jpg, jpeg, bmp), sorted by name.
std::vector<fs::path> list_images(const fs::path& dir);

/// True when `dir` is missing or has no entries.
bool dir_empty(const fs::path& dir);

}  // namespace rgbdsal
