// Shared generators and fixtures for the unit tests.
#pragma once

#include "rgbdsal/core.hpp"
#include "rgbdsal/random.hpp"

#include <filesystem>
#include <string>

namespace rgbdsal::testing {

inline ScalarMap random_map(Rng& rng, int h, int w) {
  Plane<float> p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<float>(rng.uniform());
  return ScalarMap(p);
}

/// Values on the 1/255 grid, so quantised round trips are exact.
inline ScalarMap random_grid_map(Rng& rng, int h, int w) {
  Plane<float> p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<float>(rng.below(256)) / 255.0f;
  return ScalarMap(p);
}

inline BinaryMask random_mask(Rng& rng, int h, int w, double p_one = 0.5) {
  Plane<float> p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform() < p_one ? 1.0f : 0.0f;
  return BinaryMask(ScalarMap(p));
}

/// Random mask with at least one positive and one negative pixel.
inline BinaryMask random_mixed_mask(Rng& rng, int h, int w) {
  for (;;) {
    BinaryMask m = random_mask(rng, h, w);
    const float s = m.values().sum();
    if (s > 0.0f && s < static_cast<float>(h * w)) return m;
  }
}

inline ScalarMap map_of(std::initializer_list<std::initializer_list<float>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  Plane<float> p(h, w);
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (float v : row) p(r, c++) = v;
    ++r;
  }
  return ScalarMap(p);
}

inline BinaryMask mask_of(std::initializer_list<std::initializer_list<float>> rows) { return BinaryMask(map_of(rows)); }

inline bool equal(const ScalarMap& a, const ScalarMap& b) {
  return a.same_shape(b) && (a.values() == b.values()).all();
}

/// Fresh directory under the system temp dir, emptied first.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rgbdsal_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace rgbdsal::testing
