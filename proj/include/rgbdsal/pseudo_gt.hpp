// Weak supervision targets for the depth contribution subnet.
#pragma once

#include "rgbdsal/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace rgbdsal {

template <typename T>
struct ModelBundle;

/// Which component(s) of the pseudo target the depth contribution subnet
/// is trained on.
enum class PgtMode { p, b, pb };

PgtMode parse_pgt_mode(const std::string& s);
std::string to_string(PgtMode mode);

/// Pseudo ground truth split into its salient-side and background-side parts.
/// The two parts have disjoint support, so `pgt = p + b` stays in [0,1].
struct PseudoGt {
  ScalarMap p;
  ScalarMap b;
  ScalarMap pgt;

  const ScalarMap& target(PgtMode mode) const;
};

/// pos(dsal - rgbsal) * gt: depth beats RGB inside the object.
ScalarMap compute_p(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt);

/// pos(rgbsal - dsal) * (1 - gt): depth suppresses background better than RGB.
ScalarMap compute_b(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt);

PseudoGt compute_pgt(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt);

struct DcaPair {
  const RgbdSample* sample = nullptr;
  PseudoGt target;
};

/// Runs the stage-1 RGB and depth subnets over `samples` and pairs each
/// sample with its pseudo target. Samples whose pseudo target is all zero
/// are kept.
std::vector<DcaPair> build_dca_training_set(std::span<const RgbdSample> samples,
                                            const ModelBundle<float>& bundle);

}  // namespace rgbdsal
