#include "rgbdsal/pseudo_gt.hpp"

#include "rgbdsal/networks.hpp"

namespace rgbdsal {

PgtMode parse_pgt_mode(const std::string& s) {
  if (s == "p") return PgtMode::p;
  if (s == "b") return PgtMode::b;
  if (s == "pb") return PgtMode::pb;
  throw_usage("unknown pseudo-GT mode '" + s + "' (expected p, b or pb)");
}

std::string to_string(PgtMode mode) {
  switch (mode) {
    case PgtMode::p: return "p";
    case PgtMode::b: return "b";
    case PgtMode::pb: return "pb";
  }
  return "pb";
}

const ScalarMap& PseudoGt::target(PgtMode mode) const {
  switch (mode) {
    case PgtMode::p: return p;
    case PgtMode::b: return b;
    case PgtMode::pb: return pgt;
  }
  return pgt;
}

ScalarMap compute_p(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt) {
  require_same_shape(dsal, rgbsal, "compute_p");
  require_same_shape(dsal, gt, "compute_p");
  return ScalarMap(Plane<float>(pos(dsal.values() - rgbsal.values()) * gt.values()));
}

ScalarMap compute_b(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt) {
  require_same_shape(dsal, rgbsal, "compute_b");
  require_same_shape(dsal, gt, "compute_b");
  return ScalarMap(Plane<float>(pos(rgbsal.values() - dsal.values()) * (1.0f - gt.values())));
}

PseudoGt compute_pgt(const ScalarMap& dsal, const ScalarMap& rgbsal, const BinaryMask& gt) {
  ScalarMap p = compute_p(dsal, rgbsal, gt);
  ScalarMap b = compute_b(dsal, rgbsal, gt);
  // disjoint supports: one of the two terms is exactly zero at every pixel
  ScalarMap sum(Plane<float>(p.values() + b.values()));
  return {std::move(p), std::move(b), std::move(sum)};
}

std::vector<DcaPair> build_dca_training_set(std::span<const RgbdSample> samples,
                                            const ModelBundle<float>& bundle) {
  if (!bundle.stage_done(1)) throw_invariant("stage ordering violated: pseudo-GTs need trained subnets");
  std::vector<DcaPair> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.gt) throw_data("sample '" + s.id + "' has no ground truth");
    auto streams = predict_streams(bundle, s);
    pairs.push_back({&s, compute_pgt(streams.dsal, streams.rgbsal, *s.gt)});
  }
  return pairs;
}

}  // namespace rgbdsal
