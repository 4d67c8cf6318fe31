#include "rgbdsal/fusion.hpp"

namespace rgbdsal {

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "add") return FusionMode::add;
  if (s == "con") return FusionMode::con;
  if (s == "omega") return FusionMode::omega;
  throw_usage("unknown fusion mode '" + s + "' (expected add, con or omega)");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::add: return "add";
    case FusionMode::con: return "con";
    case FusionMode::omega: return "omega";
  }
  return "omega";
}

ScalarMap simple_fusion(const ScalarMap& omega, const ScalarMap& dsal, const ScalarMap& rgbsal) {
  require_same_shape(omega, dsal, "simple_fusion");
  require_same_shape(omega, rgbsal, "simple_fusion");
  // evaluated in double and rounded once: endpoints are exact and rounding is
  // monotone, so every output stays inside [min(dsal, rgbsal), max(dsal, rgbsal)]
  const Plane<double> w = omega.values().cast<double>();
  Plane<float> out =
      (w * dsal.values().cast<double>() + (1.0 - w) * rgbsal.values().cast<double>()).cast<float>();
  return ScalarMap(std::move(out));
}

}  // namespace rgbdsal
