#include "rgbdsal/core.hpp"

#include <sstream>

namespace rgbdsal {

void throw_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
void throw_invariant(const std::string& msg) { throw Error(ErrorKind::invariant, msg); }

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

ScalarMap::ScalarMap(int height, int width, float fill) {
  if (height < 1 || width < 1) throw_invariant("ScalarMap must be at least 1x1");
  if (!(fill >= 0.0f && fill <= 1.0f)) throw_invariant("ScalarMap fill value outside [0,1]");
  values_ = Plane<float>::Constant(height, width, fill);
}

ScalarMap::ScalarMap(Plane<float> values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw_invariant("ScalarMap must be at least 1x1");
  // written so that NaN fails the check
  if (!((values_ >= 0.0f) && (values_ <= 1.0f)).all()) {
    throw_invariant("ScalarMap value outside [0,1]");
  }
}

BinaryMask::BinaryMask(ScalarMap map) : map_(std::move(map)) {
  if (!((map_.values() == 0.0f) || (map_.values() == 1.0f)).all()) {
    throw_invariant("BinaryMask value other than 0 or 1");
  }
}

BinaryMask BinaryMask::from_threshold(const Plane<float>& values, float threshold) {
  return BinaryMask(ScalarMap(Plane<float>((values > threshold).cast<float>())));
}

BinaryMask BinaryMask::complement() const { return BinaryMask(rgbdsal::complement(map_)); }

void RgbImage::validate() const {
  for (const auto& c : channels) {
    if (c.rows() != channels[0].rows() || c.cols() != channels[0].cols()) {
      throw_invariant("RGB channels differ in shape");
    }
    if (!((c >= 0.0f) && (c <= 1.0f)).all()) throw_invariant("RGB value outside [0,1]");
  }
  if (channels[0].size() == 0) throw_invariant("empty RGB image");
}

void RgbdSample::validate() const {
  rgb.validate();
  if (rgb.height() != depth.height() || rgb.width() != depth.width()) {
    throw_invariant("sample '" + id + "': rgb " + shape_string(rgb.height(), rgb.width()) +
                    " vs depth " + shape_string(depth.height(), depth.width()));
  }
  if (gt && !gt->map().same_shape(depth)) {
    throw_invariant("sample '" + id + "': gt " + shape_string(gt->height(), gt->width()) +
                    " vs depth " + shape_string(depth.height(), depth.width()));
  }
}

void require_same_shape(const ScalarMap& a, const ScalarMap& b, const char* what) {
  if (!a.same_shape(b)) {
    throw_invariant(std::string(what) + ": shape mismatch " + shape_string(a.height(), a.width()) +
                    " vs " + shape_string(b.height(), b.width()));
  }
}

ScalarMap hadamard(const ScalarMap& a, const ScalarMap& b) {
  require_same_shape(a, b, "hadamard");
  return ScalarMap(Plane<float>(a.values() * b.values()));
}

ScalarMap resize_map(const ScalarMap& m, int height, int width) {
  Plane<float> out = resize_plane(m.values(), height, width);
  return ScalarMap(Plane<float>(out.cwiseMax(0.0f).cwiseMin(1.0f)));
}

RgbImage resize_rgb(const RgbImage& image, int height, int width) {
  RgbImage out;
  for (int c = 0; c < 3; ++c) {
    out.channels[c] = resize_plane(image.channels[c], height, width).cwiseMax(0.0f).cwiseMin(1.0f);
  }
  return out;
}

ScalarMap normalize_min_max(const Plane<float>& raw) {
  if (!raw.allFinite()) throw_data("depth contains non-finite values");
  const float lo = raw.minCoeff();
  const float hi = raw.maxCoeff();
  if (!(hi > lo)) return ScalarMap(static_cast<int>(raw.rows()), static_cast<int>(raw.cols()), 0.5f);
  Plane<float> v = (raw - lo) / (hi - lo);
  return ScalarMap(Plane<float>(v.cwiseMax(0.0f).cwiseMin(1.0f)));
}

ScalarMap complement(const ScalarMap& m) { return ScalarMap(Plane<float>(1.0f - m.values())); }

}  // namespace rgbdsal
