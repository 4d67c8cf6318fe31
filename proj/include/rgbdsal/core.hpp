// Domain types and elementwise map algebra shared by every module.
#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace rgbdsal {

/// Broad failure class; the CLI maps each kind onto a stable exit code.
enum class ErrorKind { usage, data, invariant };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_usage(const std::string& msg);
[[noreturn]] void throw_data(const std::string& msg);
[[noreturn]] void throw_invariant(const std::string& msg);

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

/// Single-channel H x W map whose values all lie in [0,1].
///
/// Holds saliency maps, depth maps, omega maps and pseudo targets. The range
/// invariant is checked on construction, so a live ScalarMap is always valid.
class ScalarMap {
 public:
  ScalarMap() = default;
  ScalarMap(int height, int width, float fill = 0.0f);
  explicit ScalarMap(Plane<float> values);

  static ScalarMap constant(int height, int width, float value) { return {height, width, value}; }

  int height() const { return static_cast<int>(values_.rows()); }
  int width() const { return static_cast<int>(values_.cols()); }
  Eigen::Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }
  float operator()(int row, int col) const { return values_(row, col); }
  const Plane<float>& values() const { return values_; }

  bool same_shape(const ScalarMap& other) const {
    return height() == other.height() && width() == other.width();
  }

 private:
  Plane<float> values_;
};

/// A ScalarMap whose values are exactly 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(ScalarMap map);
  /// Thresholds `values` strictly above `threshold`.
  static BinaryMask from_threshold(const Plane<float>& values, float threshold);

  const ScalarMap& map() const { return map_; }
  const Plane<float>& values() const { return map_.values(); }
  int height() const { return map_.height(); }
  int width() const { return map_.width(); }
  operator const ScalarMap&() const { return map_; }  // NOLINT(google-explicit-constructor)

  BinaryMask complement() const;

 private:
  ScalarMap map_;
};

/// Three [0,1] colour planes of identical shape, ordered R, G, B.
struct RgbImage {
  std::array<Plane<float>, 3> channels;

  int height() const { return static_cast<int>(channels[0].rows()); }
  int width() const { return static_cast<int>(channels[0].cols()); }
  void validate() const;
};

/// One aligned RGB-D item. `gt` is absent for inference-only samples and
/// `tag` carries optional generator metadata (the synthetic depth mode).
struct RgbdSample {
  std::string id;
  RgbImage rgb;
  ScalarMap depth;
  std::optional<BinaryMask> gt;
  std::string tag;

  int height() const { return depth.height(); }
  int width() const { return depth.width(); }
  void validate() const;
};

void require_same_shape(const ScalarMap& a, const ScalarMap& b, const char* what);

/// Elementwise max(x, 0). Throws on non-finite input.
template <typename Derived>
typename Derived::PlainObject pos(const Eigen::ArrayBase<Derived>& x) {
  if (!x.allFinite()) throw_invariant("non-finite tensor");
  return x.cwiseMax(typename Derived::Scalar(0));
}

ScalarMap hadamard(const ScalarMap& a, const ScalarMap& b);

/// Bilinear resampling matrix with corner-aligned sampling: row i of the
/// result holds the weights that produce output sample i from `src` inputs.
template <typename Scalar>
DenseMatrix<Scalar> interpolation_matrix(int src, int dst) {
  DenseMatrix<Scalar> r = DenseMatrix<Scalar>::Zero(dst, src);
  if (src == 1 || dst == 1) {
    if (src == 1) {
      r.col(0).setOnes();
    } else {
      r(0, 0) = Scalar(1);
    }
    return r;
  }
  for (int i = 0; i < dst; ++i) {
    // i * (src - 1) / (dst - 1) kept in integer form so identity sizes are exact
    const long num = static_cast<long>(i) * (src - 1);
    const long lo = num / (dst - 1);
    const long rem = num % (dst - 1);
    if (rem == 0) {
      r(i, lo) = Scalar(1);
    } else {
      const Scalar frac = Scalar(rem) / Scalar(dst - 1);
      r(i, lo) = Scalar(1) - frac;
      r(i, lo + 1) = frac;
    }
  }
  return r;
}

/// Corner-aligned bilinear resize of one plane.
template <typename Scalar>
Plane<Scalar> resize_plane(const Plane<Scalar>& src, int height, int width) {
  if (height < 1 || width < 1) throw_usage("resize target must be at least 1x1");
  if (src.rows() == height && src.cols() == width) return src;
  const auto ry = interpolation_matrix<Scalar>(static_cast<int>(src.rows()), height);
  const auto rx = interpolation_matrix<Scalar>(static_cast<int>(src.cols()), width);
  DenseMatrix<Scalar> out = ry * src.matrix() * rx.transpose();
  return out.array();
}

/// Bilinear resize with corner-aligned sampling; output clamped to [0,1].
ScalarMap resize_map(const ScalarMap& m, int height, int width);

RgbImage resize_rgb(const RgbImage& image, int height, int width);

/// Per-image min-max normalisation; constant inputs map to 0.5 everywhere.
ScalarMap normalize_min_max(const Plane<float>& raw);

ScalarMap complement(const ScalarMap& m);

}  // namespace rgbdsal
