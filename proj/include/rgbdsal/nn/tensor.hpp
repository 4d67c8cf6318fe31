// Dense activations and trainable parameters, templated on the scalar type.
#pragma once

#include "rgbdsal/core.hpp"

#include <cstddef>
#include <map>
#include <string>

namespace rgbdsal::nn {

/// H x W x C activation stored as a C x (H*W) row-major matrix, so each
/// channel plane is one contiguous row.
template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  DenseMatrix<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w), data(DenseMatrix<T>::Zero(c, Eigen::Index(h) * w)) {}

  static Tensor constant(int c, int h, int w, T value) {
    Tensor t(c, h, w);
    t.data.setConstant(value);
    return t;
  }

  Eigen::Index plane_size() const { return Eigen::Index(height) * width; }
  bool all_finite() const { return data.allFinite(); }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  Eigen::Map<Plane<T>> plane(int c) { return {data.row(c).data(), height, width}; }
  Eigen::Map<const Plane<T>> plane(int c) const { return {data.row(c).data(), height, width}; }

  std::string shape() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

template <typename T>
Tensor<T> tensor_from_plane(const Plane<float>& p) {
  Tensor<T> t(1, static_cast<int>(p.rows()), static_cast<int>(p.cols()));
  t.plane(0) = p.cast<T>();
  return t;
}

template <typename T>
ScalarMap map_from_tensor(const Tensor<T>& t, int channel = 0) {
  Plane<float> p = t.plane(channel).template cast<float>();
  return ScalarMap(Plane<float>(p.cwiseMax(0.0f).cwiseMin(1.0f)));
}

/// A trainable matrix with its gradient accumulator and Adam moments.
///
/// `grad` is mutable: forward passes read parameters through const
/// references, and only recorded graphs accumulate into it.
template <typename T>
struct Parameter {
  DenseMatrix<T> value;
  mutable DenseMatrix<T> grad;
  DenseMatrix<T> moment1;
  DenseMatrix<T> moment2;
  bool frozen = false;

  explicit Parameter(DenseMatrix<T> init)
      : value(std::move(init)),
        grad(DenseMatrix<T>::Zero(value.rows(), value.cols())),
        moment1(DenseMatrix<T>::Zero(value.rows(), value.cols())),
        moment2(DenseMatrix<T>::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(); }
};

/// Parameters keyed by module path ("rgb/enc1/conv1/w"); ordered iteration
/// keeps optimiser updates and checkpoints deterministic.
template <typename T>
class ParameterStore {
 public:
  using Map = std::map<std::string, Parameter<T>>;

  Parameter<T>& add(const std::string& name, DenseMatrix<T> init) {
    auto [it, inserted] = params_.try_emplace(name, std::move(init));
    if (!inserted) throw_invariant("duplicate parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw_invariant("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw_invariant("unknown parameter '" + name + "'");
    return it->second;
  }

  typename Map::iterator begin() { return params_.begin(); }
  typename Map::iterator end() { return params_.end(); }
  typename Map::const_iterator begin() const { return params_.begin(); }
  typename Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count(const std::string& prefix = "") const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) {
      if (name.rfind(prefix, 0) == 0) n += static_cast<std::size_t>(p.value.size());
    }
    return n;
  }

  void zero_grad() const {
    for (const auto& [name, p] : params_) p.zero_grad();
  }

  /// Freezes every parameter, then unfreezes those under the given prefixes.
  void train_only(std::initializer_list<std::string> prefixes) {
    for (auto& [name, p] : params_) {
      p.frozen = true;
      for (const auto& prefix : prefixes) {
        if (name.rfind(prefix, 0) == 0) p.frozen = false;
      }
    }
  }

  void reset_moments() {
    for (auto& [name, p] : params_) {
      p.moment1.setZero();
      p.moment2.setZero();
    }
  }

 private:
  Map params_;
};

}  // namespace rgbdsal::nn
