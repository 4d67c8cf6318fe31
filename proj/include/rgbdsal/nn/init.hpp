#pragma once

#include "rgbdsal/nn/tensor.hpp"
#include "rgbdsal/random.hpp"

#include <cmath>
#include <string>

namespace rgbdsal::nn {

enum class Init { he_normal, zeros };

/// Registers `<name>/w` (cout x cin*k*k) and `<name>/b` (cout x 1).
template <typename T>
void add_conv(ParameterStore<T>& store, const std::string& name, int cin, int cout, int kernel, Rng& rng,
              Init init = Init::he_normal) {
  const int fan_in = cin * kernel * kernel;
  DenseMatrix<T> w = DenseMatrix<T>::Zero(cout, fan_in);
  if (init == Init::he_normal) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = T(stddev * rng.normal());
  }
  store.add(name + "/w", std::move(w));
  store.add(name + "/b", DenseMatrix<T>::Zero(cout, 1));
}

template <typename T>
struct ConvRef {
  const Parameter<T>& w;
  const Parameter<T>& b;
};

template <typename T>
ConvRef<T> conv_ref(const ParameterStore<T>& store, const std::string& name) {
  return {store.at(name + "/w"), store.at(name + "/b")};
}

}  // namespace rgbdsal::nn
