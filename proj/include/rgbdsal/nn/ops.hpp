// Differentiable operations on Graph nodes.
#pragma once

#include "rgbdsal/nn/graph.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace rgbdsal::nn {

template <typename T>
using Var = typename Graph<T>::Var;

namespace detail {

template <typename T>
void im2col3x3(const Tensor<T>& x, DenseMatrix<T>& col) {
  const int h = x.height, w = x.width;
  col.resize(Eigen::Index(x.channels) * 9, x.plane_size());
  for (int c = 0; c < x.channels; ++c) {
    const T* src = x.data.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.row(Eigen::Index(c) * 9 + ky * 3 + kx).data();
        const int dy = ky - 1, dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          T* drow = dst + Eigen::Index(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + w, T(0));
            continue;
          }
          const T* srow = src + Eigen::Index(sy) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int xx = 0; xx < x0; ++xx) drow[xx] = T(0);
          for (int xx = x0; xx < x1; ++xx) drow[xx] = srow[xx + dx];
          for (int xx = x1; xx < w; ++xx) drow[xx] = T(0);
        }
      }
    }
  }
}

template <typename T>
void col2im3x3_add(const DenseMatrix<T>& col, int channels, int h, int w, DenseMatrix<T>& dx) {
  for (int c = 0; c < channels; ++c) {
    T* dst = dx.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.row(Eigen::Index(c) * 9 + ky * 3 + kx).data();
        const int dy = ky - 1, ddx = kx - 1;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* srow = src + Eigen::Index(y) * w;
          T* drow = dst + Eigen::Index(sy) * w;
          const int x0 = std::max(0, -ddx), x1 = std::min(w, w - ddx);
          for (int xx = x0; xx < x1; ++xx) drow[xx + ddx] += srow[xx];
        }
      }
    }
  }
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) throw_invariant(std::string(op) + ": non-finite activations");
}

}  // namespace detail

/// Stride-1 convolution with "same" zero padding. `kernel` is 1 or 3; the
/// weight is cout x (cin * kernel * kernel), the bias cout x 1.
template <typename T>
Var<T> conv2d(Graph<T>& g, Var<T> xv, const Parameter<T>& w, const Parameter<T>& b, int kernel) {
  const Tensor<T>& x = g.value(xv);
  const Eigen::Index taps = Eigen::Index(kernel) * kernel;
  if (kernel != 1 && kernel != 3) throw_invariant("conv2d supports 1x1 and 3x3 kernels");
  if (w.value.cols() != x.channels * taps) {
    throw_invariant("conv2d: channel mismatch, input has " + std::to_string(x.channels) +
                    " channels but kernel expects " + std::to_string(w.value.cols() / taps));
  }
  const int cout = static_cast<int>(w.value.rows());
  Tensor<T> out(cout, x.height, x.width);
  std::shared_ptr<DenseMatrix<T>> col;
  if (kernel == 3) {
    col = std::make_shared<DenseMatrix<T>>();
    detail::im2col3x3(x, *col);
    out.data.noalias() = w.value * (*col);
  } else {
    out.data.noalias() = w.value * x.data;
  }
  out.data.colwise() += b.value.col(0);

  const bool needs = g.requires_grad(xv) || !w.frozen || !b.frozen;
  const int xid = xv.id, cin = x.channels, h = x.height, wd = x.width;
  const Parameter<T>* wp = &w;
  const Parameter<T>* bp = &b;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const DenseMatrix<T>& dout = gr.grad(self);
                  const DenseMatrix<T>& input = col ? *col : gr.value(xid).data;
                  if (!wp->frozen) wp->grad.noalias() += dout * input.transpose();
                  if (!bp->frozen) bp->grad.col(0) += dout.rowwise().sum();
                  if (gr.requires_grad(xid)) {
                    if (col) {
                      DenseMatrix<T> dcol = wp->value.transpose() * dout;
                      detail::col2im3x3_add(dcol, cin, h, wd, gr.grad(xid));
                    } else {
                      gr.grad(xid).noalias() += wp->value.transpose() * dout;
                    }
                  }
                },
                needs);
}

template <typename T>
Var<T> relu(Graph<T>& g, Var<T> xv) {
  Tensor<T> out = g.value(xv);
  out.data = out.data.cwiseMax(T(0));
  const int xid = xv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const auto& y = gr.value(self).data;
                  gr.grad(xid).array() += gr.grad(self).array() * (y.array() > T(0)).template cast<T>();
                },
                g.requires_grad(xv));
}

template <typename T>
Var<T> sigmoid(Graph<T>& g, Var<T> xv) {
  Tensor<T> out = g.value(xv);
  out.data = (T(1) + (-out.data.array()).exp()).inverse().matrix();
  const int xid = xv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const auto y = gr.value(self).data.array();
                  gr.grad(xid).array() += gr.grad(self).array() * y * (T(1) - y);
                },
                g.requires_grad(xv));
}

/// 2x2 max pooling with stride 2; spatial sizes must be even.
template <typename T>
Var<T> max_pool2(Graph<T>& g, Var<T> xv) {
  const Tensor<T>& x = g.value(xv);
  if (x.height % 2 != 0 || x.width % 2 != 0) {
    throw_invariant("max_pool2 needs even spatial size, got " + x.shape());
  }
  const int oh = x.height / 2, ow = x.width / 2;
  Tensor<T> out(x.channels, oh, ow);
  auto argmax = std::make_shared<std::vector<int>>(std::size_t(x.channels) * oh * ow);
  for (int c = 0; c < x.channels; ++c) {
    const T* src = x.data.row(c).data();
    T* dst = out.data.row(c).data();
    int* idx = argmax->data() + std::size_t(c) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        int best = (2 * y) * x.width + 2 * xx;
        for (int k : {best + 1, best + x.width, best + x.width + 1}) {
          if (src[k] > src[best]) best = k;
        }
        dst[y * ow + xx] = src[best];
        idx[y * ow + xx] = best;
      }
    }
  }
  const int xid = xv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const DenseMatrix<T>& dout = gr.grad(self);
                  DenseMatrix<T>& dx = gr.grad(xid);
                  const Eigen::Index n = dout.cols();
                  for (Eigen::Index c = 0; c < dout.rows(); ++c) {
                    const int* idx = argmax->data() + c * n;
                    for (Eigen::Index i = 0; i < n; ++i) dx(c, idx[i]) += dout(c, i);
                  }
                },
                g.requires_grad(xv));
}

/// Corner-aligned bilinear resize of every channel.
template <typename T>
Var<T> resize_bilinear(Graph<T>& g, Var<T> xv, int height, int width) {
  const Tensor<T>& x = g.value(xv);
  if (x.height == height && x.width == width) return xv;
  auto ry = std::make_shared<DenseMatrix<T>>(interpolation_matrix<T>(x.height, height));
  auto rx = std::make_shared<DenseMatrix<T>>(interpolation_matrix<T>(x.width, width));
  Tensor<T> out(x.channels, height, width);
  DenseMatrix<T> tmp;
  for (int c = 0; c < x.channels; ++c) {
    tmp.noalias() = (*ry) * x.plane(c).matrix();
    out.plane(c).matrix().noalias() = tmp * rx->transpose();
  }
  const int xid = xv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const Tensor<T>& o = gr.value(self);
                  const Tensor<T>& in = gr.value(xid);
                  const DenseMatrix<T>& dout = gr.grad(self);
                  DenseMatrix<T>& dx = gr.grad(xid);
                  DenseMatrix<T> t;
                  for (int c = 0; c < o.channels; ++c) {
                    Eigen::Map<const DenseMatrix<T>> d(dout.row(c).data(), o.height, o.width);
                    Eigen::Map<DenseMatrix<T>> dst(dx.row(c).data(), in.height, in.width);
                    t.noalias() = ry->transpose() * d;
                    dst.noalias() += t * (*rx);
                  }
                },
                g.requires_grad(xv));
}

template <typename T>
Var<T> upsample2(Graph<T>& g, Var<T> xv) {
  const Tensor<T>& x = g.value(xv);
  return resize_bilinear(g, xv, 2 * x.height, 2 * x.width);
}

/// Channel concatenation; all inputs share spatial size.
template <typename T>
Var<T> concat(Graph<T>& g, const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw_invariant("concat of nothing");
  const Tensor<T>& first = g.value(parts.front());
  int channels = 0;
  bool needs = false;
  for (auto p : parts) {
    const Tensor<T>& t = g.value(p);
    if (t.height != first.height || t.width != first.width) {
      throw_invariant("concat: spatial mismatch " + first.shape() + " vs " + t.shape());
    }
    channels += t.channels;
    needs = needs || g.requires_grad(p);
  }
  Tensor<T> out(channels, first.height, first.width);
  std::vector<int> ids, offsets;
  int off = 0;
  for (auto p : parts) {
    const Tensor<T>& t = g.value(p);
    out.data.middleRows(off, t.channels) = t.data;
    ids.push_back(p.id);
    offsets.push_back(off);
    off += t.channels;
  }
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    if (!gr.requires_grad(ids[i])) continue;
                    const int c = gr.value(ids[i]).channels;
                    gr.grad(ids[i]) += gr.grad(self).middleRows(offsets[i], c);
                  }
                },
                needs);
}

template <typename T>
Var<T> add(Graph<T>& g, Var<T> av, Var<T> bv) {
  const Tensor<T>& a = g.value(av);
  const Tensor<T>& b = g.value(bv);
  if (!a.same_shape(b)) throw_invariant("add: shape mismatch " + a.shape() + " vs " + b.shape());
  Tensor<T> out = a;
  out.data += b.data;
  const int aid = av.id, bid = bv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  if (gr.requires_grad(aid)) gr.grad(aid) += gr.grad(self);
                  if (gr.requires_grad(bid)) gr.grad(bid) += gr.grad(self);
                },
                g.requires_grad(av) || g.requires_grad(bv));
}

/// omega * d + (1 - omega) * r with a one-channel omega broadcast over
/// channels. Gradients flow into all three inputs.
template <typename T>
Var<T> blend(Graph<T>& g, Var<T> omegav, Var<T> dv, Var<T> rv) {
  const Tensor<T>& om = g.value(omegav);
  const Tensor<T>& d = g.value(dv);
  const Tensor<T>& r = g.value(rv);
  if (!d.same_shape(r)) throw_invariant("blend: channel mismatch " + d.shape() + " vs " + r.shape());
  if (om.channels != 1 || om.height != d.height || om.width != d.width) {
    throw_invariant("blend: weight map " + om.shape() + " does not match " + d.shape());
  }
  Tensor<T> out(d.channels, d.height, d.width);
  const auto w = om.data.row(0).array();
  for (int c = 0; c < d.channels; ++c) {
    out.data.row(c).array() = w * d.data.row(c).array() + (T(1) - w) * r.data.row(c).array();
  }
  const int oid = omegav.id, did = dv.id, rid = rv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const DenseMatrix<T>& dout = gr.grad(self);
                  const auto wgt = gr.value(oid).data.row(0).array();
                  const DenseMatrix<T>& dval = gr.value(did).data;
                  const DenseMatrix<T>& rval = gr.value(rid).data;
                  if (gr.requires_grad(did)) {
                    auto& gd = gr.grad(did);
                    for (Eigen::Index c = 0; c < dout.rows(); ++c) gd.row(c).array() += wgt * dout.row(c).array();
                  }
                  if (gr.requires_grad(rid)) {
                    auto& grr = gr.grad(rid);
                    for (Eigen::Index c = 0; c < dout.rows(); ++c) {
                      grr.row(c).array() += (T(1) - wgt) * dout.row(c).array();
                    }
                  }
                  if (gr.requires_grad(oid)) {
                    gr.grad(oid).row(0) += (dout.array() * (dval - rval).array()).matrix().colwise().sum();
                  }
                },
                g.requires_grad(omegav) || g.requires_grad(dv) || g.requires_grad(rv));
}

/// x * (1 + s) with a one-channel s broadcast over channels.
template <typename T>
Var<T> gate(Graph<T>& g, Var<T> xv, Var<T> sv) {
  const Tensor<T>& x = g.value(xv);
  const Tensor<T>& s = g.value(sv);
  if (s.channels != 1 || s.height != x.height || s.width != x.width) {
    throw_invariant("gate: map " + s.shape() + " does not match " + x.shape());
  }
  Tensor<T> out = x;
  const auto m = (T(1) + s.data.row(0).array());
  for (int c = 0; c < x.channels; ++c) out.data.row(c).array() *= m;
  const int xid = xv.id, sid = sv.id;
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const DenseMatrix<T>& dout = gr.grad(self);
                  const auto mult = (T(1) + gr.value(sid).data.row(0).array());
                  if (gr.requires_grad(xid)) {
                    auto& gx = gr.grad(xid);
                    for (Eigen::Index c = 0; c < dout.rows(); ++c) gx.row(c).array() += mult * dout.row(c).array();
                  }
                  if (gr.requires_grad(sid)) {
                    gr.grad(sid).row(0) +=
                        (dout.array() * gr.value(xid).data.array()).matrix().colwise().sum();
                  }
                },
                g.requires_grad(xv) || g.requires_grad(sv));
}

/// Copy of a node's value with no path back into the graph.
template <typename T>
Var<T> detach(Graph<T>& g, Var<T> xv) {
  return g.leaf(g.value(xv));
}

template <typename T>
constexpr T kLogEpsilon = T(1e-7);

/// Mean soft-target binary cross-entropy of sigmoid(logits) against target.
/// The reported value clamps log arguments by epsilon; the gradient is the
/// exact (p - t) / N of the unclamped loss, which stays informative when
/// the sigmoid saturates.
template <typename T>
Var<T> bce_with_logits(Graph<T>& g, Var<T> zv, const Tensor<T>& target) {
  const Tensor<T>& z = g.value(zv);
  if (!z.same_shape(target) || z.channels != 1) {
    throw_invariant("bce: prediction " + z.shape() + " vs target " + target.shape());
  }
  detail::require_finite(z, "bce");
  const auto p = (T(1) + (-z.data.array()).exp()).inverse();
  const auto pc = p.cwiseMax(kLogEpsilon<T>).cwiseMin(T(1) - kLogEpsilon<T>);
  const auto t = target.data.array();
  const T n = T(z.data.size());
  Tensor<T> out(1, 1, 1);
  out.data(0, 0) = -(t * pc.log() + (T(1) - t) * (T(1) - pc).log()).sum() / n;
  const int zid = zv.id;
  auto tgt = std::make_shared<DenseMatrix<T>>(target.data);
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const T seed = gr.grad(self)(0, 0);
                  const auto prob = (T(1) + (-gr.value(zid).data.array()).exp()).inverse();
                  gr.grad(zid).array() += seed * (prob - tgt->array()) / n;
                },
                g.requires_grad(zv));
}

/// Mean binary cross-entropy on probabilities (used where the prediction is
/// already a convex blend of sigmoids rather than a logit).
template <typename T>
Var<T> bce(Graph<T>& g, Var<T> pv, const Tensor<T>& target) {
  const Tensor<T>& p = g.value(pv);
  if (!p.same_shape(target) || p.channels != 1) {
    throw_invariant("bce: prediction " + p.shape() + " vs target " + target.shape());
  }
  detail::require_finite(p, "bce");
  const auto pc = p.data.array().cwiseMax(kLogEpsilon<T>).cwiseMin(T(1) - kLogEpsilon<T>);
  const auto t = target.data.array();
  const T n = T(p.data.size());
  Tensor<T> out(1, 1, 1);
  out.data(0, 0) = -(t * pc.log() + (T(1) - t) * (T(1) - pc).log()).sum() / n;
  const int pid = pv.id;
  auto tgt = std::make_shared<DenseMatrix<T>>(target.data);
  return g.push(std::move(out),
                [=](Graph<T>& gr, int self) {
                  const T seed = gr.grad(self)(0, 0);
                  const auto q = gr.value(pid).data.array().cwiseMax(kLogEpsilon<T>).cwiseMin(T(1) - kLogEpsilon<T>);
                  gr.grad(pid).array() += seed * (q - tgt->array()) / (q * (T(1) - q)) / n;
                },
                g.requires_grad(pv));
}

}  // namespace rgbdsal::nn
