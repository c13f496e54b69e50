#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "svos/error.hpp"
#include "svos/tensor.hpp"

namespace svos {

// Reverse-mode tape over dense tensors. Each op appends a node holding the
// forward value plus a closure that scatters the node's gradient into its
// parents. Values stay resident for the lifetime of the tape; convolution
// rebuilds its im2col buffer in the backward pass instead of caching it.
//
// Instantiated at float for training/inference and at double for the
// finite-difference harness.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  int leaf(Tensor<T> value, bool needs_grad = false) {
    return push(std::move(value), needs_grad);
  }

  int push(Tensor<T> value, bool needs_grad) {
    Node n;
    n.val = std::move(value);
    n.needs_grad = grad_enabled_ && needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_back(int id, std::function<void(Tape&)> back) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.needs_grad) n.back = std::move(back);
  }

  const Tensor<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  Tensor<T>& val(int id) { return nodes_[static_cast<size_t>(id)].val; }
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

  Tensor<T>& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tensor<T>(n.val.shape);
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad.numel() > 0; }

  // Accumulates d(loss)/d(node) for every node reachable from `loss_id`.
  void backward(int loss_id) {
    if (!grad_enabled_) throw validation_error("backward on a no-grad tape");
    Node& top = nodes_[static_cast<size_t>(loss_id)];
    if (top.val.numel() != 1) throw validation_error("backward target must be scalar");
    grad(loss_id).fill(T(1));
    for (int i = loss_id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.needs_grad && n.back && n.grad.numel() > 0) n.back(*this);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

namespace ad {

template <typename T>
bool any_grad(const Tape<T>& tp, std::initializer_list<int> ids) {
  if (!tp.grad_enabled()) return false;
  for (int id : ids)
    if (id >= 0 && tp.needs_grad(id)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Dense kernels (row-major). `acc` selects += vs =.

// out(m x n) = a(m x k) * b(k x n)
template <typename T>
void gemm(const T* a, const T* b, T* out, int m, int k, int n, bool acc) {
  if (!acc) std::fill(out, out + static_cast<size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* orow = out + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out(m x n) = a(m x k) * b(n x k)^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* out, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* orow = out + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<size_t>(j) * k;
      T s = 0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      orow[j] = acc ? orow[j] + s : s;
    }
  }
}

// out(k x n) = a(m x k)^T * b(m x n)
template <typename T>
void gemm_tn(const T* a, const T* b, T* out, int m, int k, int n, bool acc) {
  if (!acc) std::fill(out, out + static_cast<size_t>(k) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    const T* brow = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      if (av == T(0)) continue;
      T* orow = out + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, Tensor<T>& col) {
  const int ic = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  col = Tensor<T>({ic * k * k, oh * ow});
  T* out = col.data();
  for (int c = 0; c < ic; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          T* row = out + static_cast<size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, T(0));
            continue;
          }
          const T* src = &x.at(c, iy, 0);
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - pad;
            row[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
        out += static_cast<size_t>(oh) * ow;
      }
    }
  }
}

template <typename T>
void col2im_accum(const Tensor<T>& col, int ic, int h, int w, int k, int stride, int pad,
                  Tensor<T>& dx) {
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  const T* in = col.data();
  for (int c = 0; c < ic; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          const T* row = in + static_cast<size_t>(oy) * ow;
          if (iy >= 0 && iy < h) {
            T* dst = &dx.at(c, iy, 0);
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) dst[ix] += row[ox];
            }
          }
        }
        in += static_cast<size_t>(oh) * ow;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Ops. Shapes: images/features (C,H,W), matrices (rows, cols).

// x (IC,H,W), w (OC,IC,k,k), b (OC) -> (OC,OH,OW)
template <typename T>
int conv2d(Tape<T>& tp, int x, int w, int b, int stride, int pad) {
  const Tensor<T>& xv = tp.val(x);
  const Tensor<T>& wv = tp.val(w);
  if (xv.rank() != 3 || wv.rank() != 4) throw validation_error("conv2d: bad ranks");
  if (xv.dim(0) != wv.dim(1))
    throw validation_error("conv2d: input channels " + std::to_string(xv.dim(0)) +
                           " != kernel channels " + std::to_string(wv.dim(1)));
  const int oc = wv.dim(0), ic = wv.dim(1), k = wv.dim(2);
  const int h = xv.dim(1), wd = xv.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (wd + 2 * pad - k) / stride + 1;
  if (oh <= 0 || ow <= 0) throw validation_error("conv2d: output collapses to zero size");

  Tensor<T> col;
  im2col(xv, k, stride, pad, col);
  Tensor<T> out({oc, oh, ow});
  gemm(wv.data(), col.data(), out.data(), oc, ic * k * k, oh * ow, false);
  const Tensor<T>& bv = tp.val(b);
  for (int c = 0; c < oc; ++c) {
    T* row = &out.at(c, 0, 0);
    for (int i = 0; i < oh * ow; ++i) row[i] += bv[c];
  }

  int id = tp.push(std::move(out), any_grad(tp, {x, w, b}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    if (t.needs_grad(b)) {
      Tensor<T>& db = t.grad(b);
      for (int c = 0; c < oc; ++c) {
        T s = 0;
        const T* row = &dy.at(c, 0, 0);
        for (int i = 0; i < oh * ow; ++i) s += row[i];
        db[c] += s;
      }
    }
    if (t.needs_grad(w) || t.needs_grad(x)) {
      if (t.needs_grad(w)) {
        Tensor<T> col2;
        im2col(t.val(x), k, stride, pad, col2);
        gemm_nt(dy.data(), col2.data(), t.grad(w).data(), oc, oh * ow, ic * k * k, true);
      }
      if (t.needs_grad(x)) {
        Tensor<T> dcol({ic * k * k, oh * ow});
        gemm_tn(t.val(w).data(), dy.data(), dcol.data(), oc, ic * k * k, oh * ow, false);
        col2im_accum(dcol, ic, h, wd, k, stride, pad, t.grad(x));
      }
    }
  });
  return id;
}

template <typename T>
int relu(Tape<T>& tp, int x) {
  Tensor<T> out = tp.val(x);
  for (int i = 0; i < out.numel(); ++i)
    if (out[i] < T(0)) out[i] = T(0);
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    const Tensor<T>& xv = t.val(x);
    Tensor<T>& dx = t.grad(x);
    for (int i = 0; i < dy.numel(); ++i)
      if (xv[i] > T(0)) dx[i] += dy[i];
  });
  return id;
}

template <typename T>
int add(Tape<T>& tp, int a, int b) {
  const Tensor<T>& av = tp.val(a);
  const Tensor<T>& bv = tp.val(b);
  if (!av.same_shape(bv)) throw validation_error("add: shape mismatch");
  Tensor<T> out = av;
  for (int i = 0; i < out.numel(); ++i) out[i] += bv[i];
  int id = tp.push(std::move(out), any_grad(tp, {a, b}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor<T>& da = t.grad(a);
      for (int i = 0; i < dy.numel(); ++i) da[i] += dy[i];
    }
    if (t.needs_grad(b)) {
      Tensor<T>& db = t.grad(b);
      for (int i = 0; i < dy.numel(); ++i) db[i] += dy[i];
    }
  });
  return id;
}

// clamp into [0,1]; gradient passes through the interior only
template <typename T>
int clamp01(Tape<T>& tp, int x) {
  Tensor<T> out = tp.val(x);
  for (int i = 0; i < out.numel(); ++i) out[i] = std::min(T(1), std::max(T(0), out[i]));
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    const Tensor<T>& xv = t.val(x);
    Tensor<T>& dx = t.grad(x);
    for (int i = 0; i < dy.numel(); ++i)
      if (xv[i] >= T(0) && xv[i] <= T(1)) dx[i] += dy[i];
  });
  return id;
}

template <typename T>
int scale(Tape<T>& tp, int x, T s) {
  Tensor<T> out = tp.val(x);
  for (int i = 0; i < out.numel(); ++i) out[i] *= s;
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int i = 0; i < dy.numel(); ++i) dx[i] += s * dy[i];
  });
  return id;
}

// (Ca,H,W) ++ (Cb,H,W) -> (Ca+Cb,H,W)
template <typename T>
int concat_ch(Tape<T>& tp, int a, int b) {
  const Tensor<T>& av = tp.val(a);
  const Tensor<T>& bv = tp.val(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw validation_error("concat_ch: spatial shape mismatch");
  const int ca = av.dim(0), cb = bv.dim(0), hw = av.dim(1) * av.dim(2);
  Tensor<T> out({ca + cb, av.dim(1), av.dim(2)});
  std::copy(av.data(), av.data() + static_cast<size_t>(ca) * hw, out.data());
  std::copy(bv.data(), bv.data() + static_cast<size_t>(cb) * hw,
            out.data() + static_cast<size_t>(ca) * hw);
  int id = tp.push(std::move(out), any_grad(tp, {a, b}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor<T>& da = t.grad(a);
      for (int i = 0; i < ca * hw; ++i) da[i] += dy[i];
    }
    if (t.needs_grad(b)) {
      Tensor<T>& db = t.grad(b);
      for (int i = 0; i < cb * hw; ++i) db[i] += dy[ca * hw + i];
    }
  });
  return id;
}

// channels [c0, c1) of a (C,H,W) map
template <typename T>
int slice_ch(Tape<T>& tp, int x, int c0, int c1) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 3 || c0 < 0 || c1 > xv.dim(0) || c0 >= c1)
    throw validation_error("slice_ch: bad channel range");
  const int hw = xv.dim(1) * xv.dim(2);
  Tensor<T> out({c1 - c0, xv.dim(1), xv.dim(2)});
  std::copy(xv.data() + static_cast<size_t>(c0) * hw, xv.data() + static_cast<size_t>(c1) * hw,
            out.data());
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int i = 0; i < (c1 - c0) * hw; ++i) dx[c0 * hw + i] += dy[i];
  });
  return id;
}

namespace detail {
struct LinTap {
  int i0, i1;
  double w0, w1;
};
inline std::vector<LinTap> half_pixel_taps(int out_n, int in_n) {
  std::vector<LinTap> taps(static_cast<size_t>(out_n));
  for (int o = 0; o < out_n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    int i0 = static_cast<int>(std::floor(src));
    double f = src - i0;
    int j0 = std::clamp(i0, 0, in_n - 1);
    int j1 = std::clamp(i0 + 1, 0, in_n - 1);
    taps[static_cast<size_t>(o)] = {j0, j1, 1.0 - f, f};
  }
  return taps;
}
}  // namespace detail

// factor-2 bilinear upsampling, half-pixel centers
template <typename T>
int upsample2x(Tape<T>& tp, int x) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 3) throw validation_error("upsample2x: rank != 3");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int oh = h * 2, ow = w * 2;
  auto ty = detail::half_pixel_taps(oh, h);
  auto tx = detail::half_pixel_taps(ow, w);
  Tensor<T> out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const auto& a = ty[static_cast<size_t>(oy)];
        const auto& bq = tx[static_cast<size_t>(ox)];
        out.at(ch, oy, ox) =
            static_cast<T>(a.w0 * (bq.w0 * xv.at(ch, a.i0, bq.i0) + bq.w1 * xv.at(ch, a.i0, bq.i1)) +
                           a.w1 * (bq.w0 * xv.at(ch, a.i1, bq.i0) + bq.w1 * xv.at(ch, a.i1, bq.i1)));
      }
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const auto& a = ty[static_cast<size_t>(oy)];
          const auto& bq = tx[static_cast<size_t>(ox)];
          T g = dy.at(ch, oy, ox);
          dx.at(ch, a.i0, bq.i0) += static_cast<T>(a.w0 * bq.w0) * g;
          dx.at(ch, a.i0, bq.i1) += static_cast<T>(a.w0 * bq.w1) * g;
          dx.at(ch, a.i1, bq.i0) += static_cast<T>(a.w1 * bq.w0) * g;
          dx.at(ch, a.i1, bq.i1) += static_cast<T>(a.w1 * bq.w1) * g;
        }
  });
  return id;
}

// per-pixel L2 normalization across channels
template <typename T>
int l2norm_ch(Tape<T>& tp, int x, T eps = T(1e-12)) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 3) throw validation_error("l2norm_ch: rank != 3");
  const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  Tensor<T> out(xv.shape);
  for (int p = 0; p < hw; ++p) {
    T s = 0;
    for (int ch = 0; ch < c; ++ch) {
      T v = xv[ch * hw + p];
      s += v * v;
    }
    T r = std::sqrt(s);
    T rc = std::max(r, eps);
    for (int ch = 0; ch < c; ++ch) out[ch * hw + p] = xv[ch * hw + p] / rc;
  }
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    const Tensor<T>& xin = t.val(x);
    const Tensor<T>& y = t.val(id);
    Tensor<T>& dx = t.grad(x);
    for (int p = 0; p < hw; ++p) {
      T s = 0;
      for (int ch = 0; ch < c; ++ch) {
        T v = xin[ch * hw + p];
        s += v * v;
      }
      T r = std::sqrt(s);
      if (r > eps) {
        T dot = 0;
        for (int ch = 0; ch < c; ++ch) dot += y[ch * hw + p] * dy[ch * hw + p];
        for (int ch = 0; ch < c; ++ch)
          dx[ch * hw + p] += (dy[ch * hw + p] - y[ch * hw + p] * dot) / r;
      } else {
        for (int ch = 0; ch < c; ++ch) dx[ch * hw + p] += dy[ch * hw + p] / eps;
      }
    }
  });
  return id;
}

// (C,H,W) -> (H*W, C): one row per pixel
template <typename T>
int chw_to_rows(Tape<T>& tp, int x) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 3) throw validation_error("chw_to_rows: rank != 3");
  const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  Tensor<T> out({hw, c});
  for (int ch = 0; ch < c; ++ch)
    for (int p = 0; p < hw; ++p) out[p * c + ch] = xv[ch * hw + p];
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int p = 0; p < hw; ++p) dx[ch * hw + p] += dy[p * c + ch];
  });
  return id;
}

// (H*W, C) -> (C,H,W)
template <typename T>
int rows_to_chw(Tape<T>& tp, int x, int h, int w) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 2 || xv.dim(0) != h * w) throw validation_error("rows_to_chw: bad shape");
  const int c = xv.dim(1), hw = h * w;
  Tensor<T> out({c, h, w});
  for (int p = 0; p < hw; ++p)
    for (int ch = 0; ch < c; ++ch) out[ch * hw + p] = xv[p * c + ch];
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int p = 0; p < hw; ++p)
      for (int ch = 0; ch < c; ++ch) dx[p * c + ch] += dy[ch * hw + p];
  });
  return id;
}

// rows of several (R_i, C) matrices stacked in order
template <typename T>
int stack_rows(Tape<T>& tp, const std::vector<int>& xs) {
  if (xs.empty()) throw validation_error("stack_rows: empty input");
  const int c = tp.val(xs[0]).dim(1);
  int rows = 0;
  for (int x : xs) {
    const Tensor<T>& v = tp.val(x);
    if (v.rank() != 2 || v.dim(1) != c) throw validation_error("stack_rows: column mismatch");
    rows += v.dim(0);
  }
  Tensor<T> out({rows, c});
  int off = 0;
  bool ng = false;
  for (int x : xs) {
    const Tensor<T>& v = tp.val(x);
    std::copy(v.data(), v.data() + v.numel(), out.data() + static_cast<size_t>(off) * c);
    off += v.dim(0);
    ng = ng || tp.needs_grad(x);
  }
  int id = tp.push(std::move(out), ng && tp.grad_enabled());
  std::vector<int> parents = xs;
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    int o = 0;
    for (int x : parents) {
      int r = t.val(x).dim(0);
      if (t.needs_grad(x)) {
        Tensor<T>& dx = t.grad(x);
        for (int i = 0; i < r * c; ++i) dx[i] += dy[o * c + i];
      }
      o += r;
    }
  });
  return id;
}

// a (P,D), b (Q,D) -> (P,Q) of row dot products
template <typename T>
int matmul_nt(Tape<T>& tp, int a, int b) {
  const Tensor<T>& av = tp.val(a);
  const Tensor<T>& bv = tp.val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    throw validation_error("matmul_nt: inner dimension mismatch " + shape_str(av.shape) + " vs " +
                           shape_str(bv.shape));
  const int p = av.dim(0), d = av.dim(1), q = bv.dim(0);
  Tensor<T> out({p, q});
  gemm_nt(av.data(), bv.data(), out.data(), p, d, q, false);
  int id = tp.push(std::move(out), any_grad(tp, {a, b}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    if (t.needs_grad(a)) gemm(dy.data(), t.val(b).data(), t.grad(a).data(), p, q, d, true);
    if (t.needs_grad(b)) gemm_tn(dy.data(), t.val(a).data(), t.grad(b).data(), p, q, d, true);
  });
  return id;
}

// A (P,Q), v (P,C) -> A^T v (Q,C)
template <typename T>
int matmul_tn(Tape<T>& tp, int a, int v) {
  const Tensor<T>& av = tp.val(a);
  const Tensor<T>& vv = tp.val(v);
  if (av.rank() != 2 || vv.rank() != 2 || av.dim(0) != vv.dim(0))
    throw validation_error("matmul_tn: row count mismatch " + shape_str(av.shape) + " vs " +
                           shape_str(vv.shape));
  const int p = av.dim(0), q = av.dim(1), c = vv.dim(1);
  Tensor<T> out({q, c});
  gemm_tn(av.data(), vv.data(), out.data(), p, q, c, false);
  int id = tp.push(std::move(out), any_grad(tp, {a, v}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    if (t.needs_grad(a)) gemm_nt(t.val(v).data(), dy.data(), t.grad(a).data(), p, c, q, true);
    if (t.needs_grad(v)) gemm(t.val(a).data(), dy.data(), t.grad(v).data(), p, q, c, true);
  });
  return id;
}

// column-wise softmax of (P,Q): every column sums to one
template <typename T>
int softmax_cols(Tape<T>& tp, int x) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 2) throw validation_error("softmax_cols: rank != 2");
  const int p = xv.dim(0), q = xv.dim(1);
  Tensor<T> out(xv.shape);
  for (int j = 0; j < q; ++j) {
    T m = -std::numeric_limits<T>::infinity();
    for (int i = 0; i < p; ++i) m = std::max(m, xv.at(i, j));
    T z = 0;
    for (int i = 0; i < p; ++i) {
      T e = std::exp(xv.at(i, j) - m);
      out.at(i, j) = e;
      z += e;
    }
    for (int i = 0; i < p; ++i) out.at(i, j) /= z;
  }
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    const Tensor<T>& y = t.val(id);
    Tensor<T>& dx = t.grad(x);
    for (int j = 0; j < q; ++j) {
      T dot = 0;
      for (int i = 0; i < p; ++i) dot += dy.at(i, j) * y.at(i, j);
      for (int i = 0; i < p; ++i) dx.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
    }
  });
  return id;
}

// mean over rows of -log softmax(row)[target]; the contrastive loss kernel
template <typename T>
int cross_entropy_rows(Tape<T>& tp, int s, const std::vector<int>& targets) {
  const Tensor<T>& sv = tp.val(s);
  if (sv.rank() != 2) throw validation_error("cross_entropy_rows: rank != 2");
  const int r = sv.dim(0), l = sv.dim(1);
  if (static_cast<int>(targets.size()) != r)
    throw validation_error("cross_entropy_rows: target count " +
                           std::to_string(targets.size()) + " != rows " + std::to_string(r));
  for (int t : targets)
    if (t < 0 || t >= l) throw validation_error("cross_entropy_rows: target index out of range");
  double acc = 0;
  for (int i = 0; i < r; ++i) {
    const T* row = &sv.at(i, 0);
    T m = row[0];
    for (int j = 1; j < l; ++j) m = std::max(m, row[j]);
    double z = 0;
    for (int j = 0; j < l; ++j) z += std::exp(static_cast<double>(row[j] - m));
    acc += std::log(z) + static_cast<double>(m) - static_cast<double>(row[targets[static_cast<size_t>(i)]]);
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / r);
  int id = tp.push(std::move(out), any_grad(tp, {s}));
  std::vector<int> tg = targets;
  tp.set_back(id, [=](Tape<T>& t) {
    T g = t.grad(id)[0] / static_cast<T>(r);
    const Tensor<T>& sin = t.val(s);
    Tensor<T>& ds = t.grad(s);
    for (int i = 0; i < r; ++i) {
      const T* row = &sin.at(i, 0);
      T m = row[0];
      for (int j = 1; j < l; ++j) m = std::max(m, row[j]);
      T z = 0;
      for (int j = 0; j < l; ++j) z += std::exp(row[j] - m);
      for (int j = 0; j < l; ++j) {
        T p = std::exp(row[j] - m) / z;
        ds.at(i, j) += g * (p - (j == tg[static_cast<size_t>(i)] ? T(1) : T(0)));
      }
    }
  });
  return id;
}

// logits (2,H,W) vs binary target (H,W): mean softmax cross-entropy.
// Channel 0 is background, channel 1 foreground.
template <typename T>
int softmax_ce_map(Tape<T>& tp, int logits, const Tensor<float>& target) {
  const Tensor<T>& lv = tp.val(logits);
  if (lv.rank() != 3 || lv.dim(0) != 2) throw validation_error("softmax_ce_map: want (2,H,W)");
  if (target.rank() != 2 || target.dim(0) != lv.dim(1) || target.dim(1) != lv.dim(2))
    throw validation_error("softmax_ce_map: target shape mismatch");
  const int hw = lv.dim(1) * lv.dim(2);
  double acc = 0;
  for (int p = 0; p < hw; ++p) {
    double a = lv[p], b = lv[hw + p];  // bg, fg
    double m = std::max(a, b);
    double z = std::exp(a - m) + std::exp(b - m);
    double chosen = target[p] > 0.5f ? b : a;
    acc += std::log(z) + m - chosen;
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / hw);
  int id = tp.push(std::move(out), any_grad(tp, {logits}));
  Tensor<float> tgt = target;
  tp.set_back(id, [=](Tape<T>& t) {
    T g = t.grad(id)[0] / static_cast<T>(hw);
    const Tensor<T>& lin = t.val(logits);
    Tensor<T>& dl = t.grad(logits);
    for (int p = 0; p < hw; ++p) {
      T a = lin[p], b = lin[hw + p];
      T m = std::max(a, b);
      T ea = std::exp(a - m), eb = std::exp(b - m);
      T z = ea + eb;
      bool fg = tgt[p] > 0.5f;
      dl[p] += g * (ea / z - (fg ? T(0) : T(1)));
      dl[hw + p] += g * (eb / z - (fg ? T(1) : T(0)));
    }
  });
  return id;
}

// weighted sum of scalar nodes
template <typename T>
int weighted_sum(Tape<T>& tp, const std::vector<int>& xs, const std::vector<T>& ws) {
  if (xs.size() != ws.size() || xs.empty()) throw validation_error("weighted_sum: bad arity");
  T acc = 0;
  bool ng = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Tensor<T>& v = tp.val(xs[i]);
    if (v.numel() != 1) throw validation_error("weighted_sum: non-scalar term");
    acc += ws[i] * v[0];
    ng = ng || tp.needs_grad(xs[i]);
  }
  Tensor<T> out({1});
  out[0] = acc;
  int id = tp.push(std::move(out), ng && tp.grad_enabled());
  std::vector<int> parents = xs;
  std::vector<T> weights = ws;
  tp.set_back(id, [=](Tape<T>& t) {
    T g = t.grad(id)[0];
    for (size_t i = 0; i < parents.size(); ++i)
      if (t.needs_grad(parents[i])) t.grad(parents[i])[0] += weights[i] * g;
  });
  return id;
}

// gather on spatial cells: out[c, o] = x[c, src[o]] for every channel.
// src indexes the flattened input grid; this is the engine behind flips
// and crops on feature grids (channel vectors move, never mix).
template <typename T>
int remap_spatial(Tape<T>& tp, int x, const std::vector<int>& src, int oh, int ow) {
  const Tensor<T>& xv = tp.val(x);
  if (xv.rank() != 3) throw validation_error("remap_spatial: rank != 3");
  const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  if (static_cast<int>(src.size()) != oh * ow)
    throw validation_error("remap_spatial: map size mismatch");
  for (int s : src)
    if (s < 0 || s >= hw) throw validation_error("remap_spatial: index out of bounds");
  Tensor<T> out({c, oh, ow});
  const int ohw = oh * ow;
  for (int ch = 0; ch < c; ++ch)
    for (int o = 0; o < ohw; ++o) out[ch * ohw + o] = xv[ch * hw + src[static_cast<size_t>(o)]];
  int id = tp.push(std::move(out), any_grad(tp, {x}));
  std::vector<int> map = src;
  tp.set_back(id, [=](Tape<T>& t) {
    const Tensor<T>& dy = t.grad(id);
    Tensor<T>& dx = t.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int o = 0; o < ohw; ++o) dx[ch * hw + map[static_cast<size_t>(o)]] += dy[ch * ohw + o];
  });
  return id;
}

}  // namespace ad
}  // namespace svos
