#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "flexhdr/tape.hpp"

namespace flexhdr {

namespace testhooks {
// Negates conv2d's input gradient when set. Exists only so the gradient
// checker's failure path can be exercised deliberately.
inline bool flip_conv_input_grad = false;
}  // namespace testhooks

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

inline int conv_out_extent(int in, int pad, int k, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

// Gathers conv input patches into a (Hout*Wout) x (k*k*Cin) matrix.
// Out-of-range taps read as zero.
template <typename T>
void im2col(const Tensor<T>& in, int k, int stride, int pad, std::vector<T>& col, int ho, int wo) {
  const int h = in.h(), w = in.w(), c = in.c();
  col.assign(static_cast<size_t>(ho) * wo * k * k * c, T(0));
  T* out = col.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) {
          out += k * c;
          continue;
        }
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix >= 0 && ix < w) {
            const T* src = in.data() + (static_cast<std::int64_t>(iy) * w + ix) * c;
            std::copy(src, src + c, out);
          }
          out += c;
        }
      }
    }
  }
}

// Scatter-adds a (Hout*Wout) x (k*k*Cin) gradient matrix back onto the input.
template <typename T>
void col2im_accum(const std::vector<T>& col, int k, int stride, int pad, Tensor<T>& din, int ho, int wo) {
  const int h = din.h(), w = din.w(), c = din.c();
  const T* src = col.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) {
          src += k * c;
          continue;
        }
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix >= 0 && ix < w) {
            T* dst = din.data() + (static_cast<std::int64_t>(iy) * w + ix) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
          src += c;
        }
      }
    }
  }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
}

}  // namespace detail

// 2-D convolution of one NHWC-less image (H x W x Cin). weight is
// k x k x Cin x Cout, bias Cout. Same-size convention at stride 1 needs
// pad = (k-1)/2, which is the default.
template <typename T>
VarId conv2d(Tape<T>& t, VarId input, VarId weight, VarId bias, int stride = 1, int pad = -1) {
  const Tensor<T>& x = t.value(input);
  const Tensor<T>& w = t.value(weight);
  const Tensor<T>& b = t.value(bias);
  if (x.shape().ndim() != 3)
    throw std::invalid_argument("conv2d: input must be HxWxC, got " + x.shape().str());
  if (w.shape().ndim() != 4)
    throw std::invalid_argument("conv2d: weight must be kxkxCinxCout, got " + w.shape().str());
  const int k = w.shape()[0];
  if (w.shape()[1] != k) throw std::invalid_argument("conv2d: non-square kernel " + w.shape().str());
  if (k % 2 == 0) throw std::invalid_argument("conv2d: kernel extent must be odd, got " + std::to_string(k));
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
  const int cin = w.shape()[2], cout = w.shape()[3];
  if (x.c() != cin)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(x.c()) +
                                " do not match weight Cin " + std::to_string(cin));
  if (b.shape().ndim() != 1 || b.shape()[0] != cout)
    throw std::invalid_argument("conv2d: bias extent " + b.shape().str() + " does not match Cout " +
                                std::to_string(cout));
  if (pad < 0) pad = (k - 1) / 2;

  const int ho = detail::conv_out_extent(x.h(), pad, k, stride);
  const int wo = detail::conv_out_extent(x.w(), pad, k, stride);
  if (ho <= 0 || wo <= 0)
    throw std::invalid_argument("conv2d: empty output for input " + x.shape().str());
  const std::int64_t rows = static_cast<std::int64_t>(ho) * wo;
  const std::int64_t patch = static_cast<std::int64_t>(k) * k * cin;

  std::vector<T> col;
  detail::im2col(x, k, stride, pad, col, ho, wo);
  Tensor<T> y(Shape::hwc(ho, wo, cout));
  {
    ConstMatMap<T> cm(col.data(), rows, patch);
    ConstMatMap<T> wm(w.data(), patch, cout);
    MatMap<T> ym(y.data(), rows, cout);
    ym.noalias() = cm * wm;
    for (int ch = 0; ch < cout; ++ch) ym.col(ch).array() += b[ch];
  }

  return t.record(std::move(y), [=](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    ConstMatMap<T> gym(gy.data(), rows, cout);

    std::vector<T> colb;
    detail::im2col(tp.value(input), k, stride, pad, colb, ho, wo);
    ConstMatMap<T> cm(colb.data(), rows, patch);
    ConstMatMap<T> wm(tp.value(weight).data(), patch, cout);

    {
      Tensor<T>& gw = tp.grad(weight);
      MatMap<T> gwm(gw.data(), patch, cout);
      gwm.noalias() += cm.transpose() * gym;
    }
    {
      Tensor<T>& gb = tp.grad(bias);
      for (int ch = 0; ch < cout; ++ch) gb[ch] += gym.col(ch).sum();
    }
    {
      std::vector<T> gcol(static_cast<size_t>(rows) * patch);
      MatMap<T> gcm(gcol.data(), rows, patch);
      gcm.noalias() = gym * wm.transpose();
      if (testhooks::flip_conv_input_grad) gcm = -gcm;
      detail::col2im_accum(gcol, k, stride, pad, tp.grad(input), ho, wo);
    }
  });
}

enum class Act { Relu, LeakyRelu, Sigmoid };

// Elementwise nonlinearity. LeakyRelu uses slope 0.1 on the negative side.
template <typename T>
VarId activation(Tape<T>& t, VarId input, Act mode) {
  const Tensor<T>& x = t.value(input);
  Tensor<T> y(x.shape());
  const T slope = T(0.1);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    switch (mode) {
      case Act::Relu: y[i] = x[i] > T(0) ? x[i] : T(0); break;
      case Act::LeakyRelu: y[i] = x[i] > T(0) ? x[i] : slope * x[i]; break;
      case Act::Sigmoid: y[i] = T(1) / (T(1) + std::exp(-x[i])); break;
    }
  }
  return t.record(std::move(y), [input, mode, slope](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& x = tp.value(input);
    const Tensor<T>& y = tp.value(self);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      switch (mode) {
        case Act::Relu: gx[i] += x[i] > T(0) ? gy[i] : T(0); break;
        case Act::LeakyRelu: gx[i] += x[i] > T(0) ? gy[i] : slope * gy[i]; break;
        case Act::Sigmoid: gx[i] += gy[i] * y[i] * (T(1) - y[i]); break;
      }
    }
  });
}

template <typename T>
VarId relu(Tape<T>& t, VarId x) { return activation(t, x, Act::Relu); }
template <typename T>
VarId leaky_relu(Tape<T>& t, VarId x) { return activation(t, x, Act::LeakyRelu); }
template <typename T>
VarId sigmoid(Tape<T>& t, VarId x) { return activation(t, x, Act::Sigmoid); }

// Elementwise maximum over a nonempty list of same-shape streams. Forward is
// exactly permutation-invariant; backward routes each element's adjoint to the
// lowest-index stream attaining the maximum.
template <typename T>
VarId set_max(Tape<T>& t, const std::vector<VarId>& streams) {
  if (streams.empty()) throw std::invalid_argument("set_max: empty stream list");
  const Tensor<T>& first = t.value(streams[0]);
  for (size_t s = 1; s < streams.size(); ++s)
    detail::check_same_shape(first, t.value(streams[s]), "set_max");
  Tensor<T> y = first;
  for (size_t s = 1; s < streams.size(); ++s) {
    const Tensor<T>& v = t.value(streams[s]);
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = std::max(y[i], v[i]);
  }
  return t.record(std::move(y), [streams](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& y = tp.value(self);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      if (gy[i] == T(0)) continue;
      for (VarId s : streams) {
        if (tp.value(s)[i] == y[i]) {
          tp.grad(s)[i] += gy[i];
          break;
        }
      }
    }
  });
}

// Bilinear sampling kernel shared by the op below and plain data-space
// resampling (synthetic rendering, baseline merge). coords are continuous
// source-pixel positions; out-of-range positions clamp to the border.
template <typename T>
void bilinear_sample_data(const Tensor<T>& in, const Tensor<T>& coords, Tensor<T>& out) {
  const int h = in.h(), w = in.w(), c = in.c();
  const int ho = coords.h(), wo = coords.w();
  for (int y = 0; y < ho; ++y) {
    for (int x = 0; x < wo; ++x) {
      T sx = coords.at(y, x, 0), sy = coords.at(y, x, 1);
      sx = std::clamp(sx, T(0), T(w - 1));
      sy = std::clamp(sy, T(0), T(h - 1));
      const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const T fx = sx - static_cast<T>(x0), fy = sy - static_cast<T>(y0);
      const T* p00 = &in.at(y0, x0, 0);
      const T* p01 = &in.at(y0, x1, 0);
      const T* p10 = &in.at(y1, x0, 0);
      const T* p11 = &in.at(y1, x1, 0);
      T* o = &out.at(y, x, 0);
      for (int ch = 0; ch < c; ++ch) {
        const T top = p00[ch] + fx * (p01[ch] - p00[ch]);
        const T bot = p10[ch] + fx * (p11[ch] - p10[ch]);
        o[ch] = top + fy * (bot - top);
      }
    }
  }
}

// Bilinear resampling of input (H x W x C) at coords (H' x W' x 2, (x, y) in
// source pixel units). Differentiable in both the input and the coordinates;
// clamped samples contribute zero coordinate gradient.
template <typename T>
VarId bilinear_resample(Tape<T>& t, VarId input, VarId coords) {
  const Tensor<T>& in = t.value(input);
  const Tensor<T>& co = t.value(coords);
  if (in.shape().ndim() != 3)
    throw std::invalid_argument("bilinear_resample: input must be HxWxC, got " + in.shape().str());
  if (co.shape().ndim() != 3 || co.c() != 2)
    throw std::invalid_argument("bilinear_resample: coords must be HxWx2, got " + co.shape().str());
  Tensor<T> y(Shape::hwc(co.h(), co.w(), in.c()));
  bilinear_sample_data(in, co, y);
  return t.record(std::move(y), [input, coords](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& in = tp.value(input);
    const Tensor<T>& co = tp.value(coords);
    Tensor<T>& gin = tp.grad(input);
    Tensor<T>& gco = tp.grad(coords);
    const int h = in.h(), w = in.w(), c = in.c();
    const int ho = co.h(), wo = co.w();
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const T rx = co.at(y, x, 0), ry = co.at(y, x, 1);
        const bool cx = rx < T(0) || rx > T(w - 1);
        const bool cy = ry < T(0) || ry > T(h - 1);
        const T sx = std::clamp(rx, T(0), T(w - 1));
        const T sy = std::clamp(ry, T(0), T(h - 1));
        const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
        const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const T fx = sx - static_cast<T>(x0), fy = sy - static_cast<T>(y0);
        T gx_acc = T(0), gy_acc = T(0);
        for (int ch = 0; ch < c; ++ch) {
          const T g = gy.at(y, x, ch);
          if (g == T(0)) continue;
          const T v00 = in.at(y0, x0, ch), v01 = in.at(y0, x1, ch);
          const T v10 = in.at(y1, x0, ch), v11 = in.at(y1, x1, ch);
          gin.at(y0, x0, ch) += g * (T(1) - fx) * (T(1) - fy);
          gin.at(y0, x1, ch) += g * fx * (T(1) - fy);
          gin.at(y1, x0, ch) += g * (T(1) - fx) * fy;
          gin.at(y1, x1, ch) += g * fx * fy;
          gx_acc += g * ((v01 - v00) * (T(1) - fy) + (v11 - v10) * fy);
          gy_acc += g * ((v10 - v00) * (T(1) - fx) + (v11 - v01) * fx);
        }
        if (!cx) gco.at(y, x, 0) += gx_acc;
        if (!cy) gco.at(y, x, 1) += gy_acc;
      }
    }
  });
}

// Mean over spatial positions per channel: H x W x C -> 1 x 1 x C.
template <typename T>
VarId spatial_mean(Tape<T>& t, VarId input) {
  const Tensor<T>& x = t.value(input);
  if (x.shape().ndim() != 3)
    throw std::invalid_argument("spatial_mean: input must be HxWxC, got " + x.shape().str());
  const int c = x.c();
  const std::int64_t n = static_cast<std::int64_t>(x.h()) * x.w();
  Tensor<T> y(Shape::hwc(1, 1, c));
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i % c] += x[i];
  for (int ch = 0; ch < c; ++ch) y[ch] /= static_cast<T>(n);
  return t.record(std::move(y), [input, n, c](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i % c] / static_cast<T>(n);
  });
}

// Channel concatenation of same-spatial-size maps.
template <typename T>
VarId concat_c(Tape<T>& t, const std::vector<VarId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_c: empty list");
  const int h = t.value(parts[0]).h(), w = t.value(parts[0]).w();
  int ctot = 0;
  for (VarId p : parts) {
    const Tensor<T>& v = t.value(p);
    if (v.h() != h || v.w() != w)
      throw std::invalid_argument("concat_c: spatial mismatch " + v.shape().str());
    ctot += v.c();
  }
  Tensor<T> y(Shape::hwc(h, w, ctot));
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx) {
      T* dst = &y.at(yy, xx, 0);
      for (VarId p : parts) {
        const Tensor<T>& v = t.value(p);
        const T* src = &v.at(yy, xx, 0);
        dst = std::copy(src, src + v.c(), dst);
      }
    }
  return t.record(std::move(y), [parts, h, w](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const T* src = &gy.at(yy, xx, 0);
        for (VarId p : parts) {
          Tensor<T>& gp = tp.grad(p);
          const int pc = gp.c();
          T* dst = &gp.at(yy, xx, 0);
          for (int ch = 0; ch < pc; ++ch) dst[ch] += src[ch];
          src += pc;
        }
      }
  });
}

// Channel slice [c0, c1).
template <typename T>
VarId slice_c(Tape<T>& t, VarId input, int c0, int c1) {
  const Tensor<T>& x = t.value(input);
  if (c0 < 0 || c1 > x.c() || c0 >= c1)
    throw std::invalid_argument("slice_c: bad channel range on " + x.shape().str());
  Tensor<T> y(Shape::hwc(x.h(), x.w(), c1 - c0));
  for (int yy = 0; yy < x.h(); ++yy)
    for (int xx = 0; xx < x.w(); ++xx)
      for (int ch = c0; ch < c1; ++ch) y.at(yy, xx, ch - c0) = x.at(yy, xx, ch);
  return t.record(std::move(y), [input, c0, c1](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& gx = tp.grad(input);
    for (int yy = 0; yy < gx.h(); ++yy)
      for (int xx = 0; xx < gx.w(); ++xx)
        for (int ch = c0; ch < c1; ++ch) gx.at(yy, xx, ch) += gy.at(yy, xx, ch - c0);
  });
}

template <typename T>
VarId add(Tape<T>& t, VarId a, VarId b) {
  detail::check_same_shape(t.value(a), t.value(b), "add");
  Tensor<T> y = t.value(a);
  const Tensor<T>& vb = t.value(b);
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] += vb[i];
  return t.record(std::move(y), [a, b](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (std::int64_t i = 0; i < gy.numel(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  });
}

template <typename T>
VarId sub(Tape<T>& t, VarId a, VarId b) {
  detail::check_same_shape(t.value(a), t.value(b), "sub");
  Tensor<T> y = t.value(a);
  const Tensor<T>& vb = t.value(b);
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] -= vb[i];
  return t.record(std::move(y), [a, b](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (std::int64_t i = 0; i < gy.numel(); ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  });
}

// Elementwise product. A single-channel H x W x 1 factor broadcasts across the
// other side's channels (confidence-map gating).
template <typename T>
VarId mul(Tape<T>& t, VarId a, VarId b) {
  const Tensor<T>& va = t.value(a);
  const Tensor<T>& vb = t.value(b);
  const bool bcast_b = vb.c() == 1 && va.c() > 1;
  const bool bcast_a = va.c() == 1 && vb.c() > 1;
  if (!bcast_a && !bcast_b) detail::check_same_shape(va, vb, "mul");
  if ((bcast_a || bcast_b) && (va.h() != vb.h() || va.w() != vb.w()))
    throw std::invalid_argument("mul: spatial mismatch " + va.shape().str() + " vs " + vb.shape().str());

  const Tensor<T>& wide = bcast_a ? vb : va;
  const Tensor<T>& narrow = bcast_a ? va : vb;
  const int c = wide.c();
  const bool bcast = bcast_a || bcast_b;
  Tensor<T> y(wide.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i)
    y[i] = wide[i] * (bcast ? narrow[i / c] : narrow[i]);
  const VarId wid = bcast_a ? b : a;
  const VarId nid = bcast_a ? a : b;
  return t.record(std::move(y), [wid, nid, c, bcast](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& vw = tp.value(wid);
    const Tensor<T>& vn = tp.value(nid);
    Tensor<T>& gw = tp.grad(wid);
    Tensor<T>& gn = tp.grad(nid);
    for (std::int64_t i = 0; i < gy.numel(); ++i) {
      const std::int64_t ni = bcast ? i / c : i;
      gw[i] += gy[i] * vn[ni];
      gn[ni] += gy[i] * vw[i];
    }
  });
}

template <typename T>
VarId abs_val(Tape<T>& t, VarId input) {
  const Tensor<T>& x = t.value(input);
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = std::abs(x[i]);
  return t.record(std::move(y), [input](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& x = tp.value(input);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < x.numel(); ++i)
      gx[i] += x[i] > T(0) ? gy[i] : (x[i] < T(0) ? -gy[i] : T(0));
  });
}

template <typename T>
VarId scale(Tape<T>& t, VarId input, T s) {
  Tensor<T> y = t.value(input);
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] *= s;
  return t.record(std::move(y), [input, s](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < gy.numel(); ++i) gx[i] += s * gy[i];
  });
}

// Multiplies each channel by its own factor (flow upsampling rescales dx and
// dy by the horizontal and vertical zoom independently).
template <typename T>
VarId scale_per_channel(Tape<T>& t, VarId input, std::vector<T> factors) {
  const Tensor<T>& x = t.value(input);
  const int c = x.c();
  if (static_cast<int>(factors.size()) != c)
    throw std::invalid_argument("scale_per_channel: factor count does not match channels");
  Tensor<T> y = x;
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] *= factors[static_cast<size_t>(i % c)];
  return t.record(std::move(y), [input, factors, c](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * factors[static_cast<size_t>(i % c)];
  });
}

template <typename T>
VarId add_scalar(Tape<T>& t, VarId input, T s) {
  Tensor<T> y = t.value(input);
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] += s;
  return t.record(std::move(y), [input](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
  });
}

// Mean over all elements -> scalar.
template <typename T>
VarId mean_all(Tape<T>& t, VarId input) {
  const Tensor<T>& x = t.value(input);
  const std::int64_t n = x.numel();
  T s = 0;
  for (std::int64_t i = 0; i < n; ++i) s += x[i];
  return t.record(Tensor<T>::scalar(s / static_cast<T>(n)), [input, n](Tape<T>& tp, VarId self) {
    const T g = tp.grad(self)[0] / static_cast<T>(n);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
  });
}

// mu-law range compression log(1 + mu*x) / log(1 + mu), valid for x >= 0.
template <typename T>
VarId mu_tonemap(Tape<T>& t, VarId input, T mu = T(5000)) {
  const Tensor<T>& x = t.value(input);
  const T denom = std::log1p(mu);
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] < T(0)) throw std::invalid_argument("mu_tonemap: negative input");
    y[i] = std::log1p(mu * x[i]) / denom;
  }
  return t.record(std::move(y), [input, mu, denom](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& x = tp.value(input);
    Tensor<T>& gx = tp.grad(input);
    for (std::int64_t i = 0; i < x.numel(); ++i)
      gx[i] += gy[i] * mu / ((T(1) + mu * x[i]) * denom);
  });
}

// Copies a value out of the graph: gradient stops here.
template <typename T>
VarId detach(Tape<T>& t, VarId input) {
  return t.constant(t.value(input));
}

}  // namespace flexhdr
