#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spf/prng.hpp"
#include "spf/tape.hpp"

// Differentiable layer primitives. Every op validates its input shapes,
// computes the forward value with 64-bit accumulation in reductions, and
// records a backward rule on the tape. All ops are pure functions of their
// inputs; dropout takes its mask from an explicit PRNG stream.

namespace spf {

enum class Pad { Same, Valid };
enum class Mode { Train, Eval };

namespace detail {

template <typename T>
void check_3d(const Tensor<T>& x, const char* op) {
  if (x.rank() != 3) throw ShapeError(std::string(op) + ": expected [C,H,W], got " + x.shape_str());
}

}  // namespace detail

// -- convolution --------------------------------------------------------

inline int conv_out_dim(int in, int pad, int k, int dilation, int stride) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

namespace detail {

// Output index range [lo, hi] for one kernel tap so the corresponding
// input index stays inside [0, in).
struct TapRange {
  int lo, hi;
};

inline TapRange tap_range(int in, int out, int pad, int tap_offset, int stride) {
  const int lo_num = pad - tap_offset;
  const int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = in - 1 + pad - tap_offset;
  const int hi = hi_num < 0 ? -1 : std::min(out - 1, hi_num / stride);
  return {lo, hi};
}

}  // namespace detail

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int dilation, Pad padding) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  const Tensor<T>& wv = tape.val(w);
  const Tensor<T>& bv = tape.val(b);
  detail::check_3d(xv, "conv2d");
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3))
    throw ShapeError("conv2d: expected square kernel [C_out,C_in,k,k], got " + wv.shape_str());
  const int c_in = xv.dim(0), h = xv.dim(1), wdt = xv.dim(2);
  const int c_out = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != c_in)
    throw ShapeError("conv2d: input has " + std::to_string(c_in) + " channels but weight expects " +
                     std::to_string(wv.dim(1)));
  if (bv.rank() != 1 || bv.dim(0) != c_out)
    throw ShapeError("conv2d: bias shape " + bv.shape_str() + " does not match C_out " +
                     std::to_string(c_out));
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (stride < 1 || dilation < 1)
    throw ConfigError("conv2d: stride and dilation must be >= 1");

  const int pad = padding == Pad::Same ? dilation * (k - 1) / 2 : 0;
  const int ho = conv_out_dim(h, pad, k, dilation, stride);
  const int wo = conv_out_dim(wdt, pad, k, dilation, stride);
  if (ho < 1 || wo < 1)
    throw ShapeError("conv2d: output would be empty for input " + xv.shape_str());

  // Scalar-times-shifted-row formulation: per output element the terms
  // still arrive in (ic, kh, kw) order, so results match the textbook
  // triple loop bit for bit while the inner loop runs contiguously.
  Tensor<T> out({c_out, ho, wo});
  std::vector<double> acc(static_cast<std::size_t>(ho) * wo);
  for (int oc = 0; oc < c_out; ++oc) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(bv.at(oc)));
    for (int ic = 0; ic < c_in; ++ic) {
      const T* xc = xv.data.data() + static_cast<std::size_t>(ic) * h * wdt;
      for (int kh = 0; kh < k; ++kh) {
        const auto ohr = detail::tap_range(h, ho, pad, kh * dilation, stride);
        for (int kw = 0; kw < k; ++kw) {
          const double wval = static_cast<double>(wv.at(oc, ic, kh, kw));
          const auto owr = detail::tap_range(wdt, wo, pad, kw * dilation, stride);
          for (int oh = ohr.lo; oh <= ohr.hi; ++oh) {
            const int ih = oh * stride - pad + kh * dilation;
            const T* xrow = xc + static_cast<std::size_t>(ih) * wdt;
            double* arow = acc.data() + static_cast<std::size_t>(oh) * wo;
            const int base = -pad + kw * dilation;
            for (int ow = owr.lo; ow <= owr.hi; ++ow)
              arow[ow] += wval * static_cast<double>(xrow[ow * stride + base]);
          }
        }
      }
    }
    T* orow = out.data.data() + static_cast<std::size_t>(oc) * ho * wo;
    for (std::size_t i = 0; i < acc.size(); ++i) orow[i] = static_cast<T>(acc[i]);
  }

  const int xid = x.id, wid = w.id, bid = b.id;
  return tape.push(
      "conv2d", {xid, wid, bid}, std::move(out),
      [xid, wid, bid, stride, dilation, pad, k, c_in, c_out, h, wdt, ho, wo](
          const Tape<T>& t, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
        const Tensor<T>& xv = t.val(xid);
        const Tensor<T>& wv = t.val(wid);
        Tensor<T>& gx = grads.accum(xid);
        Tensor<T>& gw = grads.accum(wid);
        Tensor<T>& gb = grads.accum(bid);
        std::vector<double> gxacc(static_cast<std::size_t>(h) * wdt);
        for (int oc = 0; oc < c_out; ++oc) {
          const T* grow0 = gout.data.data() + static_cast<std::size_t>(oc) * ho * wo;
          double bacc = 0.0;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i)
            bacc += static_cast<double>(grow0[i]);
          gb.at(oc) += static_cast<T>(bacc);
        }
        for (int ic = 0; ic < c_in; ++ic) {
          std::fill(gxacc.begin(), gxacc.end(), 0.0);
          const T* xc = xv.data.data() + static_cast<std::size_t>(ic) * h * wdt;
          for (int oc = 0; oc < c_out; ++oc) {
            const T* gc = gout.data.data() + static_cast<std::size_t>(oc) * ho * wo;
            for (int kh = 0; kh < k; ++kh) {
              const auto ohr = detail::tap_range(h, ho, pad, kh * dilation, stride);
              for (int kw = 0; kw < k; ++kw) {
                const auto owr = detail::tap_range(wdt, wo, pad, kw * dilation, stride);
                const double wval = static_cast<double>(wv.at(oc, ic, kh, kw));
                const int base = -pad + kw * dilation;
                double wacc = 0.0;
                for (int oh = ohr.lo; oh <= ohr.hi; ++oh) {
                  const int ih = oh * stride - pad + kh * dilation;
                  const T* grow = gc + static_cast<std::size_t>(oh) * wo;
                  const T* xrow = xc + static_cast<std::size_t>(ih) * wdt;
                  double* gxrow = gxacc.data() + static_cast<std::size_t>(ih) * wdt;
                  for (int ow = owr.lo; ow <= owr.hi; ++ow) {
                    const double g = static_cast<double>(grow[ow]);
                    wacc += g * static_cast<double>(xrow[ow * stride + base]);
                    gxrow[ow * stride + base] += g * wval;
                  }
                }
                gw.at(oc, ic, kh, kw) += static_cast<T>(wacc);
              }
            }
          }
          T* gxc = gx.data.data() + static_cast<std::size_t>(ic) * h * wdt;
          for (std::size_t i = 0; i < gxacc.size(); ++i) gxc[i] += static_cast<T>(gxacc[i]);
        }
      });
}

// -- pooling -------------------------------------------------------------

template <typename T>
Var<T> maxpool2d(Var<T> x, int k = 2, int stride = 2) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  detail::check_3d(xv, "maxpool2d");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (k > h || k > w)
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " exceeds input " + xv.shape_str());
  if (k == stride && (h % stride != 0 || w % stride != 0))
    throw ShapeError("maxpool2d: input " + xv.shape_str() + " not divisible by stride " +
                     std::to_string(stride));
  const int ho = (h - k) / stride + 1;
  const int wo = (w - k) / stride + 1;

  Tensor<T> out({c, ho, wo});
  std::vector<std::int32_t> argmax(static_cast<std::size_t>(c) * ho * wo);
  std::size_t oi = 0;
  for (int ic = 0; ic < c; ++ic) {
    for (int oh = 0; oh < ho; ++oh) {
      for (int ow = 0; ow < wo; ++ow, ++oi) {
        T best = xv.at(ic, oh * stride, ow * stride);
        int best_idx = (ic * h + oh * stride) * w + ow * stride;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const int ih = oh * stride + kh, iw = ow * stride + kw;
            const T v = xv.at(ic, ih, iw);
            if (v > best) {  // strict: ties keep the first occurrence in row-major order
              best = v;
              best_idx = (ic * h + ih) * w + iw;
            }
          }
        }
        out.at(ic, oh, ow) = best;
        argmax[oi] = best_idx;
      }
    }
  }

  const int xid = x.id;
  return tape.push("maxpool2d", {xid}, std::move(out),
                   [xid, argmax = std::move(argmax)](const Tape<T>&, const Tensor<T>& gout,
                                                     typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::size_t i = 0; i < argmax.size(); ++i)
                       gx[argmax[i]] += gout[static_cast<std::int64_t>(i)];
                   });
}

template <typename T>
Var<T> avgpool_to_grid(Var<T> x, int g) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  detail::check_3d(xv, "avgpool_to_grid");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (g < 1 || h % g != 0 || w % g != 0)
    throw ShapeError("avgpool_to_grid: grid " + std::to_string(g) + " does not divide input " +
                     xv.shape_str());
  const int bh = h / g, bw = w / g;
  const double inv = 1.0 / (static_cast<double>(bh) * bw);

  Tensor<T> out({c, g, g});
  for (int ic = 0; ic < c; ++ic) {
    for (int gh = 0; gh < g; ++gh) {
      for (int gw = 0; gw < g; ++gw) {
        double acc = 0.0;
        for (int ih = gh * bh; ih < (gh + 1) * bh; ++ih)
          for (int iw = gw * bw; iw < (gw + 1) * bw; ++iw)
            acc += static_cast<double>(xv.at(ic, ih, iw));
        out.at(ic, gh, gw) = static_cast<T>(acc * inv);
      }
    }
  }

  const int xid = x.id;
  return tape.push("avgpool_to_grid", {xid}, std::move(out),
                   [xid, c, g, bh, bw, inv](const Tape<T>&, const Tensor<T>& gout,
                                            typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (int ic = 0; ic < c; ++ic)
                       for (int gh = 0; gh < g; ++gh)
                         for (int gw = 0; gw < g; ++gw) {
                           const T share = static_cast<T>(static_cast<double>(gout.at(ic, gh, gw)) * inv);
                           for (int ih = gh * bh; ih < (gh + 1) * bh; ++ih)
                             for (int iw = gw * bw; iw < (gw + 1) * bw; ++iw)
                               gx.at(ic, ih, iw) += share;
                         }
                   });
}

template <typename T>
Var<T> upsample_nearest(Var<T> x, int factor) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  detail::check_3d(xv, "upsample_nearest");
  if (factor < 1) throw ConfigError("upsample_nearest: factor must be >= 1");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);

  Tensor<T> out({c, h * factor, w * factor});
  for (int ic = 0; ic < c; ++ic)
    for (int oh = 0; oh < h * factor; ++oh)
      for (int ow = 0; ow < w * factor; ++ow)
        out.at(ic, oh, ow) = xv.at(ic, oh / factor, ow / factor);

  const int xid = x.id;
  return tape.push("upsample_nearest", {xid}, std::move(out),
                   [xid, c, h, w, factor](const Tape<T>&, const Tensor<T>& gout,
                                          typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (int ic = 0; ic < c; ++ic)
                       for (int ih = 0; ih < h; ++ih)
                         for (int iw = 0; iw < w; ++iw) {
                           double acc = 0.0;
                           for (int kh = 0; kh < factor; ++kh)
                             for (int kw = 0; kw < factor; ++kw)
                               acc += static_cast<double>(
                                   gout.at(ic, ih * factor + kh, iw * factor + kw));
                           gx.at(ic, ih, iw) += static_cast<T>(acc);
                         }
                   });
}

// -- dense / activations --------------------------------------------------

template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  const Tensor<T>& wv = tape.val(w);
  const Tensor<T>& bv = tape.val(b);
  if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1 || wv.dim(1) != xv.dim(0) ||
      wv.dim(0) != bv.dim(0))
    throw ShapeError("dense: shapes do not conform, x=" + xv.shape_str() + " w=" + wv.shape_str() +
                     " b=" + bv.shape_str());
  const int m = wv.dim(0), n = wv.dim(1);

  Tensor<T> out({m});
  for (int i = 0; i < m; ++i) {
    double acc = static_cast<double>(bv.at(i));
    for (int j = 0; j < n; ++j)
      acc += static_cast<double>(wv.at(i, j)) * static_cast<double>(xv.at(j));
    out.at(i) = static_cast<T>(acc);
  }

  const int xid = x.id, wid = w.id, bid = b.id;
  return tape.push("dense", {xid, wid, bid}, std::move(out),
                   [xid, wid, bid, m, n](const Tape<T>& t, const Tensor<T>& gout,
                                         typename Tape<T>::Grads& grads) {
                     const Tensor<T>& xv = t.val(xid);
                     const Tensor<T>& wv = t.val(wid);
                     Tensor<T>& gx = grads.accum(xid);
                     Tensor<T>& gw = grads.accum(wid);
                     Tensor<T>& gb = grads.accum(bid);
                     for (int i = 0; i < m; ++i) {
                       const T g = gout.at(i);
                       gb.at(i) += g;
                       for (int j = 0; j < n; ++j) {
                         gx.at(j) += g * wv.at(i, j);
                         gw.at(i, j) += g * xv.at(j);
                       }
                     }
                   });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  Tensor<T> out = xv;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  const int xid = x.id;
  return tape.push("relu", {xid}, std::move(out),
                   [xid](const Tape<T>& t, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
                     const Tensor<T>& xv = t.val(xid);
                     Tensor<T>& gx = grads.accum(xid);
                     // relu'(0) = 0 by convention
                     for (std::int64_t i = 0; i < xv.numel(); ++i)
                       if (xv[i] > T(0)) gx[i] += gout[i];
                   });
}

template <typename T>
T sigmoid_scalar(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tape<T>& tape = *x.tape;
  Tensor<T> out = tape.val(x);
  for (auto& v : out.data) v = sigmoid_scalar(v);
  const int xid = x.id;
  return tape.push("sigmoid", {xid}, std::move(out),
                   [xid](const Tape<T>& t, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
                     const Tensor<T>& xv = t.val(xid);
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < xv.numel(); ++i) {
                       const T s = sigmoid_scalar(xv[i]);
                       gx[i] += gout[i] * s * (T(1) - s);
                     }
                   });
}

// -- losses ---------------------------------------------------------------

// Mean over labels of max(z,0) - z*y + log(1+exp(-|z|)).
template <typename T>
Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& targets) {
  Tape<T>& tape = *logits.tape;
  const Tensor<T>& zv = tape.val(logits);
  if (!zv.same_shape(targets))
    throw ShapeError("bce_with_logits: logits " + zv.shape_str() + " vs targets " +
                     targets.shape_str());
  for (const T& y : targets.data)
    if (y != T(0) && y != T(1))
      throw ShapeError("bce_with_logits: targets must be binary, got " +
                       std::to_string(static_cast<double>(y)));

  const std::int64_t n = zv.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(zv[i]);
    const double y = static_cast<double>(targets.data[static_cast<std::size_t>(i)]);
    acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));

  const int zid = logits.id;
  return tape.push("bce_with_logits", {zid}, std::move(out),
                   [zid, targets, n](const Tape<T>& t, const Tensor<T>& gout,
                                     typename Tape<T>::Grads& grads) {
                     const Tensor<T>& zv = t.val(zid);
                     Tensor<T>& gz = grads.accum(zid);
                     const T g = gout[0];
                     for (std::int64_t i = 0; i < n; ++i)
                       gz[i] += g * (sigmoid_scalar(zv[i]) - targets.data[static_cast<std::size_t>(i)]) /
                                static_cast<T>(n);
                   });
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = tape.val(a);
  const Tensor<T>& bv = tape.val(b);
  if (!av.same_shape(bv))
    throw ShapeError("mse: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  const std::int64_t n = av.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));

  const int aid = a.id, bid = b.id;
  return tape.push("mse", {aid, bid}, std::move(out),
                   [aid, bid, n](const Tape<T>& t, const Tensor<T>& gout,
                                 typename Tape<T>::Grads& grads) {
                     const Tensor<T>& av = t.val(aid);
                     const Tensor<T>& bv = t.val(bid);
                     Tensor<T>& ga = grads.accum(aid);
                     Tensor<T>& gb = grads.accum(bid);
                     const T c = gout[0] * T(2) / static_cast<T>(n);
                     for (std::int64_t i = 0; i < n; ++i) {
                       const T d = av[i] - bv[i];
                       ga[i] += c * d;
                       gb[i] -= c * d;
                     }
                   });
}

// -- dropout ---------------------------------------------------------------

// Channel dropout: in train mode each channel is zeroed independently with
// probability p (mask drawn from `rng` in channel order, dropped iff
// draw < p) and survivors are scaled by 1/(1-p). Eval mode and p = 0 are
// the identity and consume no draws.
template <typename T>
Var<T> spatial_dropout(Var<T> x, double p, Mode mode, Prng& rng) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  detail::check_3d(xv, "spatial_dropout");
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("spatial_dropout: p must be in [0,1), got " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;

  const int c = xv.dim(0);
  const std::int64_t hw = xv.numel() / c;
  std::vector<T> mask(static_cast<std::size_t>(c));
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (int ic = 0; ic < c; ++ic) mask[static_cast<std::size_t>(ic)] = rng.next_unit() < p ? T(0) : scale;

  Tensor<T> out = xv;
  for (int ic = 0; ic < c; ++ic)
    for (std::int64_t i = 0; i < hw; ++i) out[ic * hw + i] *= mask[static_cast<std::size_t>(ic)];

  const int xid = x.id;
  return tape.push("spatial_dropout", {xid}, std::move(out),
                   [xid, c, hw, mask = std::move(mask)](const Tape<T>&, const Tensor<T>& gout,
                                                        typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (int ic = 0; ic < c; ++ic)
                       for (std::int64_t i = 0; i < hw; ++i)
                         gx[ic * hw + i] += gout[ic * hw + i] * mask[static_cast<std::size_t>(ic)];
                   });
}

// -- structural ops ----------------------------------------------------------

template <typename T>
Var<T> slice_channel(Var<T> x, int c) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  detail::check_3d(xv, "slice_channel");
  if (c < 0 || c >= xv.dim(0))
    throw ShapeError("slice_channel: channel " + std::to_string(c) + " out of range for " +
                     xv.shape_str());
  const int h = xv.dim(1), w = xv.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  Tensor<T> out({1, h, w});
  std::copy(xv.data.begin() + c * hw, xv.data.begin() + (c + 1) * hw, out.data.begin());

  const int xid = x.id;
  return tape.push("slice_channel", {xid}, std::move(out),
                   [xid, c, hw](const Tape<T>&, const Tensor<T>& gout,
                                typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < hw; ++i) gx[c * hw + i] += gout[i];
                   });
}

template <typename T>
Var<T> stack_channels(const std::vector<Var<T>>& maps) {
  if (maps.empty()) throw ShapeError("stack_channels: empty list");
  Tape<T>& tape = *maps[0].tape;
  const Tensor<T>& m0 = tape.val(maps[0]);
  detail::check_3d(m0, "stack_channels");
  const int h = m0.dim(1), w = m0.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  std::vector<int> parents;
  Tensor<T> out({static_cast<int>(maps.size()), h, w});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Tensor<T>& mi = tape.val(maps[i]);
    if (mi.shape != std::vector<int>{1, h, w})
      throw ShapeError("stack_channels: map " + std::to_string(i) + " has shape " + mi.shape_str());
    std::copy(mi.data.begin(), mi.data.end(),
              out.data.begin() + static_cast<std::int64_t>(i) * hw);
    parents.push_back(maps[i].id);
  }
  return tape.push("stack_channels", parents, std::move(out),
                   [parents, hw](const Tape<T>&, const Tensor<T>& gout,
                                 typename Tape<T>::Grads& grads) {
                     for (std::size_t i = 0; i < parents.size(); ++i) {
                       Tensor<T>& g = grads.accum(parents[i]);
                       for (std::int64_t j = 0; j < hw; ++j)
                         g[j] += gout[static_cast<std::int64_t>(i) * hw + j];
                     }
                   });
}

// Concatenate rank-1 values in the given order.
template <typename T>
Var<T> concat1d(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat1d: empty list");
  Tape<T>& tape = *parts[0].tape;
  std::vector<int> parents;
  std::vector<std::int64_t> offsets;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    const Tensor<T>& v = tape.val(p);
    if (v.rank() != 1) throw ShapeError("concat1d: expected rank-1, got " + v.shape_str());
    parents.push_back(p.id);
    offsets.push_back(total);
    total += v.numel();
  }
  Tensor<T> out({static_cast<int>(total)});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<T>& v = tape.val(parts[i]);
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + offsets[i]);
  }
  return tape.push("concat1d", parents, std::move(out),
                   [parents, offsets](const Tape<T>& t, const Tensor<T>& gout,
                                      typename Tape<T>::Grads& grads) {
                     for (std::size_t i = 0; i < parents.size(); ++i) {
                       Tensor<T>& g = grads.accum(parents[i]);
                       for (std::int64_t j = 0; j < g.numel(); ++j) g[j] += gout[offsets[i] + j];
                     }
                   });
}

template <typename T>
Var<T> reshape(Var<T> x, std::vector<int> new_shape) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  Tensor<T> out(new_shape, xv.data);
  const int xid = x.id;
  return tape.push("reshape", {xid}, std::move(out),
                   [xid](const Tape<T>& t, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gout[i];
                   });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = tape.val(a);
  const Tensor<T>& bv = tape.val(b);
  if (!av.same_shape(bv))
    throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Tensor<T> out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const int aid = a.id, bid = b.id;
  return tape.push("add", {aid, bid}, std::move(out),
                   [aid, bid](const Tape<T>&, const Tensor<T>& gout,
                              typename Tape<T>::Grads& grads) {
                     Tensor<T>& ga = grads.accum(aid);
                     Tensor<T>& gb = grads.accum(bid);
                     for (std::int64_t i = 0; i < gout.numel(); ++i) {
                       ga[i] += gout[i];
                       gb[i] += gout[i];
                     }
                   });
}

template <typename T>
Var<T> scale(Var<T> x, double c) {
  Tape<T>& tape = *x.tape;
  Tensor<T> out = tape.val(x);
  for (auto& v : out.data) v = static_cast<T>(static_cast<double>(v) * c);
  const int xid = x.id;
  return tape.push("scale", {xid}, std::move(out),
                   [xid, c](const Tape<T>&, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < gx.numel(); ++i)
                       gx[i] += static_cast<T>(static_cast<double>(gout[i]) * c);
                   });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = tape.val(x);
  double acc = 0.0;
  for (const T& v : xv.data) acc += static_cast<double>(v);
  const int xid = x.id;
  return tape.push("sum_all", {xid}, Tensor<T>::scalar(static_cast<T>(acc)),
                   [xid](const Tape<T>&, const Tensor<T>& gout, typename Tape<T>::Grads& grads) {
                     Tensor<T>& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gout[0];
                   });
}

// Mean of scalar values; used to average per-channel reconstruction losses.
template <typename T>
Var<T> mean_scalars(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("mean_scalars: empty list");
  Var<T> acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, 1.0 / static_cast<double>(xs.size()));
}

}  // namespace spf
