#include "ir2vis/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ir2vis/parallel.hpp"

namespace ir2vis {
namespace {

// Records `out` as the result of an op over `parents`. The backprop callback
// must accumulate into a parent's grad only when that grad is non-empty; the
// backward sweep allocates grads just for the paths that need them.
template <class T, class Fn>
void attach(Tensor<T>& out, std::initializer_list<Tensor<T>> parents,
            Fn&& fn) {
  bool tracked = false;
  for (const auto& p : parents)
    if (p.node()->tracked()) tracked = true;
  if (!tracked) return;
  auto n = out.node();
  for (const auto& p : parents) n->parents.push_back(p.node());
  n->backprop = std::forward<Fn>(fn);
}

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape().str() + " vs " + b.shape().str());
}

template <class T, class Fn>
Tensor<T> elementwise_binary(const char* op, const Tensor<T>& a,
                             const Tensor<T>& b, Fn&& back, T (*fwd)(T, T)) {
  check_same_shape(op, a, b);
  Tensor<T> y(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = fwd(av[i], bv[i]);
  attach(y, {a, b}, std::forward<Fn>(back));
  return y;
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding) {
  const Shape4 xs = input.shape();
  const Shape4 ws = weight.shape();
  if (ws.h != ws.w)
    throw DimensionError("conv2d: non-square kernel " + ws.str());
  if (xs.c != ws.c)
    throw DimensionError("conv2d: input channel axis (" + std::to_string(xs.c) +
                         ") != weight in_channels axis (" +
                         std::to_string(ws.c) + ")");
  const bool has_bias = bias.defined();
  if (has_bias &&
      !(bias.shape() == Shape4{1, ws.n, 1, 1}))
    throw DimensionError("conv2d: bias shape " + bias.shape().str() +
                         " != 1x" + std::to_string(ws.n) + "x1x1");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  const int64_t k = ws.h;
  const int64_t oh = (xs.h + 2 * padding - k) / stride + 1;
  const int64_t ow = (xs.w + 2 * padding - k) / stride + 1;
  if (xs.h + 2 * padding < k || xs.w + 2 * padding < k || oh < 1 || ow < 1)
    throw DimensionError("conv2d: spatial axes " + std::to_string(xs.h) + "x" +
                         std::to_string(xs.w) + " too small for kernel " +
                         std::to_string(k) + " stride " +
                         std::to_string(stride) + " padding " +
                         std::to_string(padding));

  Tensor<T> y(Shape4{xs.n, ws.n, oh, ow});
  const T* x = input.values().data();
  const T* w = weight.values().data();
  const T* b = has_bias ? bias.values().data() : nullptr;
  T* out = y.values().data();

  // Kernel-offset decomposition: for each (kh, kw) tap the valid output
  // column range is computed once, leaving a branch-free inner loop over a
  // contiguous output row.
  parallel_for(0, xs.n * ws.n, [&](int64_t lo, int64_t hi) {
    for (int64_t noc = lo; noc < hi; ++noc) {
      const int64_t n = noc / ws.n;
      const int64_t oc = noc % ws.n;
      T* yp = out + ((n * ws.n + oc) * oh) * ow;
      const T fill = b ? b[oc] : T(0);
      for (int64_t i = 0; i < oh * ow; ++i) yp[i] = fill;
      for (int64_t ic = 0; ic < xs.c; ++ic) {
        const T* xp = x + ((n * xs.c + ic) * xs.h) * xs.w;
        const T* wp = w + ((oc * ws.c + ic) * k) * k;
        for (int64_t a = 0; a < k; ++a) {
          for (int64_t c = 0; c < k; ++c) {
            const T wv = wp[a * k + c];
            if (wv == T(0)) continue;
            // valid output columns: 0 <= j*stride - padding + c < W
            const int64_t j_lo =
                std::max<int64_t>(0, (padding - c + stride - 1) / stride);
            const int64_t j_hi = std::min<int64_t>(
                ow - 1, (xs.w - 1 + padding - c) / stride);
            for (int64_t i = 0; i < oh; ++i) {
              const int64_t ih = i * stride - padding + a;
              if (ih < 0 || ih >= xs.h) continue;
              const T* __restrict__ xrow = xp + ih * xs.w - padding + c;
              T* __restrict__ yrow = yp + i * ow;
              if (stride == 1) {
                for (int64_t j = j_lo; j <= j_hi; ++j)
                  yrow[j] += wv * xrow[j];
              } else {
                for (int64_t j = j_lo; j <= j_hi; ++j)
                  yrow[j] += wv * xrow[j * stride];
              }
            }
          }
        }
      }
    }
  });

  attach(y, has_bias ? std::initializer_list<Tensor<T>>{input, weight, bias}
                     : std::initializer_list<Tensor<T>>{input, weight},
         [xs, ws, stride, padding, k, oh, ow, has_bias](TapeNode<T>& self) {
           auto& xn = *self.parents[0];
           auto& wn = *self.parents[1];
           const T* g = self.grad.data();
           const T* x = xn.value.data();
           const T* w = wn.value.data();

           if (!xn.grad.empty()) {
             T* gx = xn.grad.data();
             parallel_for(0, xs.n * xs.c, [&](int64_t lo, int64_t hi) {
               for (int64_t nic = lo; nic < hi; ++nic) {
                 const int64_t n = nic / xs.c;
                 const int64_t ic = nic % xs.c;
                 T* gxp = gx + ((n * xs.c + ic) * xs.h) * xs.w;
                 for (int64_t oc = 0; oc < ws.n; ++oc) {
                   const T* gp = g + ((n * ws.n + oc) * oh) * ow;
                   const T* wp = w + ((oc * ws.c + ic) * k) * k;
                   for (int64_t a = 0; a < k; ++a) {
                     for (int64_t c = 0; c < k; ++c) {
                       const T wv = wp[a * k + c];
                       if (wv == T(0)) continue;
                       const int64_t j_lo = std::max<int64_t>(
                           0, (padding - c + stride - 1) / stride);
                       const int64_t j_hi = std::min<int64_t>(
                           ow - 1, (xs.w - 1 + padding - c) / stride);
                       for (int64_t i = 0; i < oh; ++i) {
                         const int64_t ih = i * stride - padding + a;
                         if (ih < 0 || ih >= xs.h) continue;
                         T* __restrict__ grow = gxp + ih * xs.w - padding + c;
                         const T* __restrict__ gorow = gp + i * ow;
                         if (stride == 1) {
                           for (int64_t j = j_lo; j <= j_hi; ++j)
                             grow[j] += wv * gorow[j];
                         } else {
                           for (int64_t j = j_lo; j <= j_hi; ++j)
                             grow[j * stride] += wv * gorow[j];
                         }
                       }
                     }
                   }
                 }
               }
             });
           }

           if (!wn.grad.empty()) {
             T* gw = wn.grad.data();
             parallel_for(0, ws.n, [&](int64_t lo, int64_t hi) {
               for (int64_t oc = lo; oc < hi; ++oc) {
                 for (int64_t ic = 0; ic < ws.c; ++ic) {
                   for (int64_t a = 0; a < k; ++a) {
                     for (int64_t c = 0; c < k; ++c) {
                       const int64_t j_lo = std::max<int64_t>(
                           0, (padding - c + stride - 1) / stride);
                       const int64_t j_hi = std::min<int64_t>(
                           ow - 1, (xs.w - 1 + padding - c) / stride);
                       T acc = T(0);
                       for (int64_t n = 0; n < xs.n; ++n) {
                         const T* gp = g + ((n * ws.n + oc) * oh) * ow;
                         const T* xp = x + ((n * xs.c + ic) * xs.h) * xs.w;
                         for (int64_t i = 0; i < oh; ++i) {
                           const int64_t ih = i * stride - padding + a;
                           if (ih < 0 || ih >= xs.h) continue;
                           const T* __restrict__ xrow = xp + ih * xs.w - padding + c;
                           const T* __restrict__ gorow = gp + i * ow;
                           if (stride == 1) {
                             for (int64_t j = j_lo; j <= j_hi; ++j)
                               acc += gorow[j] * xrow[j];
                           } else {
                             for (int64_t j = j_lo; j <= j_hi; ++j)
                               acc += gorow[j] * xrow[j * stride];
                           }
                         }
                       }
                       gw[((oc * ws.c + ic) * k + a) * k + c] += acc;
                     }
                   }
                 }
               }
             });
           }

           if (has_bias) {
             auto& bn = *self.parents[2];
             if (!bn.grad.empty()) {
               for (int64_t oc = 0; oc < ws.n; ++oc) {
                 T acc = T(0);
                 for (int64_t n = 0; n < xs.n; ++n) {
                   const T* gp = g + ((n * ws.n + oc) * oh) * ow;
                   for (int64_t i = 0; i < oh * ow; ++i) acc += gp[i];
                 }
                 bn.grad[oc] += acc;
               }
             }
           }
         });
  return y;
}

template <class T>
Tensor<T> window_filter(const Tensor<T>& input, const std::vector<T>& kernel,
                        int k) {
  const Shape4 xs = input.shape();
  if (static_cast<int64_t>(kernel.size()) != int64_t(k) * k)
    throw DimensionError("window_filter: kernel length " +
                         std::to_string(kernel.size()) + " != k*k");
  if (xs.h < k || xs.w < k)
    throw DimensionError("window_filter: image " + std::to_string(xs.h) + "x" +
                         std::to_string(xs.w) + " smaller than window " +
                         std::to_string(k));
  const int64_t oh = xs.h - k + 1;
  const int64_t ow = xs.w - k + 1;
  Tensor<T> y(Shape4{xs.n, xs.c, oh, ow});
  const T* x = input.values().data();
  const T* ker = kernel.data();
  T* out = y.values().data();

  parallel_for(0, xs.n * xs.c, [&](int64_t lo, int64_t hi) {
    for (int64_t nc = lo; nc < hi; ++nc) {
      const T* xp = x + nc * xs.h * xs.w;
      T* yp = out + nc * oh * ow;
      for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
          T acc = T(0);
          for (int a = 0; a < k; ++a)
            for (int c = 0; c < k; ++c)
              acc += ker[a * k + c] * xp[(i + a) * xs.w + (j + c)];
          yp[i * ow + j] = acc;
        }
      }
    }
  });

  attach(y, {input}, [xs, kernel, k, oh, ow](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    const T* g = self.grad.data();
    const T* ker = kernel.data();
    parallel_for(0, xs.n * xs.c, [&](int64_t lo, int64_t hi) {
      for (int64_t nc = lo; nc < hi; ++nc) {
        T* gxp = xn.grad.data() + nc * xs.h * xs.w;
        const T* gp = g + nc * oh * ow;
        for (int64_t ih = 0; ih < xs.h; ++ih) {
          for (int64_t iw = 0; iw < xs.w; ++iw) {
            T acc = T(0);
            const int a_lo = static_cast<int>(std::max<int64_t>(0, ih - oh + 1));
            const int a_hi = static_cast<int>(std::min<int64_t>(k - 1, ih));
            const int c_lo = static_cast<int>(std::max<int64_t>(0, iw - ow + 1));
            const int c_hi = static_cast<int>(std::min<int64_t>(k - 1, iw));
            for (int a = a_lo; a <= a_hi; ++a)
              for (int c = c_lo; c <= c_hi; ++c)
                acc += ker[a * k + c] * gp[(ih - a) * ow + (iw - c)];
            gxp[ih * xs.w + iw] += acc;
          }
        }
      }
    });
  });
  return y;
}

template <class T>
Tensor<T> max_pool2d(const Tensor<T>& input) {
  const Shape4 xs = input.shape();
  const int64_t oh = xs.h / 2;
  const int64_t ow = xs.w / 2;
  if (oh < 1 || ow < 1)
    throw DimensionError("max_pool2d: spatial axes " + std::to_string(xs.h) +
                         "x" + std::to_string(xs.w) + " too small to pool");
  Tensor<T> y(Shape4{xs.n, xs.c, oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(y.size());
  const T* x = input.values().data();
  T* out = y.values().data();
  for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* xp = x + nc * xs.h * xs.w;
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        int64_t best = (2 * i) * xs.w + 2 * j;
        T bv = xp[best];
        const int64_t cands[3] = {(2 * i) * xs.w + 2 * j + 1,
                                  (2 * i + 1) * xs.w + 2 * j,
                                  (2 * i + 1) * xs.w + 2 * j + 1};
        for (int64_t cand : cands)
          if (xp[cand] > bv) { bv = xp[cand]; best = cand; }
        const int64_t oidx = (nc * oh + i) * ow + j;
        out[oidx] = bv;
        (*argmax)[oidx] = nc * xs.h * xs.w + best;
      }
    }
  }
  attach(y, {input}, [argmax](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[(*argmax)[i]] += self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input) {
  const Shape4 xs = input.shape();
  Tensor<T> y(Shape4{xs.n, xs.c, xs.h * 2, xs.w * 2});
  const T* x = input.values().data();
  T* out = y.values().data();
  const int64_t ow = xs.w * 2;
  for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* xp = x + nc * xs.h * xs.w;
    T* yp = out + nc * xs.h * xs.w * 4;
    for (int64_t i = 0; i < xs.h; ++i) {
      for (int64_t j = 0; j < xs.w; ++j) {
        const T v = xp[i * xs.w + j];
        yp[(2 * i) * ow + 2 * j] = v;
        yp[(2 * i) * ow + 2 * j + 1] = v;
        yp[(2 * i + 1) * ow + 2 * j] = v;
        yp[(2 * i + 1) * ow + 2 * j + 1] = v;
      }
    }
  }
  attach(y, {input}, [xs, ow](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
      T* gxp = xn.grad.data() + nc * xs.h * xs.w;
      const T* gp = self.grad.data() + nc * xs.h * xs.w * 4;
      for (int64_t i = 0; i < xs.h; ++i)
        for (int64_t j = 0; j < xs.w; ++j)
          gxp[i * xs.w + j] += gp[(2 * i) * ow + 2 * j] +
                               gp[(2 * i) * ow + 2 * j + 1] +
                               gp[(2 * i + 1) * ow + 2 * j] +
                               gp[(2 * i + 1) * ow + 2 * j + 1];
    }
  });
  return y;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape4 as = a.shape();
  const Shape4 bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w)
    throw DimensionError(
        "concat_channels: batch/spatial axes differ, " + as.str() + " vs " +
        bs.str());
  Tensor<T> y(Shape4{as.n, as.c + bs.c, as.h, as.w});
  const int64_t plane = as.h * as.w;
  T* out = y.values().data();
  for (int64_t n = 0; n < as.n; ++n) {
    std::memcpy(out + n * (as.c + bs.c) * plane,
                a.values().data() + n * as.c * plane,
                sizeof(T) * as.c * plane);
    std::memcpy(out + (n * (as.c + bs.c) + as.c) * plane,
                b.values().data() + n * bs.c * plane,
                sizeof(T) * bs.c * plane);
  }
  attach(y, {a, b}, [as, bs, plane](TapeNode<T>& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    for (int64_t n = 0; n < as.n; ++n) {
      const T* gp = self.grad.data() + n * (as.c + bs.c) * plane;
      if (!an.grad.empty()) {
        T* ga = an.grad.data() + n * as.c * plane;
        for (int64_t i = 0; i < as.c * plane; ++i) ga[i] += gp[i];
      }
      if (!bn.grad.empty()) {
        T* gb = bn.grad.data() + n * bs.c * plane;
        const T* gpb = gp + as.c * plane;
        for (int64_t i = 0; i < bs.c * plane; ++i) gb[i] += gpb[i];
      }
    }
  });
  return y;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (xn.value[i] > T(0)) xn.grad[i] += self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i)
    yv[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  attach(y, {x}, [slope](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += (xn.value[i] > T(0) ? T(1) : slope) * self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = T(1) / (T(1) + std::exp(-xv[i]));
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const T s = self.value[i];
      xn.grad[i] += s * (T(1) - s) * self.grad[i];
    }
  });
  return y;
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = std::tanh(xv[i]);
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const T t = self.value[i];
      xn.grad[i] += (T(1) - t * t) * self.grad[i];
    }
  });
  return y;
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool active) {
  if (p < 0.0 || p >= 1.0)
    throw ContractError("dropout: p must lie in [0, 1), got " +
                        std::to_string(p));
  if (!active || p == 0.0) return x;
  auto mask = std::make_shared<std::vector<T>>(x.size());
  const T keep_scale = T(1.0 / (1.0 - p));
  for (auto& m : *mask) m = uniform01(rng) >= p ? keep_scale : T(0);
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] * (*mask)[i];
  attach(y, {x}, [mask](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += (*mask)[i] * self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>& running_mean,
                     std::vector<T>& running_var, bool training, T momentum,
                     T eps) {
  const Shape4 xs = x.shape();
  const int64_t C = xs.c;
  if (!(gamma.shape() == Shape4{1, C, 1, 1}) ||
      !(beta.shape() == Shape4{1, C, 1, 1}))
    throw DimensionError("batch_norm: gamma/beta must be 1x" +
                         std::to_string(C) + "x1x1");
  if (static_cast<int64_t>(running_mean.size()) != C ||
      static_cast<int64_t>(running_var.size()) != C)
    throw DimensionError("batch_norm: running stats length != channels");

  const int64_t plane = xs.h * xs.w;
  const int64_t m = xs.n * plane;  // elements per channel
  auto mu = std::make_shared<std::vector<T>>(C);
  auto inv_std = std::make_shared<std::vector<T>>(C);

  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      T s = T(0);
      for (int64_t n = 0; n < xs.n; ++n) {
        const T* xp = x.values().data() + ((n * C + c) * plane);
        for (int64_t i = 0; i < plane; ++i) s += xp[i];
      }
      const T mean_c = s / T(m);
      T v = T(0);
      for (int64_t n = 0; n < xs.n; ++n) {
        const T* xp = x.values().data() + ((n * C + c) * plane);
        for (int64_t i = 0; i < plane; ++i) {
          const T d = xp[i] - mean_c;
          v += d * d;
        }
      }
      const T var_c = v / T(m);
      (*mu)[c] = mean_c;
      (*inv_std)[c] = T(1) / std::sqrt(var_c + eps);
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean_c;
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var_c;
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      (*mu)[c] = running_mean[c];
      (*inv_std)[c] = T(1) / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor<T> y(xs);
  const T* g = gamma.values().data();
  const T* b = beta.values().data();
  for (int64_t n = 0; n < xs.n; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const T* xp = x.values().data() + ((n * C + c) * plane);
      T* yp = y.values().data() + ((n * C + c) * plane);
      const T mc = (*mu)[c], is = (*inv_std)[c], gc = g[c], bc = b[c];
      for (int64_t i = 0; i < plane; ++i) yp[i] = gc * (xp[i] - mc) * is + bc;
    }
  }

  attach(y, {x, gamma, beta},
         [xs, C, plane, m, mu, inv_std, training](TapeNode<T>& self) {
           auto& xn = *self.parents[0];
           auto& gn = *self.parents[1];
           auto& bn = *self.parents[2];
           const T* gv = gn.value.data();
           // Per-channel reductions of the upstream gradient.
           std::vector<T> sum_dy(C, T(0)), sum_dy_xhat(C, T(0));
           for (int64_t n = 0; n < xs.n; ++n) {
             for (int64_t c = 0; c < C; ++c) {
               const T* dy = self.grad.data() + ((n * C + c) * plane);
               const T* xp = xn.value.data() + ((n * C + c) * plane);
               const T mc = (*mu)[c], is = (*inv_std)[c];
               T sd = T(0), sdx = T(0);
               for (int64_t i = 0; i < plane; ++i) {
                 sd += dy[i];
                 sdx += dy[i] * (xp[i] - mc) * is;
               }
               sum_dy[c] += sd;
               sum_dy_xhat[c] += sdx;
             }
           }
           if (!gn.grad.empty())
             for (int64_t c = 0; c < C; ++c) gn.grad[c] += sum_dy_xhat[c];
           if (!bn.grad.empty())
             for (int64_t c = 0; c < C; ++c) bn.grad[c] += sum_dy[c];
           if (xn.grad.empty()) return;
           for (int64_t n = 0; n < xs.n; ++n) {
             for (int64_t c = 0; c < C; ++c) {
               const T* dy = self.grad.data() + ((n * C + c) * plane);
               const T* xp = xn.value.data() + ((n * C + c) * plane);
               T* gx = xn.grad.data() + ((n * C + c) * plane);
               const T mc = (*mu)[c], is = (*inv_std)[c], gc = gv[c];
               if (training) {
                 const T mean_dy = sum_dy[c] / T(m);
                 const T mean_dy_xhat = sum_dy_xhat[c] / T(m);
                 for (int64_t i = 0; i < plane; ++i) {
                   const T xhat = (xp[i] - mc) * is;
                   gx[i] += gc * is * (dy[i] - mean_dy - xhat * mean_dy_xhat);
                 }
               } else {
                 for (int64_t i = 0; i < plane; ++i) gx[i] += gc * is * dy[i];
               }
             }
           }
         });
  return y;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>(
      "add", a, b,
      [](TapeNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        if (!an.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            an.grad[i] += self.grad[i];
        if (!bn.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn.grad[i] += self.grad[i];
      },
      [](T x, T y) { return x + y; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>(
      "sub", a, b,
      [](TapeNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        if (!an.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            an.grad[i] += self.grad[i];
        if (!bn.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn.grad[i] -= self.grad[i];
      },
      [](T x, T y) { return x - y; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>(
      "mul", a, b,
      [](TapeNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        if (!an.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            an.grad[i] += bn.value[i] * self.grad[i];
        if (!bn.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn.grad[i] += an.value[i] * self.grad[i];
      },
      [](T x, T y) { return x * y; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise_binary<T>(
      "div", a, b,
      [](TapeNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        if (!an.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            an.grad[i] += self.grad[i] / bn.value[i];
        if (!bn.grad.empty())
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn.grad[i] -= self.grad[i] * an.value[i] /
                          (bn.value[i] * bn.value[i]);
      },
      [](T x, T y) { return x / y; });
}

template <class T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = scale * xv[i] + shift;
  attach(y, {x}, [scale](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += scale * self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = std::fabs(xv[i]);
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const T v = xn.value[i];
      if (v > T(0)) xn.grad[i] += self.grad[i];
      else if (v < T(0)) xn.grad[i] -= self.grad[i];
    }
  });
  return y;
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i) {
    if (!(xv[i] > T(0)))
      throw ContractError("log: non-positive input " + std::to_string(xv[i]));
    yv[i] = std::log(xv[i]);
  }
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      xn.grad[i] += self.grad[i] / xn.value[i];
  });
  return y;
}

template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  Tensor<T> y(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t i = 0; i < yv.size(); ++i)
    yv[i] = std::min(std::max(xv[i], lo), hi);
  attach(y, {x}, [lo, hi](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (xn.value[i] > lo && xn.value[i] < hi)
        xn.grad[i] += self.grad[i];
  });
  return y;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.values()) acc += v;
  Tensor<T> y = scalar_tensor<T>(acc);
  attach(y, {x}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    const T g = self.grad[0];
    for (auto& gx : xn.grad) gx += g;
  });
  return y;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return affine(sum(x), T(1) / T(x.size()), T(0));
}

template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights) {
  check_same_shape("weighted_sum", x, weights);
  T acc = T(0);
  const auto& xv = x.values();
  const auto& wv = weights.values();
  for (size_t i = 0; i < xv.size(); ++i) acc += xv[i] * wv[i];
  Tensor<T> y = scalar_tensor<T>(acc);
  attach(y, {x, weights}, [](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    const T g = self.grad[0];
    if (!xn.grad.empty())
      for (size_t i = 0; i < xn.grad.size(); ++i)
        xn.grad[i] += g * wn.value[i];
    if (!wn.grad.empty())
      for (size_t i = 0; i < wn.grad.size(); ++i)
        wn.grad[i] += g * xn.value[i];
  });
  return y;
}

template <class T>
Tensor<T> pad_reflect(const Tensor<T>& x, int top, int bottom, int left,
                      int right) {
  const Shape4 xs = x.shape();
  if (top >= xs.h || bottom >= xs.h || left >= xs.w || right >= xs.w ||
      top < 0 || bottom < 0 || left < 0 || right < 0)
    throw DimensionError("pad_reflect: pad exceeds image extent " + xs.str());
  const int64_t oh = xs.h + top + bottom;
  const int64_t ow = xs.w + left + right;
  // reflect without repeating the border sample
  auto src_h = std::make_shared<std::vector<int64_t>>(oh);
  auto src_w = std::make_shared<std::vector<int64_t>>(ow);
  for (int64_t i = 0; i < oh; ++i) {
    int64_t s = i - top;
    if (s < 0) s = -s;
    if (s >= xs.h) s = 2 * xs.h - 2 - s;
    (*src_h)[i] = s;
  }
  for (int64_t j = 0; j < ow; ++j) {
    int64_t s = j - left;
    if (s < 0) s = -s;
    if (s >= xs.w) s = 2 * xs.w - 2 - s;
    (*src_w)[j] = s;
  }
  Tensor<T> y(Shape4{xs.n, xs.c, oh, ow});
  const T* xp = x.values().data();
  T* yp = y.values().data();
  for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* xsl = xp + nc * xs.h * xs.w;
    T* ysl = yp + nc * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j)
        ysl[i * ow + j] = xsl[(*src_h)[i] * xs.w + (*src_w)[j]];
  }
  attach(y, {x}, [xs, oh, ow, src_h, src_w](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
      T* gx = xn.grad.data() + nc * xs.h * xs.w;
      const T* g = self.grad.data() + nc * oh * ow;
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j)
          gx[(*src_h)[i] * xs.w + (*src_w)[j]] += g[i * ow + j];
    }
  });
  return y;
}

template <class T>
Tensor<T> crop(const Tensor<T>& x, int top, int left, int out_h, int out_w) {
  const Shape4 xs = x.shape();
  if (top < 0 || left < 0 || top + out_h > xs.h || left + out_w > xs.w)
    throw DimensionError("crop: window " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + "+" + std::to_string(top) +
                         "+" + std::to_string(left) + " outside " + xs.str());
  Tensor<T> y(Shape4{xs.n, xs.c, out_h, out_w});
  const T* xp = x.values().data();
  T* yp = y.values().data();
  for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* xsl = xp + nc * xs.h * xs.w;
    T* ysl = yp + nc * int64_t(out_h) * out_w;
    for (int64_t i = 0; i < out_h; ++i)
      std::memcpy(ysl + i * out_w, xsl + (top + i) * xs.w + left,
                  sizeof(T) * out_w);
  }
  attach(y, {x}, [xs, top, left, out_h, out_w](TapeNode<T>& self) {
    auto& xn = *self.parents[0];
    if (xn.grad.empty()) return;
    for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
      T* gx = xn.grad.data() + nc * xs.h * xs.w;
      const T* g = self.grad.data() + nc * int64_t(out_h) * out_w;
      for (int64_t i = 0; i < out_h; ++i)
        for (int64_t j = 0; j < out_w; ++j)
          gx[(top + i) * xs.w + left + j] += g[i * out_w + j];
    }
  });
  return y;
}

#define IR2VIS_INSTANTIATE_OPS(T)                                             \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,            \
                               const Tensor<T>&, int, int);                   \
  template Tensor<T> window_filter<T>(const Tensor<T>&, const std::vector<T>&,\
                                      int);                                   \
  template Tensor<T> max_pool2d<T>(const Tensor<T>&);                         \
  template Tensor<T> upsample_nearest2x<T>(const Tensor<T>&);                 \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> relu<T>(const Tensor<T>&);                               \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                      \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                            \
  template Tensor<T> tanh<T>(const Tensor<T>&);                               \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, Rng&, bool);        \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&, std::vector<T>&,         \
                                   std::vector<T>&, bool, T, T);              \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> affine<T>(const Tensor<T>&, T, T);                       \
  template Tensor<T> abs<T>(const Tensor<T>&);                                \
  template Tensor<T> log<T>(const Tensor<T>&);                                \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);                        \
  template Tensor<T> sum<T>(const Tensor<T>&);                                \
  template Tensor<T> mean<T>(const Tensor<T>&);                               \
  template Tensor<T> weighted_sum<T>(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> pad_reflect<T>(const Tensor<T>&, int, int, int, int);    \
  template Tensor<T> crop<T>(const Tensor<T>&, int, int, int, int);

IR2VIS_INSTANTIATE_OPS(float)
IR2VIS_INSTANTIATE_OPS(double)
#undef IR2VIS_INSTANTIATE_OPS

}  // namespace ir2vis
