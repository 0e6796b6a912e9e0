#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fieldshift/gemm.hpp"
#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"

namespace fieldshift {

using Stride = std::pair<int, int>;
using Padding = std::pair<int, int>;

/// floor((extent + 2*pad - kernel) / stride) + 1, with validation.
inline int conv_output_dim(int extent, int kernel, int stride, int pad,
                           const char* axis) {
  if (kernel < 1 || stride < 1 || pad < 0)
    throw ParameterError(std::string("conv: bad kernel/stride/padding on axis ") + axis);
  if (extent + 2 * pad < kernel)
    throw DimensionError(std::string("conv: kernel larger than padded input on axis ") +
                         axis + " (" + std::to_string(extent) + "+2*" +
                         std::to_string(pad) + " < " + std::to_string(kernel) + ")");
  return (extent + 2 * pad - kernel) / stride + 1;
}

inline int conv_transpose_output_dim(int extent, int kernel, int stride, int pad,
                                     int output_pad, const char* axis) {
  if (kernel < 1 || stride < 1 || pad < 0)
    throw ParameterError(std::string("conv_transpose: bad kernel/stride/padding on axis ") + axis);
  if (output_pad < 0 || output_pad >= stride)
    throw ParameterError(std::string("conv_transpose: output_padding must be in [0, stride) on axis ") + axis);
  const int out = (extent - 1) * stride - 2 * pad + kernel + output_pad;
  if (out < 1)
    throw DimensionError(std::string("conv_transpose: non-positive output extent on axis ") + axis);
  return out;
}

namespace detail {

/// Unfold one (c,h,w) image into a (c*kh*kw) x (oh*ow) patch matrix.
template <typename T>
void im2col(const T* img, int c, int h, int w, int kh, int kw, int sh, int sw,
            int ph, int pw, int oh, int ow, T* col) {
  const long patch = static_cast<long>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    const T* plane = img + static_cast<size_t>(ci) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        T* row = col + (static_cast<size_t>(ci) * kh * kw + u * kw + v) * patch;
        for (int i = 0; i < oh; ++i) {
          const int y = i * sh + u - ph;
          T* out = row + static_cast<size_t>(i) * ow;
          if (y < 0 || y >= h) {
            for (int j = 0; j < ow; ++j) out[j] = T(0);
            continue;
          }
          const T* src = plane + static_cast<size_t>(y) * w;
          for (int j = 0; j < ow; ++j) {
            const int x = j * sw + v - pw;
            out[j] = (x >= 0 && x < w) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-add the patch matrix back into the image.
template <typename T>
void col2im_add(const T* col, int c, int h, int w, int kh, int kw, int sh,
                int sw, int ph, int pw, int oh, int ow, T* img) {
  const long patch = static_cast<long>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    T* plane = img + static_cast<size_t>(ci) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v) {
        const T* row = col + (static_cast<size_t>(ci) * kh * kw + u * kw + v) * patch;
        for (int i = 0; i < oh; ++i) {
          const int y = i * sh + u - ph;
          if (y < 0 || y >= h) continue;
          T* dst = plane + static_cast<size_t>(y) * w;
          const T* src = row + static_cast<size_t>(i) * ow;
          for (int j = 0; j < ow; ++j) {
            const int x = j * sw + v - pw;
            if (x >= 0 && x < w) dst[x] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, zero padding)
// ---------------------------------------------------------------------------

/// weights shape (c_out, c_in, kh, kw); bias length c_out (empty = no bias).
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& weights,
                  const std::vector<T>& bias, Stride stride, Padding padding) {
  const int co = weights.n(), ci = weights.c(), kh = weights.h(), kw = weights.w();
  if (x.c() != ci)
    throw DimensionError("conv2d: input channel axis (" + std::to_string(x.c()) +
                         ") does not match weight c_in (" + std::to_string(ci) + ")");
  if (!bias.empty() && static_cast<int>(bias.size()) != co)
    throw DimensionError("conv2d: bias axis length " + std::to_string(bias.size()) +
                         " does not match c_out " + std::to_string(co));
  const int oh = conv_output_dim(x.h(), kh, stride.first, padding.first, "h");
  const int ow = conv_output_dim(x.w(), kw, stride.second, padding.second, "w");

  Tensor4<T> out(x.n(), co, oh, ow);
  const int k = ci * kh * kw;
  const long patch = static_cast<long>(oh) * ow;
  std::vector<T> col(static_cast<size_t>(k) * patch);
  for (int n = 0; n < x.n(); ++n) {
    detail::im2col(x.data() + x.index(n, 0, 0, 0), ci, x.h(), x.w(), kh, kw,
                   stride.first, stride.second, padding.first, padding.second,
                   oh, ow, col.data());
    gemm_add(weights.data(), col.data(), out.data() + out.index(n, 0, 0, 0),
             co, k, static_cast<int>(patch));
    if (!bias.empty()) {
      for (int oc = 0; oc < co; ++oc) {
        T* plane = out.data() + out.index(n, oc, 0, 0);
        for (long p = 0; p < patch; ++p) plane[p] += bias[oc];
      }
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weights,
                               Stride stride, Padding padding,
                               const Tensor4<T>& grad_out,
                               bool need_input_grad = true,
                               bool need_param_grads = true) {
  const int co = weights.n(), ci = weights.c(), kh = weights.h(), kw = weights.w();
  const int oh = grad_out.h(), ow = grad_out.w();
  const int k = ci * kh * kw;
  const long patch = static_cast<long>(oh) * ow;

  Conv2dGrads<T> grads;
  if (need_param_grads) {
    grads.weights = Tensor4<T>(co, ci, kh, kw);
    grads.bias.assign(co, T(0));
  }
  if (need_input_grad) grads.input = Tensor4<T>(x.n(), ci, x.h(), x.w());

  std::vector<T> col(static_cast<size_t>(k) * patch);
  std::vector<T> wt = transposed(weights.data(), co, k);
  std::vector<T> tmp(static_cast<size_t>(k) * patch);
  for (int n = 0; n < x.n(); ++n) {
    const T* g = grad_out.data() + grad_out.index(n, 0, 0, 0);
    if (need_param_grads) {
      for (int oc = 0; oc < co; ++oc) {
        const T* plane = g + static_cast<size_t>(oc) * patch;
        T acc(0);
        for (long p = 0; p < patch; ++p) acc += plane[p];
        grads.bias[oc] += acc;
      }
      detail::im2col(x.data() + x.index(n, 0, 0, 0), ci, x.h(), x.w(), kh, kw,
                     stride.first, stride.second, padding.first, padding.second,
                     oh, ow, col.data());
      std::vector<T> colt = transposed(col.data(), k, static_cast<int>(patch));
      gemm_add(g, colt.data(), grads.weights.data(), co, static_cast<int>(patch), k);
    }
    if (need_input_grad) {
      std::fill(tmp.begin(), tmp.end(), T(0));
      gemm_add(wt.data(), g, tmp.data(), k, co, static_cast<int>(patch));
      detail::col2im_add(tmp.data(), ci, x.h(), x.w(), kh, kw, stride.first,
                         stride.second, padding.first, padding.second, oh, ow,
                         grads.input.data() + grads.input.index(n, 0, 0, 0));
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// conv_transpose2d (adjoint of conv2d under the same stride/padding)
// ---------------------------------------------------------------------------

/// weights shape (c_in, c_out, kh, kw).
template <typename T>
Tensor4<T> conv_transpose2d(const Tensor4<T>& x, const Tensor4<T>& weights,
                            const std::vector<T>& bias, Stride stride,
                            Padding padding, Padding output_padding = {0, 0}) {
  const int ci = weights.n(), co = weights.c(), kh = weights.h(), kw = weights.w();
  if (x.c() != ci)
    throw DimensionError("conv_transpose2d: input channel axis (" +
                         std::to_string(x.c()) + ") does not match weight c_in (" +
                         std::to_string(ci) + ")");
  if (!bias.empty() && static_cast<int>(bias.size()) != co)
    throw DimensionError("conv_transpose2d: bias axis length " +
                         std::to_string(bias.size()) + " does not match c_out " +
                         std::to_string(co));
  const int oh = conv_transpose_output_dim(x.h(), kh, stride.first, padding.first,
                                           output_padding.first, "h");
  const int ow = conv_transpose_output_dim(x.w(), kw, stride.second, padding.second,
                                           output_padding.second, "w");

  Tensor4<T> out(x.n(), co, oh, ow);
  const int kc = co * kh * kw;
  const long pin = static_cast<long>(x.h()) * x.w();
  // weights viewed as (ci, kc); transpose once to (kc, ci)
  std::vector<T> wt = transposed(weights.data(), ci, kc);
  std::vector<T> tmp(static_cast<size_t>(kc) * pin);
  for (int n = 0; n < x.n(); ++n) {
    std::fill(tmp.begin(), tmp.end(), T(0));
    gemm_add(wt.data(), x.data() + x.index(n, 0, 0, 0), tmp.data(), kc, ci,
             static_cast<int>(pin));
    detail::col2im_add(tmp.data(), co, oh, ow, kh, kw, stride.first,
                       stride.second, padding.first, padding.second, x.h(), x.w(),
                       out.data() + out.index(n, 0, 0, 0));
    if (!bias.empty()) {
      for (int oc = 0; oc < co; ++oc) {
        T* plane = out.data() + out.index(n, oc, 0, 0);
        const long sz = static_cast<long>(oh) * ow;
        for (long p = 0; p < sz; ++p) plane[p] += bias[oc];
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv_transpose2d_backward(const Tensor4<T>& x,
                                         const Tensor4<T>& weights,
                                         Stride stride, Padding padding,
                                         const Tensor4<T>& grad_out,
                                         bool need_input_grad = true,
                                         bool need_param_grads = true) {
  const int ci = weights.n(), co = weights.c(), kh = weights.h(), kw = weights.w();
  const int kc = co * kh * kw;
  const long pin = static_cast<long>(x.h()) * x.w();

  Conv2dGrads<T> grads;
  if (need_param_grads) {
    grads.weights = Tensor4<T>(ci, co, kh, kw);
    grads.bias.assign(co, T(0));
  }
  if (need_input_grad) grads.input = Tensor4<T>(x.n(), ci, x.h(), x.w());

  std::vector<T> colg(static_cast<size_t>(kc) * pin);
  for (int n = 0; n < x.n(); ++n) {
    const T* g = grad_out.data() + grad_out.index(n, 0, 0, 0);
    const long pout = static_cast<long>(grad_out.h()) * grad_out.w();
    if (need_param_grads) {
      for (int oc = 0; oc < co; ++oc) {
        const T* plane = g + static_cast<size_t>(oc) * pout;
        T acc(0);
        for (long p = 0; p < pout; ++p) acc += plane[p];
        grads.bias[oc] += acc;
      }
    }
    // patches of grad_out seen through the kernel land on input positions
    detail::im2col(g, co, grad_out.h(), grad_out.w(), kh, kw, stride.first,
                   stride.second, padding.first, padding.second, x.h(), x.w(),
                   colg.data());
    if (need_input_grad) {
      gemm_add(weights.data(), colg.data(),
               grads.input.data() + grads.input.index(n, 0, 0, 0), ci, kc,
               static_cast<int>(pin));
    }
    if (need_param_grads) {
      std::vector<T> colgt = transposed(colg.data(), kc, static_cast<int>(pin));
      gemm_add(x.data() + x.index(n, 0, 0, 0), colgt.data(), grads.weights.data(),
               ci, static_cast<int>(pin), kc);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// instance normalization
// ---------------------------------------------------------------------------

template <typename T>
struct InstanceNormCache {
  Tensor4<T> xhat;
  std::vector<T> inv_std;  // one per (n,c) plane
};

/// Per (n,c) plane: (x - mean) / sqrt(var + eps) * gamma + beta, with the
/// population variance (divide by plane size).
template <typename T>
Tensor4<T> instance_norm(const Tensor4<T>& x, const std::vector<T>& gamma,
                         const std::vector<T>& beta, T eps = T(1e-5),
                         InstanceNormCache<T>* cache = nullptr) {
  if (static_cast<int>(gamma.size()) != x.c() ||
      static_cast<int>(beta.size()) != x.c())
    throw DimensionError("instance_norm: gamma/beta length must equal channel axis " +
                         std::to_string(x.c()));
  if (!(eps > T(0))) throw ParameterError("instance_norm: eps must be positive");

  Tensor4<T> out(x.n(), x.c(), x.h(), x.w());
  if (cache != nullptr) {
    cache->xhat = Tensor4<T>(x.n(), x.c(), x.h(), x.w());
    cache->inv_std.assign(static_cast<size_t>(x.n()) * x.c(), T(0));
  }
  const long m = static_cast<long>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.data() + x.index(n, c, 0, 0);
      T mean(0);
      for (long i = 0; i < m; ++i) mean += p[i];
      mean /= static_cast<T>(m);
      T var(0);
      for (long i = 0; i < m; ++i) {
        const T d = p[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(m);
      const T inv = T(1) / std::sqrt(var + eps);
      T* o = out.data() + out.index(n, c, 0, 0);
      T* xh = cache ? cache->xhat.data() + cache->xhat.index(n, c, 0, 0) : nullptr;
      if (cache) cache->inv_std[static_cast<size_t>(n) * x.c() + c] = inv;
      for (long i = 0; i < m; ++i) {
        const T norm = (p[i] - mean) * inv;
        if (xh) xh[i] = norm;
        o[i] = gamma[c] * norm + beta[c];
      }
    }
  }
  return out;
}

template <typename T>
struct InstanceNormGrads {
  Tensor4<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
InstanceNormGrads<T> instance_norm_backward(const InstanceNormCache<T>& cache,
                                            const std::vector<T>& gamma,
                                            const Tensor4<T>& grad_out) {
  const Tensor4<T>& xhat = cache.xhat;
  InstanceNormGrads<T> grads;
  grads.input = Tensor4<T>(xhat.n(), xhat.c(), xhat.h(), xhat.w());
  grads.gamma.assign(gamma.size(), T(0));
  grads.beta.assign(gamma.size(), T(0));
  const long m = static_cast<long>(xhat.h()) * xhat.w();
  for (int n = 0; n < xhat.n(); ++n) {
    for (int c = 0; c < xhat.c(); ++c) {
      const T* gy = grad_out.data() + grad_out.index(n, c, 0, 0);
      const T* xh = xhat.data() + xhat.index(n, c, 0, 0);
      const T inv = cache.inv_std[static_cast<size_t>(n) * xhat.c() + c];
      T s1(0), s2(0);
      for (long i = 0; i < m; ++i) {
        s1 += gy[i];
        s2 += gy[i] * xh[i];
      }
      grads.beta[c] += s1;
      grads.gamma[c] += s2;
      const T mean_gy = s1 / static_cast<T>(m);
      const T mean_gyxh = s2 / static_cast<T>(m);
      T* gx = grads.input.data() + grads.input.index(n, c, 0, 0);
      const T scale = gamma[c] * inv;
      for (long i = 0; i < m; ++i)
        gx[i] = scale * (gy[i] - mean_gy - xh[i] * mean_gyxh);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

enum class ActKind {
  relu,
  leaky_relu,
  tanh,
  sigmoid,
  tanh01,  // (tanh(v) + 1) / 2, used to remap a tanh head onto [0,1]
  none,
};

inline const char* act_name(ActKind kind) {
  switch (kind) {
    case ActKind::relu: return "relu";
    case ActKind::leaky_relu: return "leaky_relu";
    case ActKind::tanh: return "tanh";
    case ActKind::sigmoid: return "sigmoid";
    case ActKind::tanh01: return "tanh01";
    case ActKind::none: return "none";
  }
  return "?";
}

template <typename T>
Tensor4<T> apply_activation(const Tensor4<T>& x, ActKind kind, T alpha = T(0.2)) {
  if (kind == ActKind::leaky_relu && !(alpha > T(0) && alpha < T(1)))
    throw ParameterError("leaky_relu: alpha must lie in (0,1)");
  Tensor4<T> out(x.n(), x.c(), x.h(), x.w());
  const size_t sz = x.size();
  switch (kind) {
    case ActKind::relu:
      for (size_t i = 0; i < sz; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case ActKind::leaky_relu:
      for (size_t i = 0; i < sz; ++i) out[i] = x[i] >= T(0) ? x[i] : alpha * x[i];
      break;
    case ActKind::tanh:
      for (size_t i = 0; i < sz; ++i) out[i] = std::tanh(x[i]);
      break;
    case ActKind::sigmoid:
      for (size_t i = 0; i < sz; ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
    case ActKind::tanh01:
      for (size_t i = 0; i < sz; ++i) out[i] = (std::tanh(x[i]) + T(1)) / T(2);
      break;
    case ActKind::none:
      out = x;
      break;
  }
  return out;
}

template <typename T>
Tensor4<T> activation_backward(const Tensor4<T>& x, ActKind kind, T alpha,
                               const Tensor4<T>& grad_out) {
  Tensor4<T> gx(x.n(), x.c(), x.h(), x.w());
  const size_t sz = x.size();
  switch (kind) {
    case ActKind::relu:
      for (size_t i = 0; i < sz; ++i) gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
      break;
    case ActKind::leaky_relu:
      for (size_t i = 0; i < sz; ++i)
        gx[i] = x[i] >= T(0) ? grad_out[i] : alpha * grad_out[i];
      break;
    case ActKind::tanh:
      for (size_t i = 0; i < sz; ++i) {
        const T t = std::tanh(x[i]);
        gx[i] = grad_out[i] * (T(1) - t * t);
      }
      break;
    case ActKind::sigmoid:
      for (size_t i = 0; i < sz; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        gx[i] = grad_out[i] * s * (T(1) - s);
      }
      break;
    case ActKind::tanh01:
      for (size_t i = 0; i < sz; ++i) {
        const T t = std::tanh(x[i]);
        gx[i] = grad_out[i] * (T(1) - t * t) / T(2);
      }
      break;
    case ActKind::none:
      gx = grad_out;
      break;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-rate), inference is identity)
// ---------------------------------------------------------------------------

template <typename T>
Tensor4<T> dropout(const Tensor4<T>& x, double rate, Rng& rng, bool training,
                   Tensor4<T>* mask_out = nullptr) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParameterError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) {
    if (mask_out != nullptr) *mask_out = Tensor4<T>(x.n(), x.c(), x.h(), x.w(), T(1));
    return x;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor4<T> out(x.n(), x.c(), x.h(), x.w());
  if (mask_out != nullptr) *mask_out = Tensor4<T>(x.n(), x.c(), x.h(), x.w());
  for (size_t i = 0; i < x.size(); ++i) {
    const T keep = rng.uniform01() < rate ? T(0) : scale;
    out[i] = x[i] * keep;
    if (mask_out != nullptr) (*mask_out)[i] = keep;
  }
  return out;
}

template <typename T>
Tensor4<T> dropout_backward(const Tensor4<T>& mask, const Tensor4<T>& grad_out) {
  Tensor4<T> gx(grad_out.n(), grad_out.c(), grad_out.h(), grad_out.w());
  for (size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * mask[i];
  return gx;
}

// ---------------------------------------------------------------------------
// dense (fully connected over flattened features)
// ---------------------------------------------------------------------------

/// x viewed as (n, features); weights (out_features, in_features, 1, 1).
template <typename T>
Tensor4<T> dense(const Tensor4<T>& x, const Tensor4<T>& weights,
                 const std::vector<T>& bias) {
  const int out_f = weights.n(), in_f = weights.c();
  const int feat = x.c() * x.h() * x.w();
  if (feat != in_f)
    throw DimensionError("dense: flattened feature axis (" + std::to_string(feat) +
                         ") does not match weight in_features (" +
                         std::to_string(in_f) + ")");
  Tensor4<T> out(x.n(), out_f, 1, 1);
  std::vector<T> wt = transposed(weights.data(), out_f, in_f);
  gemm_add(x.data(), wt.data(), out.data(), x.n(), in_f, out_f);
  if (!bias.empty()) {
    for (int n = 0; n < x.n(); ++n)
      for (int o = 0; o < out_f; ++o) out.at(n, o, 0, 0) += bias[o];
  }
  return out;
}

template <typename T>
Conv2dGrads<T> dense_backward(const Tensor4<T>& x, const Tensor4<T>& weights,
                              const Tensor4<T>& grad_out,
                              bool need_input_grad = true,
                              bool need_param_grads = true) {
  const int out_f = weights.n(), in_f = weights.c();
  Conv2dGrads<T> grads;
  if (need_param_grads) {
    grads.weights = Tensor4<T>(out_f, in_f, 1, 1);
    grads.bias.assign(out_f, T(0));
    std::vector<T> gt = transposed(grad_out.data(), x.n(), out_f);
    gemm_add(gt.data(), x.data(), grads.weights.data(), out_f, x.n(), in_f);
    for (int n = 0; n < x.n(); ++n)
      for (int o = 0; o < out_f; ++o) grads.bias[o] += grad_out.at(n, o, 0, 0);
  }
  if (need_input_grad) {
    grads.input = Tensor4<T>(x.n(), x.c(), x.h(), x.w());
    gemm_add(grad_out.data(), weights.data(), grads.input.data(), x.n(), out_f, in_f);
  }
  return grads;
}

}  // namespace fieldshift
