#pragma once

#include <string>
#include <vector>

#include "nspeech/gemm.hpp"
#include "nspeech/tensor.hpp"

namespace nspeech {

struct ConvSpec {
  int filter_count = 1;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;

  void validate() const {
    if (filter_count < 1 || kernel_h < 1 || kernel_w < 1 || stride_h < 1 || stride_w < 1 ||
        pad_h < 0 || pad_w < 0)
      throw ConfigError("conv: invalid spec");
  }
};

inline int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Forward context for the backward pass: the im2col patch matrix plus the
// shapes it was built from.
struct ConvCache {
  std::vector<double> patches;  // [out_h*out_w, kh*kw*C]
  int in_h = 0, in_w = 0, in_c = 0;
  int out_h = 0, out_w = 0;
  bool valid = false;
};

namespace detail {

// Gathers kernel-sized patches into rows; cells outside the (zero-)padded
// input stay 0.
inline void im2col(const double* in, int H, int W, int C, const ConvSpec& s, int out_h, int out_w,
                   double* patches) {
  const int patch_len = s.kernel_h * s.kernel_w * C;
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double* row = patches + (static_cast<size_t>(oy) * out_w + ox) * patch_len;
      const int iy0 = oy * s.stride_h - s.pad_h;
      const int ix0 = ox * s.stride_w - s.pad_w;
      for (int ky = 0; ky < s.kernel_h; ++ky) {
        const int iy = iy0 + ky;
        double* dst = row + static_cast<size_t>(ky) * s.kernel_w * C;
        if (iy < 0 || iy >= H) {
          for (int i = 0; i < s.kernel_w * C; ++i) dst[i] = 0.0;
          continue;
        }
        for (int kx = 0; kx < s.kernel_w; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= W) {
            for (int c = 0; c < C; ++c) dst[kx * C + c] = 0.0;
          } else {
            const double* src = in + (static_cast<size_t>(iy) * W + ix) * C;
            for (int c = 0; c < C; ++c) dst[kx * C + c] = src[c];
          }
        }
      }
    }
  }
}

// Scatter-adds patch-space gradients back onto the input grid.
inline void col2im_acc(const double* patches, int H, int W, int C, const ConvSpec& s, int out_h,
                       int out_w, double* din) {
  const int patch_len = s.kernel_h * s.kernel_w * C;
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const double* row = patches + (static_cast<size_t>(oy) * out_w + ox) * patch_len;
      const int iy0 = oy * s.stride_h - s.pad_h;
      const int ix0 = ox * s.stride_w - s.pad_w;
      for (int ky = 0; ky < s.kernel_h; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < s.kernel_w; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= W) continue;
          double* dst = din + (static_cast<size_t>(iy) * W + ix) * C;
          const double* src = row + (static_cast<size_t>(ky) * s.kernel_w + kx) * C;
          for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace detail

// 2-D cross-correlation (deep-learning convention, no kernel flip).
// input [H,W,C], weights [kh,kw,C,F], bias [F] -> output [out_h,out_w,F].
inline Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec, const Tensor& weights,
                             const Tensor& bias, ConvCache* cache = nullptr) {
  spec.validate();
  if (input.shape.size() != 3) throw ConfigError("conv: input must be H x W x C");
  const int H = static_cast<int>(input.shape[0]);
  const int W = static_cast<int>(input.shape[1]);
  const int C = static_cast<int>(input.shape[2]);

  const std::vector<size_t> want_w = {static_cast<size_t>(spec.kernel_h), static_cast<size_t>(spec.kernel_w),
                                      static_cast<size_t>(C), static_cast<size_t>(spec.filter_count)};
  if (weights.shape != want_w)
    throw ConfigError("conv: weight shape mismatch, want " + Tensor(want_w).shape_str() + " got " +
                      weights.shape_str());
  if (bias.shape != std::vector<size_t>{static_cast<size_t>(spec.filter_count)})
    throw ConfigError("conv: bias shape mismatch");

  const int out_h = conv_out_dim(H, spec.kernel_h, spec.stride_h, spec.pad_h);
  const int out_w = conv_out_dim(W, spec.kernel_w, spec.stride_w, spec.pad_w);
  if (out_h < 1 || out_w < 1) throw ConfigError("conv: zero-size output");

  const size_t rows = static_cast<size_t>(out_h) * out_w;
  const size_t patch_len = static_cast<size_t>(spec.kernel_h) * spec.kernel_w * C;

  ConvCache local;
  ConvCache& cc = cache ? *cache : local;
  cc.patches.assign(rows * patch_len, 0.0);
  cc.in_h = H;
  cc.in_w = W;
  cc.in_c = C;
  cc.out_h = out_h;
  cc.out_w = out_w;
  cc.valid = true;
  detail::im2col(input.v.data(), H, W, C, spec, out_h, out_w, cc.patches.data());

  Tensor out({static_cast<size_t>(out_h), static_cast<size_t>(out_w), static_cast<size_t>(spec.filter_count)});
  const size_t F = static_cast<size_t>(spec.filter_count);
  for (size_t r = 0; r < rows; ++r)
    for (size_t f = 0; f < F; ++f) out.v[r * F + f] = bias.v[f];
  gemm_acc(rows, patch_len, F, cc.patches.data(), weights.v.data(), out.v.data());
  return out;
}

// Accumulates weight/bias gradients into weights.g / bias.g and returns the
// input gradient. Requires the cache recorded by conv2d_forward.
inline Tensor conv2d_backward(const ConvCache& cache, const ConvSpec& spec, Tensor& weights,
                              Tensor& bias, const Tensor& dout) {
  if (!cache.valid) throw NumericError("conv: backward without recorded forward context");
  const size_t F = static_cast<size_t>(spec.filter_count);
  const size_t rows = static_cast<size_t>(cache.out_h) * cache.out_w;
  const size_t patch_len = static_cast<size_t>(spec.kernel_h) * spec.kernel_w * cache.in_c;
  if (dout.size() != rows * F) throw ConfigError("conv: upstream gradient shape mismatch");

  weights.ensure_grad();
  bias.ensure_grad();

  for (size_t r = 0; r < rows; ++r)
    for (size_t f = 0; f < F; ++f) bias.g[f] += dout.v[r * F + f];

  // dW[p,f] += sum_r patches[r,p] * dout[r,f]
  gemm_at_b_acc(patch_len, rows, F, cache.patches.data(), dout.v.data(), weights.g.data());

  // dPatches = dout * W^T, then scatter back to the input grid.
  std::vector<double> wt(F * patch_len);
  for (size_t p = 0; p < patch_len; ++p)
    for (size_t f = 0; f < F; ++f) wt[f * patch_len + p] = weights.v[p * F + f];
  std::vector<double> dpatches(rows * patch_len, 0.0);
  gemm_acc(rows, F, patch_len, dout.v.data(), wt.data(), dpatches.data());

  Tensor din({static_cast<size_t>(cache.in_h), static_cast<size_t>(cache.in_w), static_cast<size_t>(cache.in_c)});
  detail::col2im_acc(dpatches.data(), cache.in_h, cache.in_w, cache.in_c, spec, cache.out_h, cache.out_w,
                     din.v.data());
  return din;
}

}  // namespace nspeech
