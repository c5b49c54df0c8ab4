#pragma once

#include <limits>
#include <vector>

#include "nspeech/tensor.hpp"

namespace nspeech {

struct PoolSpec {
  int kernel_h = 2, kernel_w = 2;
  int stride_h = 2, stride_w = 2;
  bool ceil_mode = false;

  void validate() const {
    if (kernel_h < 1 || kernel_w < 1 || stride_h < 1 || stride_w < 1)
      throw ConfigError("pool: invalid spec");
  }
};

// ceil_mode on: out = ceil(in / stride), padding implicitly with -inf and
// splitting the pad evenly (extra cell at the end). ceil_mode off:
// out = floor((in - kernel) / stride) + 1, remainder dropped.
inline int pool_out_dim(int in, int kernel, int stride, bool ceil_mode) {
  if (ceil_mode) return (in + stride - 1) / stride;
  return (in - kernel) / stride + 1;
}

inline int pool_pad_begin(int in, int kernel, int stride, bool ceil_mode) {
  if (!ceil_mode) return 0;
  int out = pool_out_dim(in, kernel, stride, true);
  int total = (out - 1) * stride + kernel - in;
  return total > 0 ? total / 2 : 0;
}

struct PoolCache {
  std::vector<size_t> argmax;  // input flat index per output cell
  int in_h = 0, in_w = 0, in_c = 0;
  int out_h = 0, out_w = 0;
  bool valid = false;
};

// Per-window maximum over [H,W] independently per channel; ties go to the
// first cell in row-major window order.
inline Tensor max_pool_forward(const Tensor& input, const PoolSpec& spec, PoolCache* cache = nullptr) {
  spec.validate();
  if (input.shape.size() != 3) throw ConfigError("pool: input must be H x W x C");
  const int H = static_cast<int>(input.shape[0]);
  const int W = static_cast<int>(input.shape[1]);
  const int C = static_cast<int>(input.shape[2]);
  if (!spec.ceil_mode && (H < spec.kernel_h || W < spec.kernel_w))
    throw ConfigError("pool: kernel larger than input");

  const int out_h = pool_out_dim(H, spec.kernel_h, spec.stride_h, spec.ceil_mode);
  const int out_w = pool_out_dim(W, spec.kernel_w, spec.stride_w, spec.ceil_mode);
  if (out_h < 1 || out_w < 1) throw ConfigError("pool: zero-size output");
  const int pad_y = pool_pad_begin(H, spec.kernel_h, spec.stride_h, spec.ceil_mode);
  const int pad_x = pool_pad_begin(W, spec.kernel_w, spec.stride_w, spec.ceil_mode);

  PoolCache local;
  PoolCache& pc = cache ? *cache : local;
  pc.in_h = H;
  pc.in_w = W;
  pc.in_c = C;
  pc.out_h = out_h;
  pc.out_w = out_w;
  pc.argmax.assign(static_cast<size_t>(out_h) * out_w * C, 0);
  pc.valid = true;

  Tensor out({static_cast<size_t>(out_h), static_cast<size_t>(out_w), static_cast<size_t>(C)});
  for (int oy = 0; oy < out_h; ++oy) {
    const int y0 = std::max(oy * spec.stride_h - pad_y, 0);
    const int y1 = std::min(oy * spec.stride_h - pad_y + spec.kernel_h, H);
    for (int ox = 0; ox < out_w; ++ox) {
      const int x0 = std::max(ox * spec.stride_w - pad_x, 0);
      const int x1 = std::min(ox * spec.stride_w - pad_x + spec.kernel_w, W);
      for (int c = 0; c < C; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        size_t best_idx = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            size_t idx = (static_cast<size_t>(y) * W + x) * C + c;
            if (input.v[idx] > best) {
              best = input.v[idx];
              best_idx = idx;
            }
          }
        size_t oidx = (static_cast<size_t>(oy) * out_w + ox) * C + c;
        out.v[oidx] = best;
        pc.argmax[oidx] = best_idx;
      }
    }
  }
  return out;
}

// Routes each output gradient to the argmax cell recorded in the cache.
inline Tensor max_pool_backward(const PoolCache& cache, const Tensor& dout) {
  if (!cache.valid) throw NumericError("pool: backward without recorded forward context");
  if (dout.size() != cache.argmax.size()) throw ConfigError("pool: upstream gradient shape mismatch");
  Tensor din({static_cast<size_t>(cache.in_h), static_cast<size_t>(cache.in_w), static_cast<size_t>(cache.in_c)});
  for (size_t i = 0; i < cache.argmax.size(); ++i) din.v[cache.argmax[i]] += dout.v[i];
  return din;
}

}  // namespace nspeech
