#pragma once

#include <cmath>
#include <vector>

#include "nspeech/tensor.hpp"

namespace nspeech {

// out[j] = sum_i W[i,j] * x[i] + b[j], weights stored [n, m].
inline Tensor fully_connected_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const size_t n = input.size();
  if (weights.shape.size() != 2 || weights.shape[0] != n)
    throw ConfigError("fc: weight shape mismatch, input " + std::to_string(n) + " vs weights " +
                      weights.shape_str());
  const size_t m = weights.shape[1];
  if (bias.size() != m) throw ConfigError("fc: bias shape mismatch");

  Tensor out({m});
  for (size_t j = 0; j < m; ++j) out.v[j] = bias.v[j];
  for (size_t i = 0; i < n; ++i) {
    const double xi = input.v[i];
    const double* w = weights.v.data() + i * m;
    for (size_t j = 0; j < m; ++j) out.v[j] += xi * w[j];
  }
  return out;
}

inline Tensor fully_connected_backward(const Tensor& input, Tensor& weights, Tensor& bias,
                                       const Tensor& dout) {
  const size_t n = input.size();
  const size_t m = weights.shape[1];
  if (dout.size() != m) throw ConfigError("fc: upstream gradient shape mismatch");
  weights.ensure_grad();
  bias.ensure_grad();

  for (size_t j = 0; j < m; ++j) bias.g[j] += dout.v[j];
  Tensor din(input.shape);
  for (size_t i = 0; i < n; ++i) {
    const double xi = input.v[i];
    const double* w = weights.v.data() + i * m;
    double* wg = weights.g.data() + i * m;
    double acc = 0.0;
    for (size_t j = 0; j < m; ++j) {
      wg[j] += xi * dout.v[j];
      acc += w[j] * dout.v[j];
    }
    din.v[i] = acc;
  }
  return din;
}

inline Tensor tanh_forward(const Tensor& input) {
  Tensor out(input.shape);
  for (size_t i = 0; i < input.size(); ++i) out.v[i] = std::tanh(input.v[i]);
  return out;
}

// d tanh = 1 - y^2, in terms of the forward output.
inline Tensor tanh_backward(const Tensor& output, const Tensor& dout) {
  Tensor din(output.shape);
  for (size_t i = 0; i < output.size(); ++i) din.v[i] = (1.0 - output.v[i] * output.v[i]) * dout.v[i];
  return din;
}

inline Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape);
  for (size_t i = 0; i < input.size(); ++i) out.v[i] = input.v[i] > 0.0 ? input.v[i] : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& dout) {
  Tensor din(input.shape);
  for (size_t i = 0; i < input.size(); ++i) din.v[i] = input.v[i] > 0.0 ? dout.v[i] : 0.0;
  return din;
}

// Max-subtracted softmax; probabilities sum to 1 and are shift-invariant in
// the logits.
inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("softmax: non-finite logit");
    mx = std::max(mx, z);
  }
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

// dL/dz_j = p_j * (dL/dp_j - sum_k dL/dp_k * p_k).
inline std::vector<double> softmax_backward(const std::vector<double>& probs,
                                            const std::vector<double>& dprobs) {
  double dot = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) dot += dprobs[k] * probs[k];
  std::vector<double> dz(probs.size());
  for (size_t j = 0; j < probs.size(); ++j) dz[j] = probs[j] * (dprobs[j] - dot);
  return dz;
}

struct SoftmaxXentResult {
  double loss = 0.0;
  std::vector<double> probs;
};

inline SoftmaxXentResult softmax_cross_entropy(const std::vector<double>& logits, size_t label) {
  if (logits.size() < 2) throw ConfigError("softmax_cross_entropy: need at least 2 classes");
  if (label >= logits.size()) throw ConfigError("softmax_cross_entropy: label out of range");
  SoftmaxXentResult res;
  res.probs = softmax(logits);
  // log p computed from the stabilized form to keep the loss finite.
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  res.loss = -(logits[label] - mx - std::log(sum));
  return res;
}

// gradient = probs - one_hot(label), scaled by the upstream loss gradient.
inline std::vector<double> softmax_cross_entropy_backward(const SoftmaxXentResult& fwd, size_t label,
                                                          double dloss = 1.0) {
  std::vector<double> dz(fwd.probs.size());
  for (size_t i = 0; i < dz.size(); ++i) dz[i] = (fwd.probs[i] - (i == label ? 1.0 : 0.0)) * dloss;
  return dz;
}

// p <- p - lr * grad, gradients zeroed afterward.
inline void sgd_step(const std::vector<Tensor*>& params, double lr) {
  for (Tensor* p : params)
    if (!p->has_grad()) throw NumericError("sgd: parameter without populated gradient");
  for (Tensor* p : params) {
    for (size_t i = 0; i < p->v.size(); ++i) p->v[i] -= lr * p->g[i];
    p->zero_grad();
  }
}

}  // namespace nspeech
