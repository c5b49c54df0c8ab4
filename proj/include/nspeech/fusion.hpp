#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/layers.hpp"

namespace nspeech {

enum class CombinationRule { kSum, kProduct, kMaximum };

inline std::string combination_rule_name(CombinationRule r) {
  switch (r) {
    case CombinationRule::kSum: return "sum";
    case CombinationRule::kProduct: return "product";
    case CombinationRule::kMaximum: return "maximum";
  }
  return "?";
}

inline CombinationRule parse_combination_rule(const std::string& s) {
  if (s == "sum") return CombinationRule::kSum;
  if (s == "product") return CombinationRule::kProduct;
  if (s == "maximum" || s == "max") return CombinationRule::kMaximum;
  throw ConfigError("combination rule must be sum, product, or maximum; got '" + s + "'");
}

namespace detail {

// Probability floor used inside the product rule so a hard zero on one path
// cannot poison the log-space sum.
constexpr double kProbFloor = 1e-300;

inline void check_posterior(const std::vector<double>& p, const char* which) {
  if (p.size() < 2) throw ConfigError(std::string("combine: ") + which + " has fewer than 2 classes");
  double s = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0)
      throw NumericError(std::string("combine: ") + which + " is not a probability vector");
    s += x;
  }
  if (std::fabs(s - 1.0) > 1e-6)
    throw NumericError(std::string("combine: ") + which + " does not sum to 1 (sum=" + std::to_string(s) +
                       ")");
}

}  // namespace detail

// Fuses two class posteriors into one. All three rules return a vector that
// is non-negative and sums to 1:
//   sum      q_k = (a_k + b_k) / 2
//   product  q_k = softmax(log a_k + log b_k)   (floored logs, shift-stable)
//   maximum  q_k = max(a_k, b_k) / sum_j max(a_j, b_j)
inline std::vector<double> combine_posteriors(const std::vector<double>& pa, const std::vector<double>& pb,
                                              CombinationRule rule) {
  detail::check_posterior(pa, "first posterior");
  detail::check_posterior(pb, "second posterior");
  if (pa.size() != pb.size()) throw ConfigError("combine: posterior lengths differ");
  const size_t k = pa.size();
  std::vector<double> q(k);

  switch (rule) {
    case CombinationRule::kSum:
      for (size_t i = 0; i < k; ++i) q[i] = 0.5 * (pa[i] + pb[i]);
      return q;

    case CombinationRule::kProduct: {
      std::vector<double> l(k);
      for (size_t i = 0; i < k; ++i)
        l[i] = std::log(std::max(pa[i], detail::kProbFloor)) +
               std::log(std::max(pb[i], detail::kProbFloor));
      return softmax(l);
    }

    case CombinationRule::kMaximum: {
      double s = 0.0;
      for (size_t i = 0; i < k; ++i) {
        q[i] = std::max(pa[i], pb[i]);
        s += q[i];
      }
      for (double& x : q) x /= s;
      return q;
    }
  }
  throw ConfigError("combine: unknown rule");
}

struct CombineGrads {
  std::vector<double> dpa, dpb;
};

// Exact gradients of combine_posteriors with respect to both inputs, given
// the forward output q and the upstream gradient dq. Floored entries of the
// product rule and losing entries of the maximum rule receive zero; maximum
// ties route to the first input.
inline CombineGrads combine_backward(const std::vector<double>& pa, const std::vector<double>& pb,
                                     const std::vector<double>& q, const std::vector<double>& dq,
                                     CombinationRule rule) {
  const size_t k = pa.size();
  if (pb.size() != k || q.size() != k || dq.size() != k)
    throw ConfigError("combine backward: length mismatch");
  CombineGrads g;
  g.dpa.assign(k, 0.0);
  g.dpb.assign(k, 0.0);

  switch (rule) {
    case CombinationRule::kSum:
      for (size_t i = 0; i < k; ++i) {
        g.dpa[i] = 0.5 * dq[i];
        g.dpb[i] = 0.5 * dq[i];
      }
      return g;

    case CombinationRule::kProduct: {
      // q = softmax(l), l_i = log max(a_i,floor) + log max(b_i,floor).
      std::vector<double> dl = softmax_backward(q, dq);
      for (size_t i = 0; i < k; ++i) {
        if (pa[i] > detail::kProbFloor) g.dpa[i] = dl[i] / pa[i];
        if (pb[i] > detail::kProbFloor) g.dpb[i] = dl[i] / pb[i];
      }
      return g;
    }

    case CombinationRule::kMaximum: {
      double s = 0.0, dot = 0.0;
      for (size_t i = 0; i < k; ++i) s += std::max(pa[i], pb[i]);
      for (size_t i = 0; i < k; ++i) dot += dq[i] * q[i];
      for (size_t i = 0; i < k; ++i) {
        double dv = (dq[i] - dot) / s;
        if (pa[i] >= pb[i])
          g.dpa[i] = dv;
        else
          g.dpb[i] = dv;
      }
      return g;
    }
  }
  throw ConfigError("combine backward: unknown rule");
}

}  // namespace nspeech
