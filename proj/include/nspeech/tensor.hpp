#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "nspeech/common.hpp"

namespace nspeech {

// Dense n-dimensional array of doubles with an optional gradient slot of the
// same length. Layout is row-major; images use H x W x C with channels last.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> v;
  std::vector<double> g;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s) : shape(std::move(s)), v(count(shape), 0.0) {}

  static size_t count(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  size_t size() const { return v.size(); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }
  void zero_grad() { g.assign(g.size(), 0.0); }
  bool has_grad() const { return g.size() == v.size() && !v.empty(); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s;
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s;
  }
};

}  // namespace nspeech
