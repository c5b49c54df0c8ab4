#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/tensor.hpp"

namespace nspeech {

struct GradCheckOptions {
  double step = 1e-4;      // central-difference half-step
  double rel_tol = 1e-4;   // relative bound where the reference gradient is not tiny
  double abs_tol = 1e-2;   // absolute bound where |reference| < tiny
  double tiny = 1e-6;
  size_t max_entries = 0;  // 0 checks every entry; otherwise samples this many per tensor
  uint64_t sample_seed = 1;
};

struct GradCheckEntry {
  std::string name;
  size_t entries = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass = true;

  std::string str() const {
    std::ostringstream out;
    for (const GradCheckEntry& e : params)
      out << (e.pass ? "ok   " : "FAIL ") << e.name << " entries=" << e.entries
          << " max_rel=" << e.max_rel_err << " max_abs=" << e.max_abs_err << "\n";
    out << (pass ? "ok   " : "FAIL ") << "overall max_rel=" << max_rel_err << " max_abs=" << max_abs_err
        << "\n";
    return out.str();
  }
};

// Compares analytic gradients against central finite differences.
//
// `backward` must zero the listed gradients, run the graph forward and
// backward once, and leave analytic gradients in each tensor's grad slot.
// `loss` must run the same graph forward from the current parameter values
// and return the scalar loss, touching no gradient state.
inline GradCheckReport grad_check(const std::vector<std::pair<std::string, Tensor*>>& params,
                                  const std::function<double()>& loss,
                                  const std::function<void()>& backward,
                                  const GradCheckOptions& opt = {}) {
  backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : params) {
    if (!t->has_grad()) throw NumericError("grad_check: '" + name + "' has no populated gradient");
    analytic.push_back(t->g);
  }

  GradCheckReport report;
  Rng sampler(opt.sample_seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor* t = params[pi].second;
    GradCheckEntry entry;
    entry.name = params[pi].first;

    std::vector<size_t> idx(t->size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    if (opt.max_entries > 0 && idx.size() > opt.max_entries) {
      sampler.shuffle(idx);
      idx.resize(opt.max_entries);
    }

    for (size_t i : idx) {
      const double saved = t->v[i];
      t->v[i] = saved + opt.step;
      const double lp = loss();
      t->v[i] = saved - opt.step;
      const double lm = loss();
      t->v[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw NumericError("grad_check: non-finite loss while perturbing '" + entry.name + "'");

      const double numeric = (lp - lm) / (2.0 * opt.step);
      const double a = analytic[pi][i];
      const double diff = std::fabs(a - numeric);
      ++entry.entries;
      if (std::fabs(numeric) < opt.tiny) {
        entry.max_abs_err = std::max(entry.max_abs_err, diff);
        if (diff > opt.abs_tol) entry.pass = false;
      } else {
        const double rel = diff / std::max(std::fabs(numeric), std::fabs(a));
        entry.max_rel_err = std::max(entry.max_rel_err, rel);
        if (rel > opt.rel_tol) entry.pass = false;
      }
    }

    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.max_abs_err = std::max(report.max_abs_err, entry.max_abs_err);
    report.pass = report.pass && entry.pass;
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace nspeech
