#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "nspeech/common.hpp"
#include "nspeech/grid_io.hpp"
#include "nspeech/stft.hpp"

namespace nspeech {

// Rectangular neighborhood for the neutrosophic transforms: t cells along the
// time axis (rows), f cells along the frequency axis (columns). Both lengths
// must be odd so the window has a center cell.
struct NsWindow {
  int t = 11;
  int f = 31;

  void validate() const {
    if (t < 1 || f < 1 || t % 2 == 0 || f % 2 == 0)
      throw ConfigError("ns window: lengths must be odd and >= 1, got " + std::to_string(t) + "x" +
                        std::to_string(f));
  }
};

// Parses "TxF". Even lengths are rejected; use nearest_odd_window for
// even-sized labels from the sweep configuration.
inline NsWindow parse_ns_window(const std::string& s) {
  size_t x = s.find('x');
  if (x == std::string::npos) throw ConfigError("ns window: expected TxF, got '" + s + "'");
  NsWindow w;
  try {
    w.t = std::stoi(s.substr(0, x));
    w.f = std::stoi(s.substr(x + 1));
  } catch (const std::exception&) {
    throw ConfigError("ns window: expected TxF, got '" + s + "'");
  }
  w.validate();
  return w;
}

// Maps even lengths up to the next odd value (10x30 -> 11x31); odd lengths
// pass through. Sweep reports keep the original label.
inline NsWindow nearest_odd_window(int t, int f) {
  NsWindow w;
  w.t = t % 2 == 0 ? t + 1 : t;
  w.f = f % 2 == 0 ? f + 1 : f;
  return w;
}

enum class NsMethod { kBaseline, kProposed };

inline std::string ns_method_name(NsMethod m) { return m == NsMethod::kBaseline ? "baseline" : "proposed"; }

// Intermediate products of the transforms: the mean-filtered grid, the
// absolute deviation grid, and their scalar statistics.
struct NsIntermediates {
  Grid g_bar;
  Grid delta;
  double g_bar_mean = 0.0;
  double delta_mean = 0.0;
  double g_bar_min = 0.0, g_bar_max = 0.0;
  double delta_min = 0.0, delta_max = 0.0;
};

// Truth and indeterminacy grids aligned with the source spectrogram. The
// baseline method also carries falsity F = 1 - T. Proposed-method grids are
// mean-ratios and may exceed 1; baseline grids live in [0, 1].
struct NeutrosophicMap {
  Grid T;
  Grid I;
  Grid F;
  bool has_f = false;
  NsMethod method = NsMethod::kProposed;
  NsWindow window;
  bool t_degenerate = false;
  bool i_degenerate = false;

  bool degenerate() const { return t_degenerate || i_degenerate; }
};

/// Mean filter over a t x f rectangular neighborhood with replicate
/// (clamp-to-edge) padding, so the output has the same dims as the input.
/// Computed separably: frequency axis first, then time axis; the clamped
/// indexing decomposes exactly per axis.
inline Grid mean_filter(const Grid& g, const NsWindow& win) {
  win.validate();
  if (win.t > g.rows || win.f > g.cols)
    throw DataError("mean_filter: window " + std::to_string(win.t) + "x" + std::to_string(win.f) +
                    " larger than grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols));

  const int ht = (win.t - 1) / 2;
  const int hf = (win.f - 1) / 2;

  Grid cols_done(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      double acc = 0.0;
      for (int n = -hf; n <= hf; ++n) {
        int cc = std::clamp(c + n, 0, g.cols - 1);
        acc += g.at(r, cc);
      }
      cols_done.at(r, c) = acc / win.f;
    }
  }

  Grid out(g.rows, g.cols);
  for (int c = 0; c < g.cols; ++c) {
    for (int r = 0; r < g.rows; ++r) {
      double acc = 0.0;
      for (int m = -ht; m <= ht; ++m) {
        int rr = std::clamp(r + m, 0, g.rows - 1);
        acc += cols_done.at(rr, c);
      }
      out.at(r, c) = acc / win.t;
    }
  }
  return out;
}

/// Elementwise absolute deviation |g - g_bar|.
inline Grid deviation(const Grid& g, const Grid& g_bar) {
  if (!g.same_dims(g_bar)) throw DataError("deviation: dimension mismatch");
  Grid d(g.rows, g.cols);
  for (size_t i = 0; i < g.v.size(); ++i) d.v[i] = std::fabs(g.v[i] - g_bar.v[i]);
  return d;
}

namespace detail {

inline double grid_mean(const Grid& g) {
  double acc = 0.0;
  for (double x : g.v) acc += x;
  return acc / static_cast<double>(g.v.size());
}

inline NsIntermediates ns_intermediates(const Grid& g, const NsWindow& win) {
  NsIntermediates mid;
  mid.g_bar = mean_filter(g, win);
  mid.delta = deviation(g, mid.g_bar);
  mid.g_bar_mean = grid_mean(mid.g_bar);
  mid.delta_mean = grid_mean(mid.delta);
  auto [gmin, gmax] = std::minmax_element(mid.g_bar.v.begin(), mid.g_bar.v.end());
  auto [dmin, dmax] = std::minmax_element(mid.delta.v.begin(), mid.delta.v.end());
  mid.g_bar_min = *gmin;
  mid.g_bar_max = *gmax;
  mid.delta_min = *dmin;
  mid.delta_max = *dmax;
  return mid;
}

// Denominators below this magnitude flag the corresponding grid degenerate
// (all zeros) instead of dividing; silence clips hit this path.
constexpr double kDegenerateEps = 1e-12;

}  // namespace detail

/// Mean-ratio neutrosophic transform of a spectrogram:
///   T = g_bar / mean(g_bar),  I = delta / mean(delta),
/// where g_bar is the t x f mean-filtered grid and delta = |g - g_bar|.
/// Both grids have mean 1 by construction on non-degenerate inputs. A cell's
/// indeterminacy grows with its absolute deviation from the neighborhood
/// mean, so noise-dominated regions light up in I. No falsity grid is
/// produced by this method.
inline NeutrosophicMap proposed_transform(const Spectrogram& spec, const NsWindow& win) {
  if (!spec.grid.all_finite()) throw DataError("proposed_transform: non-finite spectrogram");
  NsIntermediates mid = detail::ns_intermediates(spec.grid, win);

  NeutrosophicMap map;
  map.method = NsMethod::kProposed;
  map.window = win;
  map.T = Grid(spec.grid.rows, spec.grid.cols);
  map.I = Grid(spec.grid.rows, spec.grid.cols);

  if (std::fabs(mid.g_bar_mean) < detail::kDegenerateEps) {
    map.t_degenerate = true;
  } else {
    for (size_t i = 0; i < map.T.v.size(); ++i) map.T.v[i] = mid.g_bar.v[i] / mid.g_bar_mean;
  }
  if (std::fabs(mid.delta_mean) < detail::kDegenerateEps) {
    map.i_degenerate = true;
  } else {
    for (size_t i = 0; i < map.I.v.size(); ++i) map.I.v[i] = mid.delta.v[i] / mid.delta_mean;
  }
  return map;
}

/// Classical min-max neutrosophic transform:
///   T = (g_bar - min(g_bar)) / (max(g_bar) - min(g_bar)),  F = 1 - T,
///   I = (delta - min(delta)) / (max(delta) - min(delta)).
/// A constant g_bar or delta grid flags the corresponding output degenerate
/// (all zeros) rather than dividing by the zero span.
inline NeutrosophicMap baseline_transform(const Spectrogram& spec, const NsWindow& win) {
  if (!spec.grid.all_finite()) throw DataError("baseline_transform: non-finite spectrogram");
  NsIntermediates mid = detail::ns_intermediates(spec.grid, win);

  NeutrosophicMap map;
  map.method = NsMethod::kBaseline;
  map.window = win;
  map.has_f = true;
  map.T = Grid(spec.grid.rows, spec.grid.cols);
  map.I = Grid(spec.grid.rows, spec.grid.cols);
  map.F = Grid(spec.grid.rows, spec.grid.cols);

  const double t_span = mid.g_bar_max - mid.g_bar_min;
  if (t_span < detail::kDegenerateEps) {
    map.t_degenerate = true;
  } else {
    for (size_t i = 0; i < map.T.v.size(); ++i) map.T.v[i] = (mid.g_bar.v[i] - mid.g_bar_min) / t_span;
  }
  for (size_t i = 0; i < map.F.v.size(); ++i) map.F.v[i] = 1.0 - map.T.v[i];

  const double i_span = mid.delta_max - mid.delta_min;
  if (i_span < detail::kDegenerateEps) {
    map.i_degenerate = true;
  } else {
    for (size_t i = 0; i < map.I.v.size(); ++i) map.I.v[i] = (mid.delta.v[i] - mid.delta_min) / i_span;
  }
  return map;
}

// Writes the map grids next to `stem`: <stem>_I.grid/.pgm always, plus T and
// (baseline) F. Grid files round-trip bit-exactly; PGM renders are min-max
// scaled for display only.
inline void export_map(const NeutrosophicMap& map, const std::string& stem) {
  write_grid(stem + "_I.grid", map.I, "ns_i", map.i_degenerate);
  write_grid_pgm(stem + "_I.pgm", map.I);
  write_grid(stem + "_T.grid", map.T, "ns_t", map.t_degenerate);
  write_grid_pgm(stem + "_T.pgm", map.T);
  if (map.has_f) {
    write_grid(stem + "_F.grid", map.F, "ns_f", map.t_degenerate);
    write_grid_pgm(stem + "_F.pgm", map.F);
  }
}

}  // namespace nspeech
