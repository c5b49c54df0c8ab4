#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

enum class WindowShape { kHamming, kHann, kRect };

inline WindowShape parse_window_shape(const std::string& s) {
  if (s == "hamming") return WindowShape::kHamming;
  if (s == "hann") return WindowShape::kHann;
  if (s == "rect") return WindowShape::kRect;
  throw ConfigError("stft: unknown window shape: " + s);
}

struct StftConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  WindowShape window_shape = WindowShape::kHamming;
  double log_floor = -8.0;

  int window_samples(int sample_rate) const {
    return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
  }
  int hop_samples(int sample_rate) const {
    return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
  }

  void validate(int sample_rate) const {
    if (hop_ms <= 0 || window_ms <= 0 || hop_ms > window_ms)
      throw ConfigError("stft: need 0 < hop_ms <= window_ms");
    if (!(std::isfinite(log_floor) && log_floor < 0))
      throw ConfigError("stft: log_floor must be finite and negative");
    int win = window_samples(sample_rate);
    if (fft_size < win) throw ConfigError("stft: fft_size smaller than window length");
    if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
      throw ConfigError("stft: fft_size must be a power of two");
  }
};

// Time x frequency grid of log10 magnitudes, clamped below at log_floor.
struct Spectrogram {
  Grid grid;
  double log_floor = -8.0;
  // Source tags carried through for reports and exports.
  std::string utterance_id;
  std::string noise_type = "clean";
  double snr_db = 0.0;
  bool has_snr = false;

  int frame_count() const { return grid.rows; }
  int bin_count() const { return grid.cols; }
};

namespace detail {

// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> t = a[i + k + len / 2] * w;
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wl;
      }
    }
  }
}

inline std::vector<double> make_window(WindowShape shape, int n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (int i = 0; i < n; ++i) {
    double phase = 2.0 * M_PI * i / (n - 1);
    switch (shape) {
      case WindowShape::kHamming: w[i] = 0.54 - 0.46 * std::cos(phase); break;
      case WindowShape::kHann: w[i] = 0.5 - 0.5 * std::cos(phase); break;
      case WindowShape::kRect: w[i] = 1.0; break;
    }
  }
  return w;
}

}  // namespace detail

// Short-time log-magnitude spectrogram.
// frame_count = floor((len - win) / hop) + 1, bin_count = fft_size / 2 + 1.
inline Spectrogram spectrogram(const AudioClip& clip, const StftConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const int win = cfg.window_samples(clip.sample_rate);
  const int hop = cfg.hop_samples(clip.sample_rate);
  const int len = static_cast<int>(clip.samples.size());
  if (len <= win) throw DataError("spectrogram: clip shorter than one analysis window");

  const int frames = (len - win) / hop + 1;
  const int bins = cfg.fft_size / 2 + 1;
  const std::vector<double> taper = detail::make_window(cfg.window_shape, win);

  Spectrogram spec;
  spec.grid = Grid(frames, bins);
  spec.log_floor = cfg.log_floor;

  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (int f = 0; f < frames; ++f) {
    const int start = f * hop;
    for (int i = 0; i < win; ++i) buf[i] = clip.samples[start + i] * taper[i];
    for (int i = win; i < cfg.fft_size; ++i) buf[i] = 0.0;
    detail::fft_radix2(buf);
    for (int k = 0; k < bins; ++k) {
      double mag = std::abs(buf[k]);
      double val = mag > 0.0 ? std::log10(mag) : cfg.log_floor;
      spec.grid.at(f, k) = std::max(val, cfg.log_floor);
    }
  }
  return spec;
}

// Fits a spectrogram to a fixed grid. The time axis is center-cropped or
// symmetrically padded with log_floor (odd remainders put the extra frame at
// the end). The frequency axis keeps the lowest bins; padding and cropping
// happen at the high-frequency edge.
inline Spectrogram fit_to_grid(const Spectrogram& spec, int frames, int bins) {
  if (frames <= 0 || bins <= 0) throw ConfigError("fit_to_grid: target dims must be positive");
  Spectrogram out = spec;
  out.grid = Grid(frames, bins, spec.log_floor);

  int row_src0 = 0, row_dst0 = 0;
  int copy_rows;
  if (spec.grid.rows >= frames) {
    row_src0 = (spec.grid.rows - frames) / 2;
    copy_rows = frames;
  } else {
    row_dst0 = (frames - spec.grid.rows) / 2;
    copy_rows = spec.grid.rows;
  }
  const int copy_cols = std::min(spec.grid.cols, bins);

  for (int r = 0; r < copy_rows; ++r)
    for (int c = 0; c < copy_cols; ++c)
      out.grid.at(row_dst0 + r, c) = spec.grid.at(row_src0 + r, c);
  return out;
}

}  // namespace nspeech
