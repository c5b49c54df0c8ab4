#pragma once

// Fixed linear "different microphone/channel" transform for the third test
// set: a short FIR with a gentle upward band tilt (lows attenuated, highs
// lifted). Deterministic, documented by its taps; the frequency response
// follows from them directly.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

// Published taps of the channel filter. |H| rises from about 0.73 at DC to
// about 1.43 at Nyquist (~5.8 dB total tilt).
inline constexpr std::array<double, 3> kChannelTaps{1.0, -0.35, 0.08};

// Causal FIR, output truncated to the input length (x[n] = 0 for n < 0).
inline std::vector<double> channel_mismatch(const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (size_t k = 0; k < kChannelTaps.size() && k <= n; ++k) acc += kChannelTaps[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

inline AudioClip channel_mismatch(const AudioClip& clip) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = channel_mismatch(clip.samples);
  return out;
}

// Magnitude response at a normalized frequency (0 = DC, 0.5 = Nyquist),
// derived from the taps: H(f) = sum_k taps[k] * exp(-i 2 pi f k).
inline double channel_response_mag(double norm_freq) {
  std::complex<double> h(0.0, 0.0);
  for (size_t k = 0; k < kChannelTaps.size(); ++k) {
    double phase = -2.0 * M_PI * norm_freq * static_cast<double>(k);
    h += kChannelTaps[k] * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return std::abs(h);
}

inline double channel_response_db(double norm_freq) {
  return 20.0 * std::log10(channel_response_mag(norm_freq));
}

}  // namespace nspeech
