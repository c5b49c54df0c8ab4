#pragma once

#include <cmath>
#include <cstdint>

#include "nspeech/common.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

struct MixResult {
  AudioClip mixed;
  double alpha = 0.0;        // noise gain applied
  size_t noise_offset = 0;   // crop offset into the noise signal
  size_t clip_count = 0;     // samples clamped to [-1, 1]
};

// Additive noise mixing at a requested SNR over whole-signal RMS:
//   out = clean + alpha * noise_segment,
//   alpha = RMS(clean) / (RMS(noise_segment) * 10^(snr_db / 20)).
// A noise signal longer than the clean one is cropped at an offset drawn from
// rng; equal lengths use offset 0.
inline MixResult mix_noise(const AudioClip& clean, const AudioClip& noise, double snr_db, Rng& rng) {
  if (clean.sample_rate != noise.sample_rate)
    throw DataError("mix: sample-rate mismatch (" + std::to_string(clean.sample_rate) + " vs " +
                    std::to_string(noise.sample_rate) + ")");
  if (noise.samples.size() < clean.samples.size())
    throw DataError("mix: noise shorter than clean signal");

  const size_t n = clean.samples.size();
  const size_t slack = noise.samples.size() - n;
  const size_t offset = slack > 0 ? static_cast<size_t>(rng.below(slack + 1)) : 0;

  double clean_rms = rms(clean.samples);
  if (clean_rms < 1e-8) throw DataError("mix: clean signal is silent (RMS below 1e-8)");

  double noise_acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double x = noise.samples[offset + i];
    noise_acc += x * x;
  }
  double noise_rms = std::sqrt(noise_acc / static_cast<double>(n));
  if (noise_rms <= 0.0) throw DataError("mix: noise segment is silent");

  const double alpha = clean_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));

  MixResult res;
  res.alpha = alpha;
  res.noise_offset = offset;
  res.mixed.sample_rate = clean.sample_rate;
  res.mixed.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double x = clean.samples[i] + alpha * noise.samples[offset + i];
    if (x > 1.0) {
      x = 1.0;
      ++res.clip_count;
    } else if (x < -1.0) {
      x = -1.0;
      ++res.clip_count;
    }
    res.mixed.samples[i] = x;
  }
  return res;
}

}  // namespace nspeech
