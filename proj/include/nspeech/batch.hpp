#pragma once

// Feature pipeline and deterministic batching. A manifest entry resolves to
// a (spectrogram, indeterminacy map) tensor pair: read the clean utterance,
// add the entry's noise at its SNR (third test set routes both signals
// through the channel-mismatch filter first), take the log spectrogram, fit
// it to the model grid, and run the indeterminacy transform on the fitted
// grid. Mixing offsets are seeded per (utterance, noise, SNR), so an entry
// always produces the same features; epochs reshuffle only the order.

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "nspeech/channel.hpp"
#include "nspeech/common.hpp"
#include "nspeech/manifest.hpp"
#include "nspeech/mix.hpp"
#include "nspeech/neutrosophic.hpp"
#include "nspeech/noise_bank.hpp"
#include "nspeech/stft.hpp"
#include "nspeech/tensor.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

struct FeatureConfig {
  StftConfig stft{};
  int grid_frames = 128;
  int grid_bins = 128;
  NsWindow window{11, 31};
  // The network input for the spectrogram path is
  // (log magnitude - log_floor) * spec_scale, mapping the floor to 0 and
  // typical speech peaks to order one. The indeterminacy path feeds the raw
  // map (mean 1 by construction).
  double spec_scale = 0.125;
  uint64_t mix_seed = 1;

  void validate() const {
    if (grid_frames < 1 || grid_bins < 1) throw ConfigError("features: bad grid size");
    window.validate();
    if (spec_scale <= 0.0) throw ConfigError("features: spec_scale must be positive");
  }
};

struct PreparedAudio {
  AudioClip clean;   // after channel filtering where the split calls for it
  AudioClip mixed;   // equals clean for clean entries
  double alpha = 0.0;
  size_t clip_count = 0;
};

struct FeaturePair {
  Tensor spec;
  Tensor ind;
  int label = 0;
  std::string utterance_id;
};

class FeatureExtractor {
 public:
  FeatureExtractor(NoiseBank bank, FeatureConfig cfg) : bank_(std::move(bank)), cfg_(cfg) {
    cfg_.validate();
  }

  const FeatureConfig& config() const { return cfg_; }

  PreparedAudio prepared(const ManifestEntry& entry) const {
    entry.validate();
    const bool channel = entry.split == Split::kTestC;
    PreparedAudio out;
    out.clean = read_wav(entry.audio_path);
    if (channel) out.clean = channel_mismatch(out.clean);
    if (entry.clean()) {
      out.mixed = out.clean;
      return out;
    }
    const AudioClip& noise = noise_clip(entry, channel);
    Rng rng(derive_seed(cfg_.mix_seed, "mix/" + entry.utterance_id + "/" + entry.noise_type +
                                           "/" + format_double(entry.snr_db)));
    MixResult r = mix_noise(out.clean, noise, entry.snr_db, rng);
    out.mixed = std::move(r.mixed);
    out.alpha = r.alpha;
    out.clip_count = r.clip_count;
    return out;
  }

  // Fitted log spectrogram of the entry's (possibly noisy) audio, with
  // provenance metadata filled in.
  Spectrogram fitted_spectrogram(const ManifestEntry& entry) const {
    PreparedAudio audio = prepared(entry);
    Spectrogram spec = spectrogram(audio.mixed, cfg_.stft);
    spec.utterance_id = entry.utterance_id;
    spec.noise_type = entry.noise_type;
    spec.snr_db = entry.snr_db;
    spec.has_snr = entry.has_snr;
    return fit_to_grid(spec, cfg_.grid_frames, cfg_.grid_bins);
  }

  FeaturePair features(const ManifestEntry& entry) const {
    Spectrogram fitted = fitted_spectrogram(entry);
    NeutrosophicMap ns = proposed_transform(fitted, cfg_.window);

    FeaturePair out;
    out.label = entry.label;
    out.utterance_id = entry.utterance_id;
    const size_t rows = fitted.grid.rows;
    const size_t cols = fitted.grid.cols;
    out.spec = Tensor({rows, cols, 1});
    out.ind = Tensor({rows, cols, 1});
    for (size_t i = 0; i < fitted.grid.v.size(); ++i)
      out.spec.v[i] = (fitted.grid.v[i] - cfg_.stft.log_floor) * cfg_.spec_scale;
    out.ind.v = ns.I.v;
    return out;
  }

 private:
  const AudioClip& noise_clip(const ManifestEntry& entry, bool channel) const {
    std::string path = pick_noise_wav(bank_, entry.noise_type, entry.utterance_id);
    std::string key = channel ? path + "#channel" : path;
    auto it = noise_cache_.find(key);
    if (it != noise_cache_.end()) return it->second;
    AudioClip clip = read_wav(path);
    if (channel) clip = channel_mismatch(clip);
    return noise_cache_.emplace(std::move(key), std::move(clip)).first->second;
  }

  NoiseBank bank_;
  FeatureConfig cfg_;
  mutable std::map<std::string, AudioClip> noise_cache_;
};

// Index batches for one epoch: a seeded shuffle of [0, item_count) chopped
// into batch_size chunks, keeping the short final chunk.
inline std::vector<std::vector<size_t>> epoch_batches(size_t item_count, size_t batch_size,
                                                      uint64_t seed, size_t epoch) {
  if (item_count == 0) throw DataError("batch: empty split");
  if (batch_size == 0) throw ConfigError("batch: batch size must be positive");
  std::vector<size_t> order(item_count);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(derive_seed(seed, "epoch/" + std::to_string(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    size_t stop = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

}  // namespace nspeech
