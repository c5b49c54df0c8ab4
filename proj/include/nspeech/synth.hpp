#pragma once

// Deterministic synthetic isolated-word corpus. Each class is a distinct
// spectro-temporal template (two formant-like tones, a slow chirp, and a
// class-specific syllable count); each utterance adds seeded jitter in rate,
// pitch, amplitude, and phase so classes have genuine intra-class variation.
// Class directories are prefixed with the class index so that sorted
// directory order equals label order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

struct CorpusSpec {
  int class_count = 11;
  int utterances_per_class = 12;
  int sample_rate = 8000;
  uint64_t seed = 1;

  void validate() const {
    if (class_count < 2) throw ConfigError("corpus: need at least 2 classes");
    if (class_count > 99) throw ConfigError("corpus: class directory prefix supports at most 99");
    if (utterances_per_class < 1) throw ConfigError("corpus: need at least 1 utterance per class");
    if (sample_rate < 2000) throw ConfigError("corpus: sample rate too low");
  }
};

struct CorpusItem {
  std::string utterance_id;
  std::string audio_path;
  int label = 0;

  bool operator==(const CorpusItem& o) const {
    return utterance_id == o.utterance_id && audio_path == o.audio_path && label == o.label;
  }
};

inline std::vector<std::string> word_names(int class_count) {
  static const char* kBase[] = {"zero", "one", "two",   "three", "four", "five",
                                "six",  "seven", "eight", "nine",  "oh"};
  std::vector<std::string> out;
  for (int i = 0; i < class_count; ++i) {
    if (i < 11) out.emplace_back(kBase[i]);
    else out.push_back("w" + std::to_string(i));
  }
  return out;
}

// One word token. The template is fixed per class index; rng supplies the
// per-utterance jitter.
inline std::vector<double> synth_utterance(int word, int sample_rate, Rng& rng) {
  const double rate = rng.uniform(0.92, 1.08);       // speaking-rate jitter
  const double f_jit = rng.uniform(0.97, 1.03);      // pitch jitter
  const double amp = rng.uniform(0.30, 0.42);        // peak amplitude
  const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
  const double phase2 = rng.uniform(0.0, 2.0 * M_PI);

  const double f1 = (230.0 + 55.0 * word) * f_jit;
  const double f2 = (760.0 + 97.0 * ((word * 4 + 3) % 11)) * f_jit;
  const double syllables = 1.0 + word % 3;
  const double drift_rate = (word % 2 == 0 ? 0.07 : -0.07);

  const size_t len = static_cast<size_t>(std::lround(sample_rate * 0.95 * rate));
  std::vector<double> s(len, 0.0);
  double ph1 = phase0;
  double ph2 = phase2;
  double peak = 0.0;
  for (size_t n = 0; n < len; ++n) {
    const double u = static_cast<double>(n) / static_cast<double>(len - 1);
    const double env = std::pow(std::sin(M_PI * u), 0.6) *
                       std::pow(std::fabs(std::sin(M_PI * syllables * u)) + 1e-3, 0.5);
    const double drift = 1.0 + drift_rate * (u - 0.5);
    ph1 += 2.0 * M_PI * f1 * drift / sample_rate;
    ph2 += 2.0 * M_PI * f2 / sample_rate;
    double x = env * (0.62 * std::sin(ph1) + 0.30 * std::sin(2.0 * ph1 + 0.8) +
                      0.45 * std::sin(ph2));
    x += 0.003 * rng.gaussian();
    s[n] = x;
    peak = std::max(peak, std::fabs(x));
  }
  const double gain = amp / peak;
  for (double& x : s) x *= gain;
  return s;
}

namespace detail {
inline std::string zero_pad(int v, int width) {
  std::string d = std::to_string(v);
  return std::string(width > static_cast<int>(d.size()) ? width - d.size() : 0, '0') + d;
}
}  // namespace detail

// Writes dir/<NN>_<word>/<word>_<kkk>.wav for every class and utterance.
// Fully determined by the spec (including its seed).
inline std::vector<CorpusItem> write_corpus(const std::string& dir, const CorpusSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  const std::vector<std::string> words = word_names(spec.class_count);
  std::vector<CorpusItem> items;
  for (int c = 0; c < spec.class_count; ++c) {
    fs::path class_dir = fs::path(dir) / (detail::zero_pad(c, 2) + "_" + words[c]);
    fs::create_directories(class_dir);
    for (int k = 0; k < spec.utterances_per_class; ++k) {
      std::string id = words[c] + "_" + detail::zero_pad(k, 3);
      Rng rng(derive_seed(spec.seed, "utt/" + id));
      AudioClip clip;
      clip.sample_rate = spec.sample_rate;
      clip.samples = synth_utterance(c, spec.sample_rate, rng);
      fs::path wav = class_dir / (id + ".wav");
      write_wav(wav.string(), clip);
      items.push_back({id, wav.string(), c});
    }
  }
  return items;
}

// Reads a corpus directory back: every subdirectory is a class (label = its
// rank in sorted order), every *.wav inside is an utterance whose id is the
// file stem.
inline std::vector<CorpusItem> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("corpus: not a directory: " + dir);
  std::vector<std::string> class_dirs;
  for (const fs::directory_entry& d : fs::directory_iterator(dir))
    if (d.is_directory()) class_dirs.push_back(d.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw DataError("corpus: no class directories under " + dir);

  std::vector<CorpusItem> items;
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> wavs;
    for (const fs::directory_entry& f : fs::directory_iterator(fs::path(dir) / class_dirs[label]))
      if (f.path().extension() == ".wav") wavs.push_back(f.path());
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty())
      throw DataError("corpus: class directory has no wav files: " + class_dirs[label]);
    for (const fs::path& w : wavs)
      items.push_back({w.stem().string(), w.string(), static_cast<int>(label)});
  }
  return items;
}

}  // namespace nspeech
