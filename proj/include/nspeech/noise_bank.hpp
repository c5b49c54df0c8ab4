#pragma once

// Noise bank: a directory of noise WAVs plus a families.txt mapping each WAV
// to a named family. A shipped generator produces four families — white,
// pink (Voss-McCartney), babble-like (sum of eight shuffled corpus
// utterances), and mains hum — so split construction always has two disjoint
// families per test set. User-provided WAVs can be ingested by listing them
// in the same mapping file.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/synth.hpp"
#include "nspeech/wav.hpp"

namespace nspeech {

struct NoiseBank {
  std::string dir;
  // family -> wav paths, both sorted for deterministic iteration.
  std::map<std::string, std::vector<std::string>> families;

  const std::vector<std::string>& wavs_for(const std::string& family) const {
    auto it = families.find(family);
    if (it == families.end() || it->second.empty())
      throw DataError("noise bank: empty or unknown noise family '" + family + "'");
    return it->second;
  }
};

struct NoiseBankSpec {
  double duration_s = 12.0;
  int sample_rate = 8000;
  uint64_t seed = 1;
};

namespace detail {

inline void scale_to_rms(std::vector<double>& xs, double target) {
  double r = rms(xs);
  if (r <= 0.0) throw NumericError("noise bank: generated silence");
  double g = target / r;
  for (double& x : xs) x *= g;
}

inline std::vector<double> white_noise(size_t len, Rng& rng) {
  std::vector<double> s(len);
  for (double& x : s) x = rng.gaussian();
  scale_to_rms(s, 0.1);
  return s;
}

// Voss-McCartney pink noise: one of 16 octave-spaced rows refreshes per
// sample (row = trailing zero count of the sample counter); their mean plus a
// white component gives an approximately 1/f spectrum.
inline std::vector<double> pink_noise(size_t len, Rng& rng) {
  constexpr int kRows = 16;
  double rows[kRows];
  for (double& r : rows) r = rng.uniform(-1.0, 1.0);
  std::vector<double> s(len);
  for (size_t n = 0; n < len; ++n) {
    if (n > 0) {
      int k = 0;
      size_t m = n;
      while ((m & 1) == 0 && k < kRows - 1) {
        m >>= 1;
        ++k;
      }
      rows[k] = rng.uniform(-1.0, 1.0);
    }
    double acc = 0.0;
    for (double r : rows) acc += r;
    s[n] = acc / kRows + 0.05 * rng.uniform(-1.0, 1.0);
  }
  scale_to_rms(s, 0.1);
  return s;
}

inline std::vector<double> hum_noise(size_t len, int sample_rate, Rng& rng) {
  const double p1 = rng.uniform(0.0, 2.0 * M_PI);
  const double p3 = rng.uniform(0.0, 2.0 * M_PI);
  const double p5 = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> s(len);
  for (size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    const double am = 1.0 + 0.2 * std::sin(2.0 * M_PI * 0.3 * t);
    s[n] = am * (1.0 * std::sin(2.0 * M_PI * 50.0 * t + p1) +
                 0.4 * std::sin(2.0 * M_PI * 150.0 * t + p3) +
                 0.2 * std::sin(2.0 * M_PI * 250.0 * t + p5)) +
           0.05 * rng.gaussian();
  }
  scale_to_rms(s, 0.1);
  return s;
}

// Sum of eight shuffled corpus utterances, each tiled from a seeded offset.
inline std::vector<double> babble_noise(size_t len, int sample_rate,
                                        const std::vector<CorpusItem>& pool, Rng& rng) {
  if (pool.size() < 8) throw DataError("noise bank: babble needs at least 8 pool utterances");
  std::vector<size_t> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<double> s(len, 0.0);
  for (int talker = 0; talker < 8; ++talker) {
    AudioClip clip = read_wav(pool[order[talker]].audio_path);
    if (clip.sample_rate != sample_rate)
      throw DataError("noise bank: babble pool sample rate mismatch: " +
                      pool[order[talker]].audio_path);
    const size_t offset = rng.below(clip.samples.size());
    for (size_t n = 0; n < len; ++n)
      s[n] += clip.samples[(offset + n) % clip.samples.size()];
  }
  scale_to_rms(s, 0.1);
  return s;
}

}  // namespace detail

inline std::string families_file(const std::string& dir) {
  return (std::filesystem::path(dir) / "families.txt").string();
}

inline NoiseBank load_noise_bank(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(families_file(dir));
  if (!f) throw DataError("noise bank: cannot open " + families_file(dir));
  NoiseBank bank;
  bank.dir = dir;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 2)
      throw DataError(families_file(dir) + ":" + std::to_string(line_no) +
                      ": expected '<family>\\t<wav>'");
    fs::path wav = fs::path(dir) / fields[1];
    if (!fs::exists(wav))
      throw DataError("noise bank: listed wav missing: " + wav.string());
    bank.families[fields[0]].push_back(wav.string());
  }
  if (bank.families.empty()) throw DataError("noise bank: no families listed in " + dir);
  for (auto& [family, wavs] : bank.families) std::sort(wavs.begin(), wavs.end());
  return bank;
}

// Generates the four built-in families under dir and writes families.txt.
inline NoiseBank generate_noise_bank(const std::string& dir,
                                     const std::vector<CorpusItem>& babble_pool,
                                     const NoiseBankSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.duration_s <= 0.0 || spec.sample_rate < 2000)
    throw ConfigError("noise bank: bad duration or sample rate");
  fs::create_directories(dir);
  const size_t len = static_cast<size_t>(std::lround(spec.duration_s * spec.sample_rate));

  std::map<std::string, std::vector<double>> generated;
  {
    Rng rng(derive_seed(spec.seed, "noise/white"));
    generated["white"] = detail::white_noise(len, rng);
  }
  {
    Rng rng(derive_seed(spec.seed, "noise/pink"));
    generated["pink"] = detail::pink_noise(len, rng);
  }
  {
    Rng rng(derive_seed(spec.seed, "noise/babble"));
    generated["babble"] = detail::babble_noise(len, spec.sample_rate, babble_pool, rng);
  }
  {
    Rng rng(derive_seed(spec.seed, "noise/hum"));
    generated["hum"] = detail::hum_noise(len, spec.sample_rate, rng);
  }

  std::ofstream mapping(families_file(dir), std::ios::binary);
  if (!mapping) throw DataError("noise bank: cannot write " + families_file(dir));
  for (const auto& [family, samples] : generated) {
    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples = samples;
    std::string name = family + ".wav";
    write_wav((fs::path(dir) / name).string(), clip);
    mapping << family << '\t' << name << '\n';
  }
  mapping.close();
  return load_noise_bank(dir);
}

// Deterministic wav choice for an entry: utterances spread across a family's
// wavs by id hash (a single-wav family always yields that wav).
inline std::string pick_noise_wav(const NoiseBank& bank, const std::string& family,
                                  const std::string& utterance_id) {
  const std::vector<std::string>& wavs = bank.wavs_for(family);
  return wavs[fnv1a64(utterance_id) % wavs.size()];
}

}  // namespace nspeech
