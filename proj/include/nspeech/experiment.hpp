#pragma once

// Binds the flat configuration registry to the typed pipeline objects and
// provides the data-preparation step shared by the command-line tool and the
// experiment harness: synthesize (or load) the corpus and noise bank, build
// the split manifest, and write it under the output root.

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nspeech/architecture.hpp"
#include "nspeech/batch.hpp"
#include "nspeech/config.hpp"
#include "nspeech/fusion.hpp"
#include "nspeech/manifest.hpp"
#include "nspeech/model.hpp"
#include "nspeech/noise_bank.hpp"
#include "nspeech/splits.hpp"
#include "nspeech/synth.hpp"
#include "nspeech/train.hpp"

namespace nspeech {

inline ConfigRegistry default_config() {
  ConfigRegistry c;
  c.define("out.dir", "nspeech-out", "output root for generated data, checkpoints, and reports");

  c.define("corpus.dir", "", "isolated-word corpus directory; empty means <out.dir>/corpus");
  c.define("corpus.synthesize", "true",
           "synthesize the corpus when the directory is missing or empty");
  c.define("corpus.classes", "11", "number of word classes");
  c.define("corpus.utterances_per_class", "12", "tokens synthesized per class");
  c.define("corpus.sample_rate", "8000", "corpus sample rate in Hz");
  c.define("corpus.seed", "1", "seed for corpus synthesis");

  c.define("noise.dir", "", "noise bank directory; empty means <out.dir>/noise");
  c.define("noise.synthesize", "true",
           "generate the built-in noise families when the bank is missing");
  c.define("noise.duration_s", "12", "generated noise length in seconds");
  c.define("noise.seed", "1", "seed for noise generation");

  c.define("split.seed", "1", "seed for the train/test utterance split");
  c.define("split.test_utterances_per_class", "2", "utterances per class reserved for testing");
  c.define("split.families_a", "white,babble", "noise families of test set A (also train noise)");
  c.define("split.families_b", "pink,hum", "noise families of test set B (unseen in training)");
  c.define("split.families_c", "white,pink",
           "noise families of test set C (channel-mismatched)");
  c.define("split.train_snrs", "20,15,10,5", "SNRs used in multi-condition training");
  c.define("split.test_snrs", "20,15,10,5,0,-5", "SNRs used in every test set");

  c.define("stft.window_ms", "25", "analysis window length in milliseconds");
  c.define("stft.hop_ms", "10", "analysis hop in milliseconds");
  c.define("stft.fft_size", "512", "FFT length (power of two)");
  c.define("stft.log_floor", "-8", "log-magnitude floor");

  c.define("features.grid_frames", "128", "time frames after fitting to the model grid");
  c.define("features.grid_bins", "128", "frequency bins after fitting to the model grid");
  c.define("features.window", "11x31", "indeterminacy mean-filter window (odd TxF)");
  c.define("features.spec_scale", "0.125",
           "scale applied to (log magnitude - floor) on the spectrogram path");
  c.define("features.mix_seed", "1", "seed for noise-segment offsets when mixing");

  c.define("model.arch", "desk", "architecture: desk, table1, or a schedule file path");
  c.define("model.kind", "ncnn", "model kind: cnn (single path) or ncnn (dual path)");
  c.define("model.rule", "product", "posterior combination rule: sum, product, or maximum");
  c.define("model.seed", "1", "parameter initialization seed");

  c.define("train.split", "train_noisy", "training split: train_clean or train_noisy");
  c.define("train.batch_size", "32", "mini-batch size");
  c.define("train.max_iterations", "3000", "SGD steps (one mini-batch each)");
  c.define("train.learning_rate", "0.01", "initial learning rate");
  c.define("train.lr_decay", "0.5", "learning-rate factor applied every decay interval");
  c.define("train.lr_decay_every", "1000", "iterations between learning-rate decays");
  c.define("train.seed", "1", "seed for batch order and accuracy probes");
  c.define("train.accuracy_every", "100",
           "iterations between train-accuracy probes (0 disables)");
  c.define("train.overfit_subset", "0",
           "cap the training split to N seeded samples (0 = full split)");

  c.define("eval.jobs", "1", "worker threads for evaluation");

  c.define("sweep.window_sizes", "20x40,30x10,10x30,30x30",
           "window sizes swept by sweep-window (labels; mapped to nearest odd)");
  c.define("sweep.rules", "product,sum,maximum", "rules swept by sweep-combination");
  return c;
}

struct Experiment {
  std::string out_dir;
  std::string corpus_dir;
  bool corpus_synthesize = true;
  CorpusSpec corpus;
  std::string noise_dir;
  bool noise_synthesize = true;
  NoiseBankSpec noise;
  SplitPlan plan;
  FeatureConfig features;
  std::string arch_name;
  ArchitectureConfig arch;
  ModelKind kind = ModelKind::kNcnn;
  CombinationRule rule = CombinationRule::kProduct;
  uint64_t model_seed = 1;
  Split train_split = Split::kTrainNoisy;
  Hyperparams hp;
  uint64_t overfit_subset = 0;
  int jobs = 1;
  std::vector<std::string> sweep_window_sizes;
  std::vector<CombinationRule> sweep_rules;

  std::string manifest_path() const {
    return (std::filesystem::path(out_dir) / "manifest.tsv").string();
  }
  std::string models_dir() const { return (std::filesystem::path(out_dir) / "models").string(); }
  std::string reports_dir() const { return (std::filesystem::path(out_dir) / "reports").string(); }
};

inline Experiment experiment_from(const ConfigRegistry& c) {
  namespace fs = std::filesystem;
  Experiment e;
  e.out_dir = c.get("out.dir");
  if (e.out_dir.empty()) throw ConfigError("config: out.dir must not be empty");

  e.corpus_dir = c.get("corpus.dir").empty() ? (fs::path(e.out_dir) / "corpus").string()
                                             : c.get("corpus.dir");
  e.corpus_synthesize = c.get_bool("corpus.synthesize");
  e.corpus.class_count = static_cast<int>(c.get_int("corpus.classes"));
  e.corpus.utterances_per_class = static_cast<int>(c.get_int("corpus.utterances_per_class"));
  e.corpus.sample_rate = static_cast<int>(c.get_int("corpus.sample_rate"));
  e.corpus.seed = c.get_u64("corpus.seed");

  e.noise_dir =
      c.get("noise.dir").empty() ? (fs::path(e.out_dir) / "noise").string() : c.get("noise.dir");
  e.noise_synthesize = c.get_bool("noise.synthesize");
  e.noise.duration_s = c.get_double("noise.duration_s");
  e.noise.sample_rate = e.corpus.sample_rate;
  e.noise.seed = c.get_u64("noise.seed");

  e.plan.class_count = e.corpus.class_count;
  e.plan.seed = c.get_u64("split.seed");
  e.plan.test_utterances_per_class = static_cast<int>(c.get_int("split.test_utterances_per_class"));
  e.plan.families_a = c.get_list("split.families_a");
  e.plan.families_b = c.get_list("split.families_b");
  e.plan.families_c = c.get_list("split.families_c");
  e.plan.train_snrs = c.get_double_list("split.train_snrs");
  e.plan.test_snrs = c.get_double_list("split.test_snrs");

  e.features.stft.window_ms = c.get_double("stft.window_ms");
  e.features.stft.hop_ms = c.get_double("stft.hop_ms");
  e.features.stft.fft_size = static_cast<int>(c.get_int("stft.fft_size"));
  e.features.stft.log_floor = c.get_double("stft.log_floor");
  e.features.grid_frames = static_cast<int>(c.get_int("features.grid_frames"));
  e.features.grid_bins = static_cast<int>(c.get_int("features.grid_bins"));
  e.features.window = parse_ns_window(c.get("features.window"));
  e.features.spec_scale = c.get_double("features.spec_scale");
  e.features.mix_seed = c.get_u64("features.mix_seed");

  e.arch_name = c.get("model.arch");
  e.arch = load_architecture(e.arch_name);
  e.kind = parse_model_kind(c.get("model.kind"));
  e.rule = parse_combination_rule(c.get("model.rule"));
  e.model_seed = c.get_u64("model.seed");

  e.train_split = parse_split(c.get("train.split"));
  if (e.train_split != Split::kTrainClean && e.train_split != Split::kTrainNoisy)
    throw ConfigError("config: train.split must be train_clean or train_noisy");
  e.hp.batch_size = c.get_u64("train.batch_size");
  e.hp.max_iterations = c.get_u64("train.max_iterations");
  e.hp.learning_rate = c.get_double("train.learning_rate");
  e.hp.lr_decay = c.get_double("train.lr_decay");
  e.hp.lr_decay_every = c.get_u64("train.lr_decay_every");
  e.hp.seed = c.get_u64("train.seed");
  e.hp.accuracy_every = c.get_u64("train.accuracy_every");
  e.hp.ns_window = e.features.window;
  e.hp.rule = e.rule;
  e.overfit_subset = c.get_u64("train.overfit_subset");

  e.jobs = static_cast<int>(c.get_int("eval.jobs"));
  e.sweep_window_sizes = c.get_list("sweep.window_sizes");
  for (const std::string& r : c.get_list("sweep.rules"))
    e.sweep_rules.push_back(parse_combination_rule(r));

  e.hp.validate();
  e.features.validate();
  e.plan.validate();
  return e;
}

struct PreparedData {
  std::vector<CorpusItem> corpus;
  NoiseBank bank;
  std::vector<ManifestEntry> manifest;
};

namespace detail {
inline bool corpus_present(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) return false;
  for (const fs::directory_entry& d : fs::directory_iterator(dir))
    if (d.is_directory()) return true;
  return false;
}
}  // namespace detail

// Loads (or synthesizes) corpus and noise bank, builds the split manifest,
// and writes it to <out>/manifest.tsv. Deterministic: identical configs and
// seeds produce byte-identical corpora, banks, and manifests.
inline PreparedData prepare_data(const Experiment& e) {
  namespace fs = std::filesystem;
  fs::create_directories(e.out_dir);

  PreparedData data;
  if (detail::corpus_present(e.corpus_dir)) {
    data.corpus = load_corpus(e.corpus_dir);
  } else if (e.corpus_synthesize) {
    data.corpus = write_corpus(e.corpus_dir, e.corpus);
  } else {
    throw DataError("prepare: corpus directory missing or empty: " + e.corpus_dir);
  }

  if (fs::exists(families_file(e.noise_dir))) {
    data.bank = load_noise_bank(e.noise_dir);
  } else if (e.noise_synthesize) {
    data.bank = generate_noise_bank(e.noise_dir, data.corpus, e.noise);
  } else {
    throw DataError("prepare: noise bank missing: " + e.noise_dir);
  }

  data.manifest = build_splits(data.corpus, data.bank, e.plan);
  write_manifest(e.manifest_path(), data.manifest);
  return data;
}

// Seeded subset for overfitting sanity runs: shuffle the split once with a
// derived seed and keep the first n entries.
inline std::vector<ManifestEntry> overfit_subset(std::vector<ManifestEntry> entries, size_t n,
                                                 uint64_t seed) {
  if (n == 0 || n >= entries.size()) return entries;
  Rng rng(derive_seed(seed, "overfit"));
  rng.shuffle(entries);
  entries.resize(n);
  return entries;
}

// Per-split/noise/SNR counts, rendered for the prepare summary.
inline std::string split_summary(const std::vector<ManifestEntry>& manifest) {
  std::map<std::string, std::map<std::string, size_t>> counts;
  for (const ManifestEntry& e : manifest) {
    std::string condition =
        e.clean() ? "clean" : e.noise_type + " @ " + format_double(e.snr_db) + " dB";
    ++counts[split_name(e.split)][condition];
  }
  std::ostringstream out;
  out << "manifest entries: " << manifest.size() << "\n";
  for (const auto& [split, conditions] : counts) {
    size_t total = 0;
    for (const auto& [name, n] : conditions) total += n;
    out << "  " << split << " (" << total << ")\n";
    for (const auto& [name, n] : conditions) out << "    " << name << ": " << n << "\n";
  }
  return out.str();
}

// Config echo for report metadata.
inline std::vector<std::pair<std::string, std::string>> config_metadata(const ConfigRegistry& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : c.items()) out.emplace_back("config." + key, value);
  return out;
}

}  // namespace nspeech
