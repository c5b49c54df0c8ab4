#pragma once

// Evaluation with per-noise/per-SNR breakdown. Predictions are computed per
// utterance (embarrassingly parallel, each worker on its own model and
// feature-pipeline copy) and reduced in manifest order, so reports are
// independent of both utterance order and worker count. Marginal averages
// are unweighted means over noisy cells; the overall figure is the mean of
// the three per-set averages.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "nspeech/batch.hpp"
#include "nspeech/common.hpp"
#include "nspeech/manifest.hpp"
#include "nspeech/model.hpp"

namespace nspeech {

inline std::string test_set_name(Split s) {
  switch (s) {
    case Split::kTestA: return "A";
    case Split::kTestB: return "B";
    case Split::kTestC: return "C";
    default: return split_name(s);  // evaluating a training subset is allowed
  }
}

struct EvalCell {
  std::string model;            // "CNN" | "NCNN"
  std::string train_condition;  // "clean" | "noisy"
  std::string test_set;         // "A" | "B" | "C" (or a split name)
  std::string noise_type;       // family or "clean"
  double snr_db = 0.0;
  bool has_snr = false;
  size_t correct = 0;
  size_t total = 0;

  double accuracy() const {
    if (total == 0) throw DataError("eval: empty cell");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  }
  double wer() const { return 100.0 - accuracy(); }

  bool operator==(const EvalCell& o) const {
    return model == o.model && train_condition == o.train_condition && test_set == o.test_set &&
           noise_type == o.noise_type && has_snr == o.has_snr &&
           (!has_snr || snr_db == o.snr_db) && correct == o.correct && total == o.total;
  }
};

struct EvalReport {
  std::vector<EvalCell> cells;
  std::vector<std::pair<std::string, std::string>> metadata;  // ordered config echo

  void append(const EvalReport& other) {
    cells.insert(cells.end(), other.cells.begin(), other.cells.end());
    for (const auto& kv : other.metadata) {
      bool seen = false;
      for (const auto& mine : metadata) seen = seen || mine == kv;
      if (!seen) metadata.push_back(kv);
    }
  }

  // Mean accuracy over the noisy cells of one test set.
  double set_average(const std::string& model, const std::string& condition,
                     const std::string& test_set) const {
    double sum = 0.0;
    size_t n = 0;
    for (const EvalCell& c : cells) {
      if (c.model != model || c.train_condition != condition || c.test_set != test_set ||
          !c.has_snr)
        continue;
      sum += c.accuracy();
      ++n;
    }
    if (n == 0) throw DataError("eval: no noisy cells for set " + test_set);
    return sum / static_cast<double>(n);
  }

  // Mean of the three per-set averages.
  double overall_average(const std::string& model, const std::string& condition) const {
    double sum = 0.0;
    size_t n = 0;
    for (const std::string& set : test_sets(model, condition)) {
      sum += set_average(model, condition, set);
      ++n;
    }
    if (n == 0) throw DataError("eval: no test sets in report");
    return sum / static_cast<double>(n);
  }

  // Mean accuracy over all noisy cells at one SNR (the per-SNR analog used
  // for word-error-rate-by-SNR summaries).
  double snr_average(const std::string& model, const std::string& condition, double snr) const {
    double sum = 0.0;
    size_t n = 0;
    for (const EvalCell& c : cells) {
      if (c.model != model || c.train_condition != condition || !c.has_snr || c.snr_db != snr)
        continue;
      sum += c.accuracy();
      ++n;
    }
    if (n == 0) throw DataError("eval: no cells at SNR " + format_double(snr));
    return sum / static_cast<double>(n);
  }

  std::vector<std::string> test_sets(const std::string& model, const std::string& condition) const {
    std::vector<std::string> out;
    for (const EvalCell& c : cells) {
      if (c.model != model || c.train_condition != condition) continue;
      if (std::find(out.begin(), out.end(), c.test_set) == out.end()) out.push_back(c.test_set);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::pair<std::string, std::string>> model_conditions() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const EvalCell& c : cells) {
      std::pair<std::string, std::string> key{c.model, c.train_condition};
      if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
    }
    return out;
  }
};

struct EvalOptions {
  std::string model_name = "CNN";
  std::string train_condition = "clean";
  int jobs = 1;
};

inline EvalReport evaluate(const SpeechModel& model, const std::vector<ManifestEntry>& entries,
                           const FeatureExtractor& fx, const EvalOptions& opt) {
  if (entries.empty()) throw DataError("eval: no entries to evaluate");
  if (opt.jobs < 1) throw ConfigError("eval: jobs must be >= 1");
  const bool dual = model.kind() == ModelKind::kNcnn;

  // Per-utterance predictions, index-addressed so the reduction below is
  // independent of worker count and order.
  std::vector<size_t> predictions(entries.size(), 0);
  const size_t jobs = std::min<size_t>(opt.jobs, entries.size());
  auto worker = [&](size_t lo, size_t hi) {
    SpeechModel local_model = model;
    FeatureExtractor local_fx = fx;
    for (size_t i = lo; i < hi; ++i) {
      FeaturePair f = local_fx.features(entries[i]);
      predictions[i] = local_model.predict(f.spec, dual ? &f.ind : nullptr);
    }
  };
  if (jobs == 1) {
    worker(0, entries.size());
  } else {
    std::vector<std::thread> pool;
    const size_t chunk = (entries.size() + jobs - 1) / jobs;
    for (size_t j = 0; j < jobs; ++j) {
      size_t lo = j * chunk;
      size_t hi = std::min(entries.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (std::thread& t : pool) t.join();
  }

  // Deterministic reduction: cells keyed and ordered by (set, clean-first,
  // family, SNR descending).
  std::map<std::tuple<std::string, int, std::string, double>, EvalCell> cells;
  for (size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = entries[i];
    std::tuple<std::string, int, std::string, double> key{
        test_set_name(e.split), e.clean() ? 0 : 1, e.noise_type, e.has_snr ? -e.snr_db : 0.0};
    EvalCell& cell = cells[key];
    if (cell.total == 0) {
      cell.model = opt.model_name;
      cell.train_condition = opt.train_condition;
      cell.test_set = test_set_name(e.split);
      cell.noise_type = e.noise_type;
      cell.snr_db = e.snr_db;
      cell.has_snr = e.has_snr;
    }
    ++cell.total;
    if (predictions[i] == static_cast<size_t>(e.label)) ++cell.correct;
  }

  EvalReport report;
  for (const auto& [key, cell] : cells) report.cells.push_back(cell);
  return report;
}

}  // namespace nspeech
