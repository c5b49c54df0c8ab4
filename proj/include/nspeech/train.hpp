#pragma once

// Mini-batch SGD over a sample source. One iteration = one mini-batch step:
// gradients from each sample in the batch are accumulated by the model and
// applied once with the mean-gradient learning rate. The dual-path model
// trains jointly — a single cross-entropy on the fused posterior is
// backpropagated through the combination rule into both paths. The loop is
// fully deterministic given the hyperparameter seed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nspeech/batch.hpp"
#include "nspeech/common.hpp"
#include "nspeech/fusion.hpp"
#include "nspeech/layers.hpp"
#include "nspeech/model.hpp"
#include "nspeech/neutrosophic.hpp"

namespace nspeech {

struct Hyperparams {
  size_t batch_size = 32;
  size_t max_iterations = 3000;
  double learning_rate = 0.01;
  double lr_decay = 0.5;
  size_t lr_decay_every = 1000;
  uint64_t seed = 1;
  NsWindow ns_window{11, 31};
  CombinationRule rule = CombinationRule::kProduct;
  size_t accuracy_every = 100;     // 0 disables periodic train-accuracy probes
  size_t accuracy_sample_cap = 128;
  // Stop after the first probe at or above this accuracy (percent).
  // 0 disables early stopping; probes still follow accuracy_every.
  double stop_at_train_accuracy = 0.0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("hyperparams: batch_size must be positive");
    if (max_iterations < 1) throw ConfigError("hyperparams: max_iterations must be >= 1");
    if (learning_rate < 0.0) throw ConfigError("hyperparams: learning_rate must be >= 0");
    if (lr_decay <= 0.0) throw ConfigError("hyperparams: lr_decay must be positive");
    if (lr_decay_every < 1) throw ConfigError("hyperparams: lr_decay_every must be >= 1");
    if (stop_at_train_accuracy < 0.0 || stop_at_train_accuracy > 100.0)
      throw ConfigError("hyperparams: stop_at_train_accuracy must be in [0, 100]");
    ns_window.validate();
  }
};

struct TrainLogRow {
  size_t iteration = 0;  // 1-based, matches "iterations run" totals
  double loss = 0.0;
  double lr = 0.0;
  double train_accuracy = -1.0;  // percent; < 0 when not probed this iteration
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  size_t iterations_run = 0;
  double final_loss = 0.0;
};

inline double decayed_lr(const Hyperparams& hp, size_t iteration_index) {
  double lr = hp.learning_rate;
  for (size_t k = iteration_index / hp.lr_decay_every; k > 0; --k) lr *= hp.lr_decay;
  return lr;
}

// sample_at(i) materializes item i of the training split. The same index
// always yields the same features; order within the run is the only thing
// the epoch shuffle changes.
inline TrainResult train(SpeechModel& model,
                         const std::function<FeaturePair(size_t)>& sample_at, size_t item_count,
                         const Hyperparams& hp, std::ostream* progress = nullptr) {
  hp.validate();
  if (item_count == 0) throw DataError("train: empty split");

  const bool dual = model.kind() == ModelKind::kNcnn;
  std::vector<Tensor*> params = model.params();

  // Fixed, seeded probe subset for periodic train accuracy.
  std::vector<size_t> probe(item_count);
  for (size_t i = 0; i < probe.size(); ++i) probe[i] = i;
  {
    Rng rng(derive_seed(hp.seed, "train/probe"));
    rng.shuffle(probe);
  }
  if (probe.size() > hp.accuracy_sample_cap) probe.resize(hp.accuracy_sample_cap);

  auto probe_accuracy = [&]() {
    size_t correct = 0;
    for (size_t idx : probe) {
      FeaturePair f = sample_at(idx);
      size_t guess = model.predict(f.spec, dual ? &f.ind : nullptr);
      if (guess == static_cast<size_t>(f.label)) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(probe.size());
  };

  TrainResult out;
  out.log.reserve(hp.max_iterations);
  size_t iteration = 0;
  bool target_reached = false;
  for (size_t epoch = 0; iteration < hp.max_iterations && !target_reached; ++epoch) {
    std::vector<std::vector<size_t>> batches =
        epoch_batches(item_count, hp.batch_size, derive_seed(hp.seed, "train/order"), epoch);
    for (const std::vector<size_t>& batch : batches) {
      if (iteration >= hp.max_iterations || target_reached) break;
      const double lr = decayed_lr(hp, iteration);
      double loss_sum = 0.0;
      for (size_t idx : batch) {
        FeaturePair f = sample_at(idx);
        try {
          loss_sum += model.learn_sample(f.spec, dual ? &f.ind : nullptr,
                                         static_cast<size_t>(f.label));
        } catch (const NumericError& e) {
          throw NumericError("train: aborted at iteration " + std::to_string(iteration + 1) +
                             ": " + e.what());
        }
      }
      const double mean_loss = loss_sum / static_cast<double>(batch.size());
      if (!std::isfinite(mean_loss))
        throw NumericError("train: non-finite loss at iteration " + std::to_string(iteration + 1));
      sgd_step(params, lr / static_cast<double>(batch.size()));
      ++iteration;

      TrainLogRow row;
      row.iteration = iteration;
      row.loss = mean_loss;
      row.lr = lr;
      if (hp.accuracy_every > 0 &&
          (iteration % hp.accuracy_every == 0 || iteration == hp.max_iterations))
        row.train_accuracy = probe_accuracy();
      if (hp.stop_at_train_accuracy > 0.0 && row.train_accuracy >= hp.stop_at_train_accuracy)
        target_reached = true;
      out.log.push_back(row);
      if (progress && (row.train_accuracy >= 0.0 || iteration == 1)) {
        (*progress) << "iter " << iteration << "  loss " << format_double(mean_loss) << "  lr "
                    << format_double(lr);
        if (row.train_accuracy >= 0.0)
          (*progress) << "  train-acc " << format_double(row.train_accuracy) << "%";
        (*progress) << "\n";
      }
    }
  }
  out.iterations_run = iteration;
  out.final_loss = out.log.empty() ? 0.0 : out.log.back().loss;

  model.spec_path().set_iterations(static_cast<long long>(iteration));
  if (dual) model.ind_path().set_iterations(static_cast<long long>(iteration));
  return out;
}

// Convenience adapter: training straight from manifest entries through the
// feature pipeline. Splits of at most cache_cap items are materialized once
// up front; larger splits recompute features on demand (they are pure and
// seeded, so both paths yield identical numbers).
inline std::function<FeaturePair(size_t)> feature_source(std::vector<ManifestEntry> entries,
                                                         const FeatureExtractor& fx,
                                                         size_t cache_cap = 256) {
  if (entries.size() <= cache_cap) {
    auto cache = std::make_shared<std::vector<FeaturePair>>();
    cache->reserve(entries.size());
    for (const ManifestEntry& e : entries) cache->push_back(fx.features(e));
    return [cache](size_t i) { return (*cache)[i]; };
  }
  auto owned = std::make_shared<std::vector<ManifestEntry>>(std::move(entries));
  return [owned, &fx](size_t i) { return fx.features((*owned)[i]); };
}

inline TrainResult train(SpeechModel& model, const std::vector<ManifestEntry>& entries,
                         const FeatureExtractor& fx, const Hyperparams& hp,
                         std::ostream* progress = nullptr) {
  return train(model, feature_source(entries, fx), entries.size(), hp, progress);
}

// Training-log serialization: iteration, loss, lr, train-accuracy ('-' when
// not probed).
inline std::string emit_train_log(const TrainResult& result) {
  std::string out = "iteration\tloss\tlr\ttrain_accuracy\n";
  for (const TrainLogRow& row : result.log) {
    out += std::to_string(row.iteration);
    out += '\t';
    out += format_double(row.loss);
    out += '\t';
    out += format_double(row.lr);
    out += '\t';
    out += row.train_accuracy >= 0.0 ? format_double(row.train_accuracy) : std::string("-");
    out += '\n';
  }
  return out;
}

}  // namespace nspeech
