#pragma once

// Aurora-style split construction. Utterances are partitioned per class into
// train and test pools (seeded, disjoint). The training pools yield a
// clean-only split and a multi-condition split (clean plus test-set-A noise
// families at the four highest SNRs); each test set pairs its utterances with
// clean plus its two noise families at all six SNRs. The third test set
// reuses one family from each of A and B but is routed through a fixed
// channel filter by the feature pipeline.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/manifest.hpp"
#include "nspeech/noise_bank.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/synth.hpp"

namespace nspeech {

struct SplitPlan {
  int class_count = 11;
  int test_utterances_per_class = 2;
  std::vector<std::string> families_a{"white", "babble"};
  std::vector<std::string> families_b{"pink", "hum"};
  std::vector<std::string> families_c{"white", "pink"};
  std::vector<double> train_snrs{20.0, 15.0, 10.0, 5.0};
  std::vector<double> test_snrs{20.0, 15.0, 10.0, 5.0, 0.0, -5.0};
  uint64_t seed = 1;

  void validate() const {
    if (class_count < 2) throw ConfigError("split plan: need at least 2 classes");
    if (test_utterances_per_class < 1)
      throw ConfigError("split plan: need at least 1 test utterance per class");
    if (families_a.size() < 2 || families_b.size() < 2)
      throw ConfigError("split plan: test sets A and B each need at least 2 noise families");
    if (families_c.empty()) throw ConfigError("split plan: test set C needs noise families");
    std::set<std::string> a(families_a.begin(), families_a.end());
    std::set<std::string> b(families_b.begin(), families_b.end());
    std::set<std::string> ab;
    ab.insert(a.begin(), a.end());
    ab.insert(b.begin(), b.end());
    if (a.size() != families_a.size() || b.size() != families_b.size())
      throw ConfigError("split plan: duplicate family within a test set");
    for (const std::string& fam : families_a)
      if (b.count(fam)) throw ConfigError("split plan: families of A and B overlap on '" + fam + "'");
    for (const std::string& fam : families_c)
      if (!ab.count(fam))
        throw ConfigError("split plan: C family '" + fam + "' is not drawn from A or B");
    if (train_snrs.empty() || test_snrs.empty()) throw ConfigError("split plan: empty SNR list");
    for (double s : train_snrs)
      if (!snr_allowed(s)) throw ConfigError("split plan: train SNR outside grid");
    for (double s : test_snrs)
      if (!snr_allowed(s)) throw ConfigError("split plan: test SNR outside grid");
  }
};

namespace detail {

inline void append_conditions(std::vector<ManifestEntry>& out, const CorpusItem& item, Split split,
                              const std::vector<std::string>& families,
                              const std::vector<double>& snrs, bool include_clean) {
  ManifestEntry base;
  base.utterance_id = item.utterance_id;
  base.audio_path = item.audio_path;
  base.label = item.label;
  base.split = split;
  if (include_clean) out.push_back(base);
  for (const std::string& family : families) {
    for (double snr : snrs) {
      ManifestEntry e = base;
      e.noise_type = family;
      e.snr_db = snr;
      e.has_snr = true;
      out.push_back(e);
    }
  }
}

}  // namespace detail

inline std::vector<ManifestEntry> build_splits(const std::vector<CorpusItem>& corpus,
                                               const NoiseBank& bank, const SplitPlan& plan) {
  plan.validate();

  std::map<int, std::vector<CorpusItem>> by_label;
  for (const CorpusItem& item : corpus) by_label[item.label].push_back(item);
  if (static_cast<int>(by_label.size()) < plan.class_count)
    throw DataError("split: corpus has " + std::to_string(by_label.size()) +
                    " classes, plan needs " + std::to_string(plan.class_count));
  for (const auto& [label, items] : by_label)
    if (label < 0 || label >= plan.class_count)
      throw DataError("split: corpus label " + std::to_string(label) + " outside plan range");

  // Every family the plan references must be non-empty in the bank.
  for (const std::vector<std::string>* fams : {&plan.families_a, &plan.families_b, &plan.families_c})
    for (const std::string& fam : *fams) bank.wavs_for(fam);

  std::vector<CorpusItem> train_pool;
  std::vector<CorpusItem> test_pool;
  for (auto& [label, items] : by_label) {
    if (static_cast<int>(items.size()) <= plan.test_utterances_per_class)
      throw DataError("split: class " + std::to_string(label) +
                      " has too few utterances to reserve " +
                      std::to_string(plan.test_utterances_per_class) + " for test");
    std::sort(items.begin(), items.end(),
              [](const CorpusItem& x, const CorpusItem& y) { return x.utterance_id < y.utterance_id; });
    Rng rng(derive_seed(plan.seed, "split/class/" + std::to_string(label)));
    rng.shuffle(items);
    for (size_t i = 0; i < items.size(); ++i) {
      if (i < static_cast<size_t>(plan.test_utterances_per_class)) test_pool.push_back(items[i]);
      else train_pool.push_back(items[i]);
    }
  }
  auto by_id = [](const CorpusItem& x, const CorpusItem& y) {
    return x.utterance_id < y.utterance_id;
  };
  std::sort(train_pool.begin(), train_pool.end(), by_id);
  std::sort(test_pool.begin(), test_pool.end(), by_id);

  std::vector<ManifestEntry> out;
  for (const CorpusItem& item : train_pool)
    detail::append_conditions(out, item, Split::kTrainClean, {}, {}, true);
  for (const CorpusItem& item : train_pool)
    detail::append_conditions(out, item, Split::kTrainNoisy, plan.families_a, plan.train_snrs,
                              true);
  for (const CorpusItem& item : test_pool)
    detail::append_conditions(out, item, Split::kTestA, plan.families_a, plan.test_snrs, true);
  for (const CorpusItem& item : test_pool)
    detail::append_conditions(out, item, Split::kTestB, plan.families_b, plan.test_snrs, true);
  for (const CorpusItem& item : test_pool)
    detail::append_conditions(out, item, Split::kTestC, plan.families_c, plan.test_snrs, true);
  for (const ManifestEntry& e : out) e.validate();
  return out;
}

}  // namespace nspeech
