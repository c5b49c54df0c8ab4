#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nspeech/config.hpp"
#include "nspeech/evaluate.hpp"
#include "nspeech/experiment.hpp"
#include "nspeech/report_io.hpp"
#include "nspeech/sweeps.hpp"
#include "nspeech/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace nspeech;

namespace {

fs::path temp_dir(const std::string& leaf) {
  fs::path d = fs::temp_directory_path() / "nspeech_test_harness" / leaf;
  fs::create_directories(d);
  return d;
}

const char* kTinyArch = R"(arch tiny32
input 32x32x1
classes 11
conv k=5x5 n=8 s=2x2 p=2x2 act=tanh
pool k=2x2 s=2x2 mode=ceil
conv k=3x3 n=16 s=1x1 p=1x1 act=tanh
pool k=2x2 s=2x2 mode=ceil
fc n=32 act=relu
fc n=11 act=none
)";

// Small but real end-to-end world: 11 classes x 3 utterances, generated
// noise bank, full split manifest, 32x32 feature grid.
struct HarnessWorld {
  std::vector<CorpusItem> corpus;
  NoiseBank bank;
  SplitPlan plan;
  std::vector<ManifestEntry> manifest;
  FeatureConfig features;
  ArchitectureConfig arch;
};

const HarnessWorld& world() {
  static const HarnessWorld w = [] {
    HarnessWorld out;
    CorpusSpec cs;
    cs.utterances_per_class = 3;
    cs.seed = 7;
    out.corpus = write_corpus(temp_dir("corpus").string(), cs);
    NoiseBankSpec ns;
    ns.duration_s = 3.0;
    ns.seed = 9;
    out.bank = generate_noise_bank(temp_dir("noise").string(), out.corpus, ns);
    out.plan.seed = 11;
    out.plan.test_utterances_per_class = 1;
    out.manifest = build_splits(out.corpus, out.bank, out.plan);
    out.features.grid_frames = 32;
    out.features.grid_bins = 32;
    out.features.window = NsWindow{5, 9};
    out.features.mix_seed = 13;
    out.arch = parse_architecture_text(kTinyArch, "test");
    return out;
  }();
  return w;
}

// Synthetic in-memory dataset for exercising the training loop without the
// audio pipeline.
struct ToyData {
  std::vector<FeaturePair> items;
  std::function<FeaturePair(size_t)> source() const {
    const std::vector<FeaturePair>* p = &items;
    return [p](size_t i) { return (*p)[i]; };
  }
};

ToyData toy_data(size_t per_class, uint64_t seed) {
  Rng rng(seed);
  ToyData out;
  for (int label = 0; label < 3; ++label) {
    for (size_t k = 0; k < per_class; ++k) {
      FeaturePair f;
      f.spec = oracle::random_tensor(rng, {8, 8, 1}, 0.0, 1.0);
      f.ind = oracle::random_tensor(rng, {8, 8, 1}, 0.0, 2.0);
      f.label = label;
      f.utterance_id = "toy_" + std::to_string(label) + "_" + std::to_string(k);
      out.items.push_back(std::move(f));
    }
  }
  return out;
}

const char* kMiniArch = R"(arch mini
input 8x8x1
classes 3
conv k=3x3 n=2 s=1x1 p=1x1 act=tanh
pool k=2x2 s=2x2 mode=ceil
conv k=3x3 n=3 s=1x1 p=0x0 act=tanh
fc n=4 act=relu
fc n=3 act=none
)";

std::vector<double> snapshot(SpeechModel& m) {
  std::vector<double> out;
  for (Tensor* t : m.params()) out.insert(out.end(), t->v.begin(), t->v.end());
  return out;
}

}  // namespace

// --- configuration registry ---

TEST(Config, DefinesResolvesAndRejectsUnknownKeys) {
  ConfigRegistry c = default_config();
  EXPECT_EQ(c.get_int("train.batch_size"), 32);
  EXPECT_EQ(c.get_int("train.max_iterations"), 3000);
  EXPECT_DOUBLE_EQ(c.get_double("train.learning_rate"), 0.01);
  EXPECT_DOUBLE_EQ(c.get_double("train.lr_decay"), 0.5);
  EXPECT_EQ(c.get_int("train.lr_decay_every"), 1000);
  EXPECT_TRUE(c.get_bool("corpus.synthesize"));
  EXPECT_EQ(c.get_list("split.families_a"), (std::vector<std::string>{"white", "babble"}));
  EXPECT_EQ(c.get_double_list("split.test_snrs"),
            (std::vector<double>{20, 15, 10, 5, 0, -5}));

  c.apply_override("train.batch_size=8");
  EXPECT_EQ(c.get_int("train.batch_size"), 8);
  EXPECT_THROW(c.apply_override("train.batchsize=8"), ConfigError);
  EXPECT_THROW(c.apply_override("no-equals-sign"), ConfigError);
  EXPECT_THROW(c.get("ghost.key"), ConfigError);
  EXPECT_THROW(c.get_int("model.arch"), ConfigError);

  // Help enumerates every key with its default; provenance echoes sources.
  std::string help = c.help();
  for (const auto& [key, value] : c.items()) EXPECT_NE(help.find(key), std::string::npos) << key;
  EXPECT_NE(help.find("(default: 3000)"), std::string::npos);
  std::string prov = c.provenance();
  EXPECT_NE(prov.find("train.batch_size = 8  [override]"), std::string::npos);
  EXPECT_NE(prov.find("train.learning_rate = 0.01  [default]"), std::string::npos);
}

TEST(Config, LoadsFilesAndReportsBadLines) {
  fs::path p = temp_dir("config") / "exp.conf";
  std::ofstream(p) << "# comment\n"
                   << "train.max_iterations = 42\n"
                   << "model.rule = sum\n";
  ConfigRegistry c = default_config();
  c.load_file(p.string());
  EXPECT_EQ(c.get_int("train.max_iterations"), 42);
  EXPECT_EQ(c.get("model.rule"), "sum");
  EXPECT_NE(c.provenance().find("train.max_iterations = 42  [" + p.string() + "]"),
            std::string::npos);

  fs::path bad = temp_dir("config") / "bad.conf";
  std::ofstream(bad) << "train.max_iterations = 42\nmystery.key = 1\n";
  ConfigRegistry c2 = default_config();
  try {
    c2.load_file(bad.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("mystery.key"), std::string::npos);
  }
  EXPECT_THROW(c2.load_file("/nonexistent.conf"), ConfigError);
}

TEST(Config, ExperimentMaterializesTypedObjects) {
  ConfigRegistry c = default_config();
  c.apply_override("out.dir=" + temp_dir("exp").string());
  c.apply_override("features.window=5x9");
  c.apply_override("model.kind=cnn");
  c.apply_override("train.split=train_clean");
  Experiment e = experiment_from(c);
  EXPECT_EQ(e.features.window.t, 5);
  EXPECT_EQ(e.features.window.f, 9);
  EXPECT_EQ(e.kind, ModelKind::kCnn);
  EXPECT_EQ(e.train_split, Split::kTrainClean);
  EXPECT_EQ(e.arch.name, "desk");
  EXPECT_EQ(e.hp.max_iterations, 3000u);
  EXPECT_EQ(e.sweep_window_sizes.size(), 4u);

  c.apply_override("train.split=test_A");
  EXPECT_THROW(experiment_from(c), ConfigError);
  c.apply_override("train.split=train_noisy");
  c.apply_override("features.window=4x8");  // even window
  EXPECT_THROW(experiment_from(c), ConfigError);
}

// --- training loop ---

TEST(Train, ZeroLearningRateLeavesParametersBitExact) {
  ToyData data = toy_data(2, 401);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  SpeechModel m(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  std::vector<double> before = snapshot(m);

  Hyperparams hp;
  hp.batch_size = 4;
  hp.max_iterations = 3;
  hp.learning_rate = 0.0;
  hp.accuracy_every = 0;
  TrainResult r = train(m, data.source(), data.items.size(), hp);
  EXPECT_EQ(r.iterations_run, 3u);
  EXPECT_EQ(snapshot(m), before);
}

TEST(Train, IdenticalSeedsGiveIdenticalLossCurves) {
  ToyData data = toy_data(2, 402);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  Hyperparams hp;
  hp.batch_size = 3;
  hp.max_iterations = 8;
  hp.learning_rate = 0.02;
  hp.accuracy_every = 0;
  hp.seed = 77;

  SpeechModel a(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  SpeechModel b(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  TrainResult ra = train(a, data.source(), data.items.size(), hp);
  TrainResult rb = train(b, data.source(), data.items.size(), hp);
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].loss, rb.log[i].loss) << "iteration " << i;
    EXPECT_EQ(ra.log[i].lr, rb.log[i].lr);
  }
  EXPECT_EQ(snapshot(a), snapshot(b));

  // A different batch-order seed changes the curve.
  SpeechModel c(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  Hyperparams hp2 = hp;
  hp2.seed = 78;
  TrainResult rc = train(c, data.source(), data.items.size(), hp2);
  bool any_diff = false;
  for (size_t i = 0; i < ra.log.size(); ++i) any_diff = any_diff || rc.log[i].loss != ra.log[i].loss;
  EXPECT_TRUE(any_diff);
}

TEST(Train, OverfitsAToySetWithSmoothlyFallingLoss) {
  ToyData data = toy_data(2, 403);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  SpeechModel m(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  Hyperparams hp;
  hp.batch_size = 6;
  hp.max_iterations = 120;
  hp.learning_rate = 0.05;
  hp.accuracy_every = 40;

  TrainResult r = train(m, data.source(), data.items.size(), hp);
  ASSERT_EQ(r.log.size(), 120u);
  EXPECT_EQ(r.log.back().train_accuracy, 100.0);
  EXPECT_LT(r.final_loss, 0.1);
  EXPECT_GT(r.log.front().loss, r.final_loss);

  // Windowed means (20 iterations) never rise by more than 5%.
  std::vector<double> window_means;
  for (size_t start = 0; start + 20 <= r.log.size(); start += 20) {
    double sum = 0.0;
    for (size_t i = start; i < start + 20; ++i) sum += r.log[i].loss;
    window_means.push_back(sum / 20.0);
  }
  for (size_t k = 1; k < window_means.size(); ++k)
    EXPECT_LE(window_means[k], window_means[k - 1] * 1.05 + 1e-9) << "window " << k;

  // The trained model predicts every toy sample correctly.
  for (const FeaturePair& f : data.items)
    EXPECT_EQ(m.predict(f.spec, &f.ind), static_cast<size_t>(f.label));
}

TEST(Train, StopsEarlyOnceProbeHitsTarget) {
  ToyData data = toy_data(2, 406);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  SpeechModel m(ModelKind::kNcnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  Hyperparams hp;
  hp.batch_size = 6;
  hp.max_iterations = 400;
  hp.learning_rate = 0.05;
  hp.accuracy_every = 10;
  hp.stop_at_train_accuracy = 100.0;

  TrainResult r = train(m, data.source(), data.items.size(), hp);
  EXPECT_LT(r.iterations_run, 400u);
  EXPECT_EQ(r.iterations_run % 10, 0u);  // stops only at probe iterations
  EXPECT_EQ(r.log.back().train_accuracy, 100.0);

  Hyperparams bad = hp;
  bad.stop_at_train_accuracy = 101.0;
  EXPECT_THROW(train(m, data.source(), data.items.size(), bad), ConfigError);
}

TEST(Train, AbortsOnNonFiniteLossWithIterationInMessage) {
  ToyData data = toy_data(1, 404);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  SpeechModel m(ModelKind::kCnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  // Poison the final layer's bias: a NaN logit makes the very first loss
  // non-finite. (NaN deeper in the stack can be masked by max-pool/ReLU,
  // whose comparisons never select NaN.)
  m.params().back()->v[0] = std::numeric_limits<double>::quiet_NaN();
  Hyperparams hp;
  hp.batch_size = 3;
  hp.max_iterations = 4;
  hp.accuracy_every = 0;
  try {
    train(m, data.source(), data.items.size(), hp);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsEmptySplitsAndBadHyperparams) {
  ToyData data = toy_data(1, 405);
  ArchitectureConfig arch = parse_architecture_text(kMiniArch, "test");
  SpeechModel m(ModelKind::kCnn, arch, CombinationRule::kProduct, NsWindow{3, 3}, 5);
  Hyperparams hp;
  EXPECT_THROW(train(m, data.source(), 0, hp), DataError);
  Hyperparams bad = hp;
  bad.max_iterations = 0;
  EXPECT_THROW(train(m, data.source(), data.items.size(), bad), ConfigError);
  bad = hp;
  bad.batch_size = 0;
  EXPECT_THROW(train(m, data.source(), data.items.size(), bad), ConfigError);
}

TEST(Train, LearningRateDecaysByStep) {
  Hyperparams hp;  // 0.01, x0.5 every 1000
  EXPECT_DOUBLE_EQ(decayed_lr(hp, 0), 0.01);
  EXPECT_DOUBLE_EQ(decayed_lr(hp, 999), 0.01);
  EXPECT_DOUBLE_EQ(decayed_lr(hp, 1000), 0.005);
  EXPECT_DOUBLE_EQ(decayed_lr(hp, 1999), 0.005);
  EXPECT_DOUBLE_EQ(decayed_lr(hp, 2000), 0.0025);
}

TEST(Train, LogSerializesWithDashForUnprobedAccuracy) {
  TrainResult r;
  r.log.push_back({1, 2.5, 0.01, -1.0});
  r.log.push_back({2, 1.25, 0.01, 62.5});
  std::string text = emit_train_log(r);
  EXPECT_EQ(text,
            "iteration\tloss\tlr\ttrain_accuracy\n"
            "1\t2.5\t0.01\t-\n"
            "2\t1.25\t0.01\t62.5\n");
}

TEST(Train, FeatureSourceCachingMatchesRecompute) {
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  std::vector<ManifestEntry> entries = filter_split(w.manifest, Split::kTrainClean);
  ASSERT_GE(entries.size(), 4u);
  entries.resize(4);
  auto cached = feature_source(entries, fx);          // caches: 4 <= cap
  auto direct = feature_source(entries, fx, 0);       // cap 0 forces recompute
  for (size_t i = 0; i < entries.size(); ++i) {
    EXPECT_EQ(cached(i).spec.v, direct(i).spec.v);
    EXPECT_EQ(cached(i).ind.v, direct(i).ind.v);
    EXPECT_EQ(cached(i).label, direct(i).label);
  }
}

// --- evaluation ---

TEST(Evaluate, ChanceLevelModelSitsAtChance) {
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kProduct, w.features.window, 21);

  // Zeroed final layers force uniform posteriors in both paths; prediction is
  // then always class 0, so a balanced cell scores exactly 100/11.
  for (std::vector<Tensor*> path : {m.spec_path().params(), m.ind_path().params()})
    for (size_t i = path.size() - 2; i < path.size(); ++i)
      for (double& x : path[i]->v) x = 0.0;

  std::vector<ManifestEntry> tests = filter_split(w.manifest, Split::kTestA);
  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "clean";
  EvalReport report = evaluate(m, tests, fx, opt);
  ASSERT_FALSE(report.cells.empty());
  for (const EvalCell& c : report.cells) {
    EXPECT_EQ(c.total, 11u);
    EXPECT_NEAR(c.accuracy(), 100.0 / 11.0, 1e-12);
  }
  EXPECT_NEAR(report.set_average("NCNN", "clean", "A"), 100.0 / 11.0, 1e-12);
}

TEST(Evaluate, MarginalsEqualCellMeansExactly) {
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kProduct, w.features.window, 23);
  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "noisy";
  std::vector<ManifestEntry> tests;
  for (const ManifestEntry& e : w.manifest)
    if (is_test_split(e.split)) tests.push_back(e);
  EvalReport report = evaluate(m, tests, fx, opt);

  // Independent recount: group accuracies per set, average, compare.
  for (const std::string& set : {"A", "B", "C"}) {
    double sum = 0.0;
    size_t n = 0;
    for (const EvalCell& c : report.cells)
      if (c.test_set == set && c.has_snr) {
        sum += 100.0 * c.correct / c.total;
        ++n;
      }
    ASSERT_GT(n, 0u);
    EXPECT_NEAR(report.set_average("NCNN", "noisy", set), sum / n, 1e-9);
  }
  double overall = (report.set_average("NCNN", "noisy", "A") +
                    report.set_average("NCNN", "noisy", "B") +
                    report.set_average("NCNN", "noisy", "C")) /
                   3.0;
  EXPECT_NEAR(report.overall_average("NCNN", "noisy"), overall, 1e-9);

  // Each set contributes clean + 2 families x 6 SNRs cells of 11 utterances.
  size_t set_a_cells = 0;
  for (const EvalCell& c : report.cells)
    if (c.test_set == "A") {
      EXPECT_EQ(c.total, 11u);
      ++set_a_cells;
    }
  EXPECT_EQ(set_a_cells, 13u);
}

TEST(Evaluate, OrderAndWorkerCountDoNotChangeTheReport) {
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kSum, w.features.window, 29);
  std::vector<ManifestEntry> tests = filter_split(w.manifest, Split::kTestA);
  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "clean";

  EvalReport base = evaluate(m, tests, fx, opt);

  std::vector<ManifestEntry> shuffled = tests;
  Rng rng(31);
  rng.shuffle(shuffled);
  EXPECT_EQ(evaluate(m, shuffled, fx, opt).cells, base.cells);

  EvalOptions parallel = opt;
  parallel.jobs = 3;
  EXPECT_EQ(evaluate(m, tests, fx, parallel).cells, base.cells);
}

TEST(Evaluate, TrainingSubsetAfterOverfitScoresNearPerfect) {
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  std::vector<ManifestEntry> entries = filter_split(w.manifest, Split::kTrainClean);
  ASSERT_EQ(entries.size(), 22u);

  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kProduct, w.features.window, 37);
  Hyperparams hp;
  hp.batch_size = 22;
  hp.max_iterations = 220;
  hp.learning_rate = 0.06;
  hp.lr_decay_every = 120;
  hp.accuracy_every = 55;
  TrainResult r = train(m, entries, fx, hp);
  EXPECT_GE(r.log.back().train_accuracy, 99.0);

  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "clean";
  EvalReport report = evaluate(m, entries, fx, opt);
  ASSERT_EQ(report.cells.size(), 1u);
  EXPECT_EQ(report.cells[0].test_set, "train_clean");
  EXPECT_GE(report.cells[0].accuracy(), 99.0);
}

TEST(Evaluate, PosteriorPipelineMatchesManualStageComposition) {
  // End-to-end trace: recompute one noisy entry's posteriors by calling the
  // pipeline stages directly and compare with the model's answer.
  const HarnessWorld& w = world();
  FeatureExtractor fx(w.bank, w.features);
  const ManifestEntry* entry = nullptr;
  for (const ManifestEntry& e : w.manifest)
    if (e.split == Split::kTestC && !e.clean()) {
      entry = &e;
      break;
    }
  ASSERT_NE(entry, nullptr);

  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kProduct, w.features.window, 41);
  FeaturePair f = fx.features(*entry);
  SamplePosteriors p = m.posteriors(f.spec, &f.ind);

  // Stage by stage: audio -> channel -> mix -> spectrogram -> fit -> maps.
  AudioClip clean = channel_mismatch(read_wav(entry->audio_path));
  AudioClip noise = channel_mismatch(read_wav(pick_noise_wav(w.bank, entry->noise_type,
                                                             entry->utterance_id)));
  Rng mix_rng(derive_seed(w.features.mix_seed, "mix/" + entry->utterance_id + "/" +
                                                   entry->noise_type + "/" +
                                                   format_double(entry->snr_db)));
  MixResult mixed = mix_noise(clean, noise, entry->snr_db, mix_rng);
  Spectrogram spec = fit_to_grid(spectrogram(mixed.mixed, w.features.stft), 32, 32);
  NeutrosophicMap ns = proposed_transform(spec, w.features.window);

  Tensor spec_in({32, 32, 1});
  for (size_t i = 0; i < spec.grid.v.size(); ++i)
    spec_in.v[i] = (spec.grid.v[i] - w.features.stft.log_floor) * w.features.spec_scale;
  Tensor ind_in({32, 32, 1});
  ind_in.v = ns.I.v;
  EXPECT_EQ(spec_in.v, f.spec.v);
  EXPECT_EQ(ind_in.v, f.ind.v);

  std::vector<double> pa = softmax(m.spec_path().forward(spec_in));
  std::vector<double> pb = softmax(m.ind_path().forward(ind_in));
  std::vector<double> fused = combine_posteriors(pa, pb, CombinationRule::kProduct);
  ASSERT_EQ(p.fused.size(), fused.size());
  for (size_t i = 0; i < fused.size(); ++i) {
    EXPECT_EQ(p.spec[i], pa[i]);
    EXPECT_EQ(p.ind[i], pb[i]);
    EXPECT_EQ(p.fused[i], fused[i]);
  }
}

// --- report artifacts ---

namespace {
EvalReport sample_report() {
  EvalReport r;
  r.metadata.emplace_back("config.train.seed", "3");
  r.metadata.emplace_back("checkpoint.hash", "deadbeef00112233");
  r.metadata.emplace_back("config.corpus.dir", "");  // empty values must survive
  auto cell = [](std::string set, std::string noise, double snr, bool has, size_t correct,
                 size_t total) {
    EvalCell c;
    c.model = "NCNN";
    c.train_condition = "noisy";
    c.test_set = std::move(set);
    c.noise_type = std::move(noise);
    c.snr_db = snr;
    c.has_snr = has;
    c.correct = correct;
    c.total = total;
    return c;
  };
  r.cells.push_back(cell("A", "clean", 0, false, 21, 22));
  r.cells.push_back(cell("A", "white", 20, true, 20, 22));
  r.cells.push_back(cell("A", "white", 5, true, 13, 22));
  r.cells.push_back(cell("A", "babble", 20, true, 18, 22));
  r.cells.push_back(cell("A", "babble", 5, true, 11, 22));
  r.cells.push_back(cell("B", "pink", 20, true, 17, 22));
  r.cells.push_back(cell("B", "pink", 5, true, 9, 22));
  r.cells.push_back(cell("B", "hum", 20, true, 19, 22));
  r.cells.push_back(cell("B", "hum", 5, true, 10, 22));
  r.cells.push_back(cell("C", "white", 20, true, 16, 22));
  r.cells.push_back(cell("C", "white", 5, true, 8, 22));
  r.cells.push_back(cell("C", "pink", 20, true, 15, 22));
  r.cells.push_back(cell("C", "pink", 5, true, 7, 22));
  return r;
}
}  // namespace

TEST(Report, CsvRoundTripsExactly) {
  EvalReport r = sample_report();
  std::string csv = emit_report_csv(r);
  EvalReport back = parse_report_csv(csv);
  EXPECT_EQ(back.cells, r.cells);
  EXPECT_EQ(back.metadata, r.metadata);
  EXPECT_EQ(emit_report_csv(back), csv);

  // Row count: one line per cell plus header plus metadata comments.
  size_t lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, r.cells.size() + 1 + r.metadata.size());
  EXPECT_NE(csv.find("model,train_condition,test_set,noise_type,snr_db,accuracy,n,wer"),
            std::string::npos);
  EXPECT_NE(csv.find("# checkpoint.hash = deadbeef00112233"), std::string::npos);

  fs::path p = temp_dir("report") / "r.csv";
  write_report_csv(p.string(), r);
  EXPECT_EQ(emit_report_csv(read_report_csv(p.string())), csv);
}

TEST(Report, WerColumnIsAccuracyComplement) {
  EvalReport r = sample_report();
  std::string csv = emit_report_csv(r);
  std::istringstream in(csv);
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("model,", 0) == 0) continue;
    std::vector<std::string> f = split(line, ',');
    ASSERT_EQ(f.size(), 8u);
    double acc = std::stod(f[5]);
    double wer = std::stod(f[7]);
    EXPECT_DOUBLE_EQ(wer, 100.0 - acc);
    ++rows;
  }
  EXPECT_EQ(rows, r.cells.size());
}

TEST(Report, ParserRejectsCorruptInput) {
  EvalReport r = sample_report();
  std::string csv = emit_report_csv(r);

  EXPECT_THROW(parse_report_csv("accuracy,n\n50,2\n"), DataError);
  EXPECT_THROW(parse_report_csv(""), DataError);

  std::string wrong_fields = csv;
  wrong_fields += "NCNN,noisy,A,white,20,50\n";
  EXPECT_THROW(parse_report_csv(wrong_fields), DataError);

  // Rewrite one data row so accuracy no longer matches correct/total (and
  // another so wer stops being the complement); the parser must balk.
  auto rewrite_field = [&](size_t field, const std::string& value) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    bool done = false;
    while (std::getline(in, line)) {
      if (!done && !line.empty() && line[0] != '#' && line.rfind("model,", 0) != 0) {
        std::vector<std::string> f = split(line, ',');
        f[field] = value;
        for (size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
        out << '\n';
        done = true;
        continue;
      }
      out << line << '\n';
    }
    return out.str();
  };
  EXPECT_THROW(parse_report_csv(rewrite_field(5, "17.5")), DataError);
  EXPECT_THROW(parse_report_csv(rewrite_field(7, "17.5")), DataError);
}

TEST(Report, TextTablesCarryGridsAveragesAndWerSummary) {
  EvalReport r = sample_report();
  std::string text = render_report_text(r);
  EXPECT_NE(text.find("== NCNN, noisy training, test set A (accuracy %) =="), std::string::npos);
  EXPECT_NE(text.find("white"), std::string::npos);
  EXPECT_NE(text.find("clean"), std::string::npos);

  // Set B average: mean of its four noisy cells.
  double expect_b = (100.0 * 17 / 22 + 100.0 * 9 / 22 + 100.0 * 19 / 22 + 100.0 * 10 / 22) / 4.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", expect_b);
  EXPECT_NE(text.find(std::string("set B: ") + buf), std::string::npos) << text;

  // WER at 20 dB: 100 - mean accuracy over the six 20 dB cells.
  double acc20 = (100.0 / 22) * (20 + 18 + 17 + 19 + 16 + 15) / 6.0;
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 - acc20);
  EXPECT_NE(text.find(std::string("20 dB: ") + buf), std::string::npos) << text;
  EXPECT_NE(text.find("word error rate by SNR"), std::string::npos);
}

// --- sweeps ---

TEST(Sweeps, SingleSizeSweepEqualsDirectRun) {
  const HarnessWorld& w = world();
  SweepContext ctx;
  ctx.manifest = w.manifest;
  ctx.bank = w.bank;
  ctx.features = w.features;
  ctx.arch = w.arch;
  ctx.hp.batch_size = 16;
  ctx.hp.max_iterations = 4;
  ctx.hp.learning_rate = 0.02;
  ctx.hp.accuracy_every = 0;
  ctx.hp.seed = 51;
  ctx.model_seed = 52;

  std::vector<WindowSweepRow> rows = sweep_window({"5x9"}, ctx);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].label, "5x9");
  EXPECT_EQ(rows[0].window.t, 5);
  EXPECT_EQ(rows[0].window.f, 9);

  // Direct run with the same seeds and settings.
  FeatureExtractor fx(w.bank, w.features);
  Hyperparams hp = ctx.hp;
  hp.ns_window = rows[0].window;
  SpeechModel m(ModelKind::kNcnn, w.arch, CombinationRule::kProduct, rows[0].window, 52);
  train(m, filter_split(w.manifest, Split::kTrainNoisy), fx, hp);
  std::vector<ManifestEntry> tests;
  for (const ManifestEntry& e : w.manifest)
    if (is_test_split(e.split)) tests.push_back(e);
  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "noisy";
  EvalReport direct = evaluate(m, tests, fx, opt);
  EXPECT_EQ(rows[0].report.cells, direct.cells);
  EXPECT_NEAR(rows[0].average, direct.overall_average("NCNN", "noisy"), 1e-12);
}

TEST(Sweeps, WindowLabelsKeepTheirOriginalSpelling) {
  const HarnessWorld& w = world();
  SweepContext ctx;
  ctx.manifest = w.manifest;
  ctx.bank = w.bank;
  ctx.features = w.features;
  ctx.arch = w.arch;
  ctx.hp.batch_size = 16;
  ctx.hp.max_iterations = 2;
  ctx.hp.accuracy_every = 0;

  std::vector<WindowSweepRow> rows = sweep_window({"4x8", "3x3"}, ctx);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].label, "4x8");
  EXPECT_EQ(rows[0].window.t, 5);  // nearest odd
  EXPECT_EQ(rows[0].window.f, 9);
  EXPECT_EQ(rows[1].label, "3x3");
  EXPECT_EQ(rows[1].window.t, 3);
  bool labeled = false;
  for (const auto& [k, v] : rows[0].report.metadata)
    labeled = labeled || (k == "sweep.window.label" && v == "4x8");
  EXPECT_TRUE(labeled);

  EXPECT_THROW(sweep_window({}, ctx), ConfigError);
  EXPECT_THROW(sweep_window({"5by9"}, ctx), ConfigError);
}

TEST(Sweeps, CombinationSweepReportsBothModes) {
  const HarnessWorld& w = world();
  SweepContext ctx;
  ctx.manifest = w.manifest;
  ctx.bank = w.bank;
  ctx.features = w.features;
  ctx.arch = w.arch;
  ctx.hp.batch_size = 16;
  ctx.hp.max_iterations = 2;
  ctx.hp.accuracy_every = 0;

  std::vector<CombinationSweepRow> rows =
      sweep_combination({CombinationRule::kSum, CombinationRule::kProduct}, ctx);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].mode, "shared");
  EXPECT_EQ(rows[1].mode, "shared");
  EXPECT_EQ(rows[2].mode, "per_rule");
  EXPECT_EQ(rows[3].mode, "per_rule");
  EXPECT_EQ(rows[0].rule, CombinationRule::kSum);
  EXPECT_EQ(rows[2].rule, CombinationRule::kSum);
  for (const CombinationSweepRow& row : rows) {
    EXPECT_GE(row.average, 0.0);
    EXPECT_LE(row.average, 100.0);
    bool mode_tagged = false;
    for (const auto& [k, v] : row.report.metadata)
      mode_tagged = mode_tagged || (k == "sweep.combination.mode" && v == row.mode);
    EXPECT_TRUE(mode_tagged);
  }
}

// --- experiment assembly ---

TEST(Experiment, PrepareIsDeterministicAndWritesManifest) {
  ConfigRegistry c = default_config();
  fs::path out = temp_dir("exp_prepare");
  c.apply_override("out.dir=" + out.string());
  c.apply_override("corpus.utterances_per_class=3");
  c.apply_override("noise.duration_s=3");
  Experiment e = experiment_from(c);

  PreparedData first = prepare_data(e);
  uint64_t h1 = manifest_content_hash(first.manifest);
  EXPECT_TRUE(fs::exists(e.manifest_path()));

  PreparedData second = prepare_data(e);
  EXPECT_EQ(manifest_content_hash(second.manifest), h1);
  EXPECT_EQ(emit_manifest(second.manifest), emit_manifest(first.manifest));

  std::string summary = split_summary(first.manifest);
  EXPECT_NE(summary.find("train_noisy"), std::string::npos);
  EXPECT_NE(summary.find("white @ 20 dB"), std::string::npos);

  // Missing corpus without synthesis permission: data error naming the path.
  ConfigRegistry c2 = default_config();
  c2.apply_override("out.dir=" + (out / "empty").string());
  c2.apply_override("corpus.synthesize=false");
  Experiment e2 = experiment_from(c2);
  try {
    prepare_data(e2);
    FAIL() << "expected DataError";
  } catch (const DataError& err) {
    EXPECT_NE(std::string(err.what()).find(e2.corpus_dir), std::string::npos);
  }
}

TEST(Experiment, OverfitSubsetIsSeededAndCapped) {
  const HarnessWorld& w = world();
  std::vector<ManifestEntry> clean = filter_split(w.manifest, Split::kTrainClean);
  std::vector<ManifestEntry> sub = overfit_subset(clean, 8, 3);
  ASSERT_EQ(sub.size(), 8u);
  EXPECT_EQ(emit_manifest(overfit_subset(clean, 8, 3)), emit_manifest(sub));
  EXPECT_NE(emit_manifest(overfit_subset(clean, 8, 4)), emit_manifest(sub));
  EXPECT_EQ(overfit_subset(clean, 0, 3).size(), clean.size());
  EXPECT_EQ(overfit_subset(clean, 500, 3).size(), clean.size());
}
