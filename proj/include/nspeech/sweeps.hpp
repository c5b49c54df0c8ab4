#pragma once

// The two experiment sweeps: indeterminacy-window size and combination rule.
// Each sweep trains/evaluates dual-path models that share every setting
// except the swept one. Window labels are reported exactly as requested
// (e.g. "20x40") while the pipeline runs on the nearest odd window sizes the
// mean filter requires. The combination sweep reports two modes, because a
// single jointly-trained checkpoint can either be re-fused under each rule
// ("shared") or retrained per rule ("per_rule").

#include <charconv>
#include <string>
#include <utility>
#include <vector>

#include "nspeech/architecture.hpp"
#include "nspeech/batch.hpp"
#include "nspeech/evaluate.hpp"
#include "nspeech/manifest.hpp"
#include "nspeech/model.hpp"
#include "nspeech/noise_bank.hpp"
#include "nspeech/train.hpp"

namespace nspeech {

struct SweepContext {
  std::vector<ManifestEntry> manifest;
  NoiseBank bank;
  FeatureConfig features;
  ArchitectureConfig arch;
  Hyperparams hp;
  uint64_t model_seed = 1;
  Split train_split = Split::kTrainNoisy;
  int jobs = 1;
};

namespace detail {

inline std::pair<int, int> parse_size_label(const std::string& label) {
  size_t x = label.find('x');
  if (x == std::string::npos)
    throw ConfigError("sweep: window size must look like TxF, got '" + label + "'");
  int t = 0, f = 0;
  auto [pt, et] = std::from_chars(label.data(), label.data() + x, t);
  auto [pf, ef] = std::from_chars(label.data() + x + 1, label.data() + label.size(), f);
  if (et != std::errc() || ef != std::errc() || pt != label.data() + x ||
      pf != label.data() + label.size() || t < 1 || f < 1)
    throw ConfigError("sweep: window size must look like TxF, got '" + label + "'");
  return {t, f};
}

inline std::vector<ManifestEntry> test_entries(const std::vector<ManifestEntry>& manifest) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : manifest)
    if (is_test_split(e.split)) out.push_back(e);
  return out;
}

// Train one dual-path model under the given window/rule and evaluate it on
// all three test sets.
inline std::pair<EvalReport, TrainResult> run_one(const SweepContext& ctx, NsWindow window,
                                                  CombinationRule rule) {
  FeatureConfig features = ctx.features;
  features.window = window;
  FeatureExtractor fx(ctx.bank, features);

  Hyperparams hp = ctx.hp;
  hp.ns_window = window;
  hp.rule = rule;

  SpeechModel model(ModelKind::kNcnn, ctx.arch, rule, window, ctx.model_seed);
  TrainResult log = train(model, filter_split(ctx.manifest, ctx.train_split), fx, hp);

  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = ctx.train_split == Split::kTrainClean ? "clean" : "noisy";
  opt.jobs = ctx.jobs;
  EvalReport report = evaluate(model, test_entries(ctx.manifest), fx, opt);
  return {std::move(report), std::move(log)};
}

}  // namespace detail

// Window-size sweep: "20x40" is mapped to the nearest odd sizes for the run
// but keeps its original label in the report.
struct WindowSweepRow {
  std::string label;
  NsWindow window;
  EvalReport report;
  double average = 0.0;  // overall NCNN average under this window
};

inline std::vector<WindowSweepRow> sweep_window(const std::vector<std::string>& size_labels,
                                                const SweepContext& ctx) {
  if (size_labels.empty()) throw ConfigError("sweep: no window sizes given");
  std::vector<WindowSweepRow> rows;
  for (const std::string& label : size_labels) {
    auto [t, f] = detail::parse_size_label(label);
    WindowSweepRow row;
    row.label = label;
    row.window = nearest_odd_window(t, f);
    auto [report, log] = detail::run_one(ctx, row.window, ctx.hp.rule);
    row.report = std::move(report);
    row.report.metadata.emplace_back("sweep.window.label", label);
    row.report.metadata.emplace_back(
        "sweep.window.used", std::to_string(row.window.t) + "x" + std::to_string(row.window.f));
    row.average = row.report.overall_average("NCNN",
                                             ctx.train_split == Split::kTrainClean ? "clean"
                                                                                   : "noisy");
    rows.push_back(std::move(row));
  }
  return rows;
}

// Combination-rule sweep, both modes: one product-trained checkpoint re-fused
// under every rule, and one freshly trained checkpoint per rule.
struct CombinationSweepRow {
  std::string mode;  // "shared" | "per_rule"
  CombinationRule rule = CombinationRule::kProduct;
  EvalReport report;
  double average = 0.0;
};

inline std::vector<CombinationSweepRow> sweep_combination(
    const std::vector<CombinationRule>& rules, const SweepContext& ctx) {
  if (rules.empty()) throw ConfigError("sweep: no combination rules given");
  const std::string condition =
      ctx.train_split == Split::kTrainClean ? "clean" : "noisy";
  std::vector<CombinationSweepRow> rows;

  // Shared-checkpoint mode: train jointly under the product rule once, swap
  // the fusion rule at evaluation time.
  {
    FeatureConfig features = ctx.features;
    FeatureExtractor fx(ctx.bank, features);
    Hyperparams hp = ctx.hp;
    hp.rule = CombinationRule::kProduct;
    SpeechModel model(ModelKind::kNcnn, ctx.arch, CombinationRule::kProduct, features.window,
                      ctx.model_seed);
    train(model, filter_split(ctx.manifest, ctx.train_split), fx, hp);
    for (CombinationRule rule : rules) {
      model.set_rule(rule);
      EvalOptions opt;
      opt.model_name = "NCNN";
      opt.train_condition = condition;
      opt.jobs = ctx.jobs;
      CombinationSweepRow row;
      row.mode = "shared";
      row.rule = rule;
      row.report = evaluate(model, detail::test_entries(ctx.manifest), fx, opt);
      row.report.metadata.emplace_back("sweep.combination.mode", "shared");
      row.report.metadata.emplace_back("sweep.combination.rule", combination_rule_name(rule));
      row.average = row.report.overall_average("NCNN", condition);
      rows.push_back(std::move(row));
    }
  }

  // Per-rule mode: the training loss itself goes through each rule.
  for (CombinationRule rule : rules) {
    auto [report, log] = detail::run_one(ctx, ctx.features.window, rule);
    CombinationSweepRow row;
    row.mode = "per_rule";
    row.rule = rule;
    row.report = std::move(report);
    row.report.metadata.emplace_back("sweep.combination.mode", "per_rule");
    row.report.metadata.emplace_back("sweep.combination.rule", combination_rule_name(rule));
    row.average = row.report.overall_average("NCNN", condition);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nspeech
