// Acceptance gate for the toolkit. Runs ten checks spanning structural
// conformance, numerical property suites, and the desk-scale experiment
// matrix, printing one PASS/FAIL line per criterion. Criterion 9 is
// informational (reported, never gating). Exit code 0 iff all gated
// criteria pass.
//
// The experiment-scale knobs used by criteria 7-10 are pinned below and
// mirrored in configs/accept.conf.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nspeech/evaluate.hpp"
#include "nspeech/experiment.hpp"
#include "nspeech/gradcheck.hpp"
#include "nspeech/grid_io.hpp"
#include "nspeech/report_io.hpp"
#include "nspeech/sweeps.hpp"
#include "nspeech/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace nspeech;
using Clock = std::chrono::steady_clock;

namespace {

// ---- pinned experiment scale for criteria 7-10 (see configs/accept.conf) ----
// 3000 iterations is the published training length and matters here: the
// single-path model on the noisy split sits near chance for the first ~1000
// iterations before converging, so shorter matrix runs would compare a
// converged dual-path model against an undertrained baseline.
constexpr size_t kMainIterations = 3000;  // training length for the matrix runs
constexpr size_t kOverfitIterations = 3000;
constexpr size_t kOverfitSamples = 64;
constexpr size_t kOverfitProbeEvery = 25;
const uint64_t kMatrixSeeds[3] = {1, 2, 3};
constexpr size_t kFeatureCacheCap = 1024;  // covers the 990-entry noisy split

struct Criterion {
  int id = 0;
  std::string title;
  bool pass = false;
  bool soft = false;
  std::vector<std::string> detail;
  double seconds = 0.0;
};

struct RunKey {
  std::string str;  // "<kind>_<condition>_s<seed>"
};

struct RunArtifacts {
  double noisy_average = 0.0;
  std::string train_log;
  std::string report_csv;
};

struct AcceptContext {
  std::string out_dir;
  bool verbose = false;

  ConfigRegistry cfg = default_config();
  std::optional<Experiment> exp;
  std::optional<PreparedData> data;

  std::map<std::string, RunArtifacts> runs;
  std::optional<SpeechModel> shared_checkpoint;  // noisy seed-1 dual-path model
  std::map<std::string, double> condition_seconds;  // training+eval time per condition
  std::string overfit_log;                          // criterion 7's training log

  Experiment& experiment() {
    if (!exp) {
      cfg.set("out.dir", out_dir, "acceptance");
      cfg.set("train.max_iterations", std::to_string(kMainIterations), "acceptance");
      exp = experiment_from(cfg);
    }
    return *exp;
  }

  PreparedData& world() {
    Experiment& e = experiment();
    if (!data) {
      if (verbose) std::cout << "  [preparing corpus, noise bank, and manifest]\n";
      data = prepare_data(e);
      std::ofstream(fs::path(e.out_dir) / "accept.resolved.conf") << cfg.provenance();
    }
    return *data;
  }
};

std::vector<double> random_posterior(Rng& rng, size_t k) {
  std::vector<double> z(k);
  for (double& v : z) v = rng.uniform(-6.0, 6.0);
  return softmax(z);
}

std::string run_key(ModelKind kind, Split split, uint64_t seed) {
  return model_kind_name(kind) + "_" + (split == Split::kTrainClean ? "clean" : "noisy") + "_s" +
         std::to_string(seed);
}

std::vector<ManifestEntry> all_test_entries(const std::vector<ManifestEntry>& manifest) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : manifest)
    if (is_test_split(e.split)) out.push_back(e);
  return out;
}

// Trains one (kind, condition, seed) cell of the experiment matrix and
// evaluates it over all three test sets. Artifacts land under the output
// root; the caller receives the exact bytes for determinism comparisons.
RunArtifacts run_matrix_cell(AcceptContext& ctx, ModelKind kind, Split split, uint64_t seed,
                             CombinationRule rule = CombinationRule::kProduct) {
  Experiment& e = ctx.experiment();
  PreparedData& data = ctx.world();
  auto cell_start = Clock::now();
  const std::string key =
      run_key(kind, split, seed) +
      (rule == CombinationRule::kProduct ? "" : "_" + combination_rule_name(rule));

  std::vector<ManifestEntry> entries = filter_split(data.manifest, split);
  FeatureExtractor fx(data.bank, e.features);

  Hyperparams hp = e.hp;
  hp.seed = seed;
  hp.rule = rule;
  hp.max_iterations = kMainIterations;
  SpeechModel model(kind, e.arch, rule, e.features.window, seed);

  if (ctx.verbose)
    std::cout << "  [training " << key << ": " << entries.size() << " samples, "
              << hp.max_iterations << " iterations]\n";
  TrainResult tr = train(model, feature_source(entries, fx, kFeatureCacheCap), entries.size(), hp,
                         ctx.verbose ? &std::cout : nullptr);

  EvalOptions opt;
  opt.model_name = model.dual() ? "NCNN" : "CNN";
  opt.train_condition = split == Split::kTrainClean ? "clean" : "noisy";
  EvalReport report = evaluate(model, all_test_entries(data.manifest), fx, opt);
  report.metadata.emplace_back("checkpoint.stem", "accept_" + key);
  report.metadata.emplace_back("checkpoint.hash", hash_hex(model.content_hash()));
  report.metadata.emplace_back("train.seed", std::to_string(seed));
  for (auto& [k, v] : config_metadata(ctx.cfg)) report.metadata.emplace_back(k, v);

  RunArtifacts art;
  art.noisy_average = report.overall_average(opt.model_name, opt.train_condition);
  art.train_log = emit_train_log(tr);
  art.report_csv = emit_report_csv(report);

  fs::create_directories(e.models_dir());
  fs::create_directories(e.reports_dir());
  std::string stem = (fs::path(e.models_dir()) / ("accept_" + key)).string();
  model.save(stem);
  std::ofstream(stem + ".train.tsv") << art.train_log;
  std::ofstream(fs::path(e.reports_dir()) / ("accept_" + key + ".csv")) << art.report_csv;

  if (kind == ModelKind::kNcnn && split == Split::kTrainNoisy && seed == 1 &&
      rule == CombinationRule::kProduct && !ctx.shared_checkpoint)
    ctx.shared_checkpoint = model;
  ctx.condition_seconds[opt.train_condition] +=
      std::chrono::duration<double>(Clock::now() - cell_start).count();
  return art;
}

const RunArtifacts& matrix_cell(AcceptContext& ctx, ModelKind kind, Split split, uint64_t seed) {
  std::string key = run_key(kind, split, seed);
  auto it = ctx.runs.find(key);
  if (it == ctx.runs.end()) it = ctx.runs.emplace(key, run_matrix_cell(ctx, kind, split, seed)).first;
  return it->second;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// --- criterion 1: full-size schedule shape conformance ---

Criterion criterion_shapes(AcceptContext&) {
  Criterion c{1, "full-size schedule shape conformance"};
  std::vector<ShapeCheckRow> rows = table1_shape_check();

  // Rows with a consistent convention must match exactly: the first and
  // third convolutions and the whole FC chain.
  bool consistent = rows.size() == 11 && rows[0].match && rows[2].match && rows[4].match &&
                    rows[5].match && rows[6].match && rows[7].match && rows[8].match &&
                    rows[9].match && rows[10].match;
  c.detail.push_back("conv rows 185x295x64 and 93x147x64: " +
                     std::string(rows[0].match && rows[2].match ? "exact" : "MISMATCH"));
  c.detail.push_back("fc chain 384 -> 192 -> 11: " +
                     std::string(rows[8].match && rows[9].match && rows[10].match ? "exact"
                                                                                  : "MISMATCH"));

  // The two rounding-inconsistent pooling rows must be flagged, with both
  // candidates shown, and never silently corrected.
  auto flagged = [&](size_t i) {
    return !rows[i].match && rows[i].note.find("floor->") != std::string::npos &&
           rows[i].note.find("ceil->") != std::string::npos;
  };
  bool inconsistent_flagged = flagged(1) && flagged(3);
  c.detail.push_back("inconsistent pooling rows: " +
                     std::string(inconsistent_flagged ? "flagged with both candidates"
                                                      : "NOT FLAGGED"));
  if (inconsistent_flagged) {
    c.detail.push_back("  row 2 " + rows[1].note);
    c.detail.push_back("  row 4 " + rows[3].note);
  }
  c.pass = consistent && inconsistent_flagged;
  return c;
}

// --- criterion 2: gradient correctness ---

struct GradCase {
  std::string op;
  double max_rel = 0.0;
  size_t cases = 0;
  bool pass = true;
};

GradCase grad_conv(Rng& rng, size_t n_cases) {
  GradCase out{"conv2d"};
  for (size_t t = 0; t < n_cases; ++t) {
    const size_t H = 3 + rng.below(4), W = 3 + rng.below(4), C = 1 + rng.below(3);
    ConvSpec s;
    s.kernel_h = 1 + static_cast<int>(rng.below(3));
    s.kernel_w = 1 + static_cast<int>(rng.below(3));
    s.stride_h = 1 + static_cast<int>(rng.below(2));
    s.stride_w = 1 + static_cast<int>(rng.below(2));
    s.pad_h = static_cast<int>(rng.below(2));
    s.pad_w = static_cast<int>(rng.below(2));
    s.filter_count = 1 + static_cast<int>(rng.below(3));
    const int oh = conv_out_dim(static_cast<int>(H), s.kernel_h, s.stride_h, s.pad_h);
    const int ow = conv_out_dim(static_cast<int>(W), s.kernel_w, s.stride_w, s.pad_w);
    if (oh < 1 || ow < 1) {
      --t;
      continue;
    }
    Tensor x = oracle::random_tensor(rng, {H, W, C});
    Tensor w = oracle::random_tensor(
        rng, {static_cast<size_t>(s.kernel_h), static_cast<size_t>(s.kernel_w), C,
              static_cast<size_t>(s.filter_count)});
    Tensor b = oracle::random_tensor(rng, {static_cast<size_t>(s.filter_count)});
    Tensor probe = oracle::random_tensor(rng, {static_cast<size_t>(oh), static_cast<size_t>(ow),
                                               static_cast<size_t>(s.filter_count)});
    auto loss = [&] {
      Tensor y = conv2d_forward(x, s, w, b);
      double acc = 0.0;
      for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
      return acc;
    };
    auto backward = [&] {
      w.ensure_grad();
      b.ensure_grad();
      x.ensure_grad();
      w.zero_grad();
      b.zero_grad();
      x.zero_grad();
      ConvCache cache;
      conv2d_forward(x, s, w, b, &cache);
      x.g = conv2d_backward(cache, s, w, b, probe).v;
    };
    GradCheckReport rep = grad_check({{"w", &w}, {"b", &b}, {"x", &x}}, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

GradCase grad_pool(Rng& rng, size_t n_cases) {
  GradCase out{"max-pool"};
  for (size_t t = 0; t < n_cases; ++t) {
    const size_t H = 3 + rng.below(5), W = 3 + rng.below(5), C = 1 + rng.below(3);
    PoolSpec s;
    s.kernel_h = 1 + static_cast<int>(rng.below(3));
    s.kernel_w = 1 + static_cast<int>(rng.below(3));
    s.stride_h = 1 + static_cast<int>(rng.below(3));
    s.stride_w = 1 + static_cast<int>(rng.below(3));
    s.ceil_mode = rng.below(2) == 0;
    if (s.kernel_h > static_cast<int>(H) || s.kernel_w > static_cast<int>(W)) {
      --t;
      continue;
    }
    // Distinct entries keep the argmax stable under the probe step.
    Tensor x = oracle::distinct_tensor(rng, {H, W, C});
    const int oh = pool_out_dim(static_cast<int>(H), s.kernel_h, s.stride_h, s.ceil_mode);
    const int ow = pool_out_dim(static_cast<int>(W), s.kernel_w, s.stride_w, s.ceil_mode);
    Tensor probe = oracle::random_tensor(
        rng, {static_cast<size_t>(oh), static_cast<size_t>(ow), C});
    auto loss = [&] {
      Tensor y = max_pool_forward(x, s);
      double acc = 0.0;
      for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
      return acc;
    };
    auto backward = [&] {
      x.ensure_grad();
      x.zero_grad();
      PoolCache cache;
      max_pool_forward(x, s, &cache);
      x.g = max_pool_backward(cache, probe).v;
    };
    GradCheckReport rep = grad_check({{"x", &x}}, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

GradCase grad_fc(Rng& rng, size_t n_cases) {
  GradCase out{"fully-connected"};
  for (size_t t = 0; t < n_cases; ++t) {
    const size_t in = 2 + rng.below(24), width = 1 + rng.below(8);
    Tensor x = oracle::random_tensor(rng, {in});
    Tensor w = oracle::random_tensor(rng, {in, width});
    Tensor b = oracle::random_tensor(rng, {width});
    Tensor probe = oracle::random_tensor(rng, {width});
    auto loss = [&] {
      Tensor y = fully_connected_forward(x, w, b);
      double acc = 0.0;
      for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
      return acc;
    };
    auto backward = [&] {
      w.ensure_grad();
      b.ensure_grad();
      x.ensure_grad();
      w.zero_grad();
      b.zero_grad();
      x.zero_grad();
      x.g = fully_connected_backward(x, w, b, probe).v;
    };
    GradCheckReport rep = grad_check({{"w", &w}, {"b", &b}, {"x", &x}}, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

GradCase grad_activation(Rng& rng, size_t n_cases, bool use_tanh) {
  GradCase out{use_tanh ? "tanh" : "relu"};
  for (size_t t = 0; t < n_cases; ++t) {
    const size_t n = 2 + rng.below(30);
    // Keep ReLU inputs away from the kink, where finite differences lie.
    Tensor x = oracle::random_tensor(rng, {n});
    if (!use_tanh)
      for (double& v : x.v)
        if (std::abs(v) < 5e-3) v = v < 0 ? v - 0.01 : v + 0.01;
    Tensor probe = oracle::random_tensor(rng, {n});
    auto loss = [&] {
      Tensor y = use_tanh ? tanh_forward(x) : relu_forward(x);
      double acc = 0.0;
      for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
      return acc;
    };
    auto backward = [&] {
      x.ensure_grad();
      x.zero_grad();
      if (use_tanh) {
        Tensor y = tanh_forward(x);
        x.g = tanh_backward(y, probe).v;
      } else {
        x.g = relu_backward(x, probe).v;
      }
    };
    GradCheckReport rep = grad_check({{"x", &x}}, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

GradCase grad_softmax_xent(Rng& rng, size_t n_cases) {
  GradCase out{"softmax+cross-entropy"};
  for (size_t t = 0; t < n_cases; ++t) {
    const size_t k = 2 + rng.below(10);
    Tensor z = oracle::random_tensor(rng, {k}, -2.0, 2.0);
    const size_t label = rng.below(k);
    auto loss = [&] {
      std::vector<double> logits(z.v);
      return softmax_cross_entropy(logits, label).loss;
    };
    auto backward = [&] {
      z.ensure_grad();
      z.zero_grad();
      std::vector<double> logits(z.v);
      SoftmaxXentResult res = softmax_cross_entropy(logits, label);
      z.g = softmax_cross_entropy_backward(res, label);
    };
    GradCheckReport rep = grad_check({{"logits", &z}}, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

GradCase grad_composed(Rng& rng, size_t n_cases) {
  GradCase out{"composed 2-conv network"};
  const char* text = R"(arch twoconv
input 8x8x1
classes 3
conv k=3x3 n=2 s=1x1 p=1x1 act=tanh
conv k=3x3 n=3 s=1x1 p=0x0 act=tanh
pool k=2x2 s=2x2 mode=ceil
fc n=3 act=none
)";
  ArchitectureConfig arch = parse_architecture_text(text, "accept");
  for (size_t t = 0; t < n_cases; ++t) {
    Cnn net(arch, derive_seed(900, "case" + std::to_string(t)));
    Tensor x = oracle::random_tensor(rng, {8, 8, 1});
    const size_t label = rng.below(3);
    std::vector<Tensor*> ps = net.params();
    std::vector<std::pair<std::string, Tensor*>> named;
    for (size_t i = 0; i < ps.size(); ++i) named.emplace_back("p" + std::to_string(i), ps[i]);
    auto loss = [&] { return softmax_cross_entropy(net.forward(x), label).loss; };
    auto backward = [&] {
      for (Tensor* p : ps) {
        p->ensure_grad();
        p->zero_grad();
      }
      SoftmaxXentResult res = softmax_cross_entropy(net.forward(x), label);
      net.backward(softmax_cross_entropy_backward(res, label));
    };
    GradCheckReport rep = grad_check(named, loss, backward);
    out.max_rel = std::max(out.max_rel, rep.max_rel_err);
    out.pass = out.pass && rep.pass;
    ++out.cases;
  }
  return out;
}

Criterion criterion_gradients(AcceptContext&) {
  Criterion c{2, "analytic gradients vs central finite differences"};
  Rng rng(811);
  std::vector<GradCase> cases;
  cases.push_back(grad_conv(rng, 20));
  cases.push_back(grad_pool(rng, 20));
  cases.push_back(grad_fc(rng, 20));
  cases.push_back(grad_activation(rng, 20, true));
  cases.push_back(grad_activation(rng, 20, false));
  cases.push_back(grad_softmax_xent(rng, 20));
  cases.push_back(grad_composed(rng, 20));
  c.pass = true;
  for (const GradCase& gc : cases) {
    c.pass = c.pass && gc.pass && gc.max_rel <= 1e-4;
    c.detail.push_back(gc.op + ": " + std::to_string(gc.cases) +
                       " cases, max rel err " + format_double(gc.max_rel) +
                       (gc.pass ? "" : "  FAIL"));
  }
  return c;
}

// --- criterion 3: oracle equivalence ---

Criterion criterion_oracles(AcceptContext&) {
  Criterion c{3, "optimized kernels vs brute-force oracles"};
  Rng rng(823);
  double conv_err = 0.0, mean_err = 0.0, ns_err = 0.0;

  for (int t = 0; t < 100; ++t) {
    const size_t H = 2 + rng.below(11), W = 2 + rng.below(11), C = 1 + rng.below(4);
    ConvSpec s;
    s.kernel_h = 1 + static_cast<int>(rng.below(std::min<size_t>(H, 3)));
    s.kernel_w = 1 + static_cast<int>(rng.below(std::min<size_t>(W, 3)));
    s.stride_h = 1 + static_cast<int>(rng.below(3));
    s.stride_w = 1 + static_cast<int>(rng.below(3));
    s.pad_h = static_cast<int>(rng.below(3));
    s.pad_w = static_cast<int>(rng.below(3));
    s.filter_count = 1 + static_cast<int>(rng.below(4));
    if (conv_out_dim(static_cast<int>(H), s.kernel_h, s.stride_h, s.pad_h) < 1 ||
        conv_out_dim(static_cast<int>(W), s.kernel_w, s.stride_w, s.pad_w) < 1) {
      --t;
      continue;
    }
    Tensor x = oracle::random_tensor(rng, {H, W, C});
    Tensor w = oracle::random_tensor(
        rng, {static_cast<size_t>(s.kernel_h), static_cast<size_t>(s.kernel_w), C,
              static_cast<size_t>(s.filter_count)});
    Tensor b = oracle::random_tensor(rng, {static_cast<size_t>(s.filter_count)});
    Tensor fast = conv2d_forward(x, s, w, b);
    Tensor slow = oracle::conv2d(x, s, w, b);
    for (size_t i = 0; i < fast.v.size(); ++i)
      conv_err = std::max(conv_err, std::abs(fast.v[i] - slow.v[i]));
  }

  for (int t = 0; t < 100; ++t) {
    const int rows = 2 + static_cast<int>(rng.below(11)), cols = 2 + static_cast<int>(rng.below(11));
    Grid g = oracle::random_grid(rng, rows, cols);
    const int wt = 1 + 2 * static_cast<int>(rng.below((rows + 1) / 2));
    const int wf = 1 + 2 * static_cast<int>(rng.below((cols + 1) / 2));
    Grid fast = mean_filter(g, NsWindow{wt, wf});
    Grid slow = oracle::mean_filter(g, wt, wf);
    for (size_t i = 0; i < fast.v.size(); ++i)
      mean_err = std::max(mean_err, std::abs(fast.v[i] - slow.v[i]));
  }

  for (int t = 0; t < 50; ++t) {
    const int rows = 6 + static_cast<int>(rng.below(11)), cols = 6 + static_cast<int>(rng.below(11));
    Spectrogram spec;
    spec.grid = oracle::random_grid(rng, rows, cols, -6.0, 1.0);
    const int wt = 1 + 2 * static_cast<int>(rng.below(3));
    const int wf = 1 + 2 * static_cast<int>(rng.below(3));
    NsWindow win{wt, wf};
    NeutrosophicMap fast_p = proposed_transform(spec, win);
    oracle::NsMapsRef slow_p = oracle::proposed_ns(spec.grid, wt, wf);
    NeutrosophicMap fast_b = baseline_transform(spec, win);
    oracle::NsMapsRef slow_b = oracle::baseline_ns(spec.grid, wt, wf);
    for (size_t i = 0; i < fast_p.T.v.size(); ++i) {
      ns_err = std::max(ns_err, std::abs(fast_p.T.v[i] - slow_p.t.v[i]));
      ns_err = std::max(ns_err, std::abs(fast_p.I.v[i] - slow_p.i.v[i]));
      ns_err = std::max(ns_err, std::abs(fast_b.T.v[i] - slow_b.t.v[i]));
      ns_err = std::max(ns_err, std::abs(fast_b.I.v[i] - slow_b.i.v[i]));
      ns_err = std::max(ns_err, std::abs(fast_b.F.v[i] - slow_b.f.v[i]));
    }
  }

  c.detail.push_back("conv2d vs oracle, 100 instances: max abs err " + format_double(conv_err));
  c.detail.push_back("mean_filter vs oracle, 100 instances: max abs err " +
                     format_double(mean_err));
  c.detail.push_back("NS transforms vs oracle, 50 instances: max abs err " +
                     format_double(ns_err));
  c.pass = conv_err <= 1e-10 && mean_err <= 1e-10 && ns_err <= 1e-10;
  return c;
}

// --- criterion 4: neutrosophic invariants ---

Criterion criterion_ns_invariants(AcceptContext&) {
  Criterion c{4, "indeterminacy-transform invariant suite"};
  Rng rng(829);
  double mean_err = 0.0, scale_err = 0.0, offset_err = 0.0;
  bool baseline_ok = true;

  for (int t = 0; t < 100; ++t) {
    const int rows = 8 + static_cast<int>(rng.below(17)), cols = 8 + static_cast<int>(rng.below(17));
    Spectrogram spec;
    spec.grid = oracle::random_grid(rng, rows, cols, -6.0, 1.0);
    const int wt = 1 + 2 * static_cast<int>(rng.below(3));
    const int wf = 1 + 2 * static_cast<int>(rng.below(3));
    NsWindow win{wt, wf};

    NeutrosophicMap m = proposed_transform(spec, win);
    if (m.degenerate()) {
      --t;
      continue;
    }
    double mt = 0.0, mi = 0.0;
    for (double v : m.T.v) mt += v;
    for (double v : m.I.v) mi += v;
    mt /= static_cast<double>(m.T.v.size());
    mi /= static_cast<double>(m.I.v.size());
    mean_err = std::max({mean_err, std::abs(mt - 1.0), std::abs(mi - 1.0)});

    // Positive rescaling of the spectrogram leaves both maps unchanged.
    const double scale = 0.25 + rng.uniform() * 7.0;
    Spectrogram scaled = spec;
    for (double& v : scaled.grid.v) v *= scale;
    NeutrosophicMap ms = proposed_transform(scaled, win);
    for (size_t i = 0; i < m.T.v.size(); ++i) {
      double rt = std::abs(ms.T.v[i] - m.T.v[i]) / std::max(1e-12, std::abs(m.T.v[i]));
      double ri = std::abs(ms.I.v[i] - m.I.v[i]) / std::max(1e-12, std::abs(m.I.v[i]));
      scale_err = std::max({scale_err, rt, ri});
    }

    // A constant offset leaves the indeterminacy map unchanged.
    Spectrogram shifted = spec;
    const double offset = rng.uniform() * 4.0 - 2.0;
    for (double& v : shifted.grid.v) v += offset;
    NeutrosophicMap mo = proposed_transform(shifted, win);
    for (size_t i = 0; i < m.I.v.size(); ++i)
      offset_err = std::max(offset_err, std::abs(mo.I.v[i] - m.I.v[i]));

    NeutrosophicMap b = baseline_transform(spec, win);
    for (size_t i = 0; i < b.T.v.size(); ++i) {
      baseline_ok = baseline_ok && b.T.v[i] >= 0.0 && b.T.v[i] <= 1.0;
      baseline_ok = baseline_ok && b.I.v[i] >= 0.0 && b.I.v[i] <= 1.0;
      baseline_ok = baseline_ok && b.F.v[i] >= 0.0 && b.F.v[i] <= 1.0;
      baseline_ok = baseline_ok && b.F.v[i] == 1.0 - b.T.v[i];
    }
  }

  c.detail.push_back("mean(T), mean(I) deviation from 1: " + format_double(mean_err));
  c.detail.push_back("positive-scale invariance rel err: " + format_double(scale_err));
  c.detail.push_back("offset invariance of I abs err: " + format_double(offset_err));
  c.detail.push_back(std::string("baseline T/I/F in [0,1], F = 1 - T exact: ") +
                     (baseline_ok ? "holds" : "VIOLATED"));
  c.pass = mean_err <= 1e-9 && scale_err <= 1e-6 && offset_err <= 1e-9 && baseline_ok;
  return c;
}

// --- criterion 5: SNR mixer accuracy ---

Criterion criterion_snr(AcceptContext&) {
  Criterion c{5, "additive-noise mixer hits requested SNRs"};
  Rng rng(839);
  const double snrs[6] = {-5, 0, 5, 10, 15, 20};
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    AudioClip speech;
    speech.sample_rate = 8000;
    speech.samples = synth_utterance(static_cast<int>(rng.below(11)), 8000, rng);
    AudioClip noise;
    noise.sample_rate = 8000;
    noise.samples.resize(speech.samples.size() * 2);
    for (double& v : noise.samples) v = rng.gaussian() * 0.05;
    for (double snr : snrs) {
      MixResult mixed = mix_noise(speech, noise, snr, rng);
      std::vector<double> noise_part(mixed.mixed.samples.size());
      for (size_t i = 0; i < noise_part.size(); ++i)
        noise_part[i] = mixed.mixed.samples[i] - speech.samples[i];
      double measured = oracle::measured_snr_db(speech.samples, noise_part);
      worst = std::max(worst, std::abs(measured - snr));
    }
  }
  c.detail.push_back("50 speech/noise pairs x 6 SNRs {-5..20} dB: worst |measured - requested| " +
                     format_double(worst) + " dB");
  c.pass = worst <= 0.05;
  return c;
}

// --- criterion 6: fusion properties ---

Criterion criterion_fusion(AcceptContext&) {
  Criterion c{6, "posterior-combination property suite"};
  Rng rng(853);
  bool valid = true, commutative = true, shared_argmax = true, uniform_identity = true;
  const CombinationRule rules[3] = {CombinationRule::kSum, CombinationRule::kProduct,
                                    CombinationRule::kMaximum};
  for (int t = 0; t < 1000; ++t) {
    const size_t k = 2 + rng.below(10);
    std::vector<double> pa = random_posterior(rng, k);
    std::vector<double> pb = random_posterior(rng, k);

    for (CombinationRule rule : rules) {
      std::vector<double> q = combine_posteriors(pa, pb, rule);
      double sum = 0.0;
      for (double v : q) {
        valid = valid && v >= 0.0 && std::isfinite(v);
        sum += v;
      }
      valid = valid && std::abs(sum - 1.0) <= 1e-12;

      std::vector<double> r = combine_posteriors(pb, pa, rule);
      for (size_t i = 0; i < q.size(); ++i)
        commutative = commutative && std::abs(q[i] - r[i]) <= 1e-12;
    }

    // Shared argmax: boost the same component in both inputs.
    size_t peak = rng.below(k);
    std::vector<double> ba = pa, bb = pb;
    ba[peak] += 1.0;
    bb[peak] += 1.0;
    double sa = 0.0, sb = 0.0;
    for (double v : ba) sa += v;
    for (double v : bb) sb += v;
    for (double& v : ba) v /= sa;
    for (double& v : bb) v /= sb;
    for (CombinationRule rule : rules) {
      std::vector<double> q = combine_posteriors(ba, bb, rule);
      size_t arg = 0;
      for (size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[arg]) arg = i;
      shared_argmax = shared_argmax && arg == peak;
    }

    // Product with the uniform distribution is the identity.
    std::vector<double> uniform(k, 1.0 / static_cast<double>(k));
    std::vector<double> q = combine_posteriors(pa, uniform, CombinationRule::kProduct);
    for (size_t i = 0; i < k; ++i)
      uniform_identity = uniform_identity && std::abs(q[i] - pa[i]) <= 1e-12;
  }
  c.detail.push_back(std::string("distribution validity: ") + (valid ? "holds" : "VIOLATED"));
  c.detail.push_back(std::string("commutativity <= 1e-12: ") +
                     (commutative ? "holds" : "VIOLATED"));
  c.detail.push_back(std::string("shared-argmax preservation: ") +
                     (shared_argmax ? "holds" : "VIOLATED"));
  c.detail.push_back(std::string("product-with-uniform identity <= 1e-12: ") +
                     (uniform_identity ? "holds" : "VIOLATED"));
  c.pass = valid && commutative && shared_argmax && uniform_identity;
  return c;
}

// --- criterion 7: overfit sanity ---

struct OverfitOutcome {
  double final_accuracy = -1.0;
  size_t iterations = 0;
  std::string train_log;
};

OverfitOutcome run_overfit(AcceptContext& ctx) {
  Experiment& e = ctx.experiment();
  PreparedData& data = ctx.world();

  std::vector<ManifestEntry> entries =
      overfit_subset(filter_split(data.manifest, Split::kTrainNoisy), kOverfitSamples, e.hp.seed);
  FeatureExtractor fx(data.bank, e.features);

  Hyperparams hp = e.hp;
  hp.max_iterations = kOverfitIterations;
  hp.accuracy_every = kOverfitProbeEvery;
  hp.accuracy_sample_cap = kOverfitSamples;
  hp.stop_at_train_accuracy = 99.0;

  SpeechModel model(ModelKind::kNcnn, e.arch, CombinationRule::kProduct, e.features.window,
                    e.model_seed);
  TrainResult r = train(model, entries, fx, hp, ctx.verbose ? &std::cout : nullptr);

  OverfitOutcome out;
  out.iterations = r.iterations_run;
  out.train_log = emit_train_log(r);
  for (auto it = r.log.rbegin(); it != r.log.rend(); ++it)
    if (it->train_accuracy >= 0.0) {
      out.final_accuracy = it->train_accuracy;
      break;
    }
  return out;
}

Criterion criterion_overfit(AcceptContext& ctx) {
  Criterion c{7, "dual-path model overfits a 64-sample subset"};
  Experiment& e = ctx.experiment();
  OverfitOutcome out = run_overfit(ctx);
  ctx.overfit_log = out.train_log;

  fs::create_directories(e.models_dir());
  std::ofstream(fs::path(e.models_dir()) / "accept_overfit.train.tsv") << out.train_log;

  c.detail.push_back("subset accuracy " + fmt2(out.final_accuracy) + "% after " +
                     std::to_string(out.iterations) + " iterations (budget " +
                     std::to_string(kOverfitIterations) + ")");
  c.pass = out.final_accuracy >= 99.0 && out.iterations <= kOverfitIterations;
  return c;
}

// --- criterion 8: directional main result ---

Criterion criterion_main_result(AcceptContext& ctx) {
  Criterion c{8, "dual-path beats single-path on noisy tests"};
  double ncnn_noisy = 0.0, cnn_noisy = 0.0, ncnn_clean = 0.0, cnn_clean = 0.0;

  for (uint64_t seed : kMatrixSeeds) {
    const RunArtifacts& nn = matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, seed);
    const RunArtifacts& cn = matrix_cell(ctx, ModelKind::kCnn, Split::kTrainNoisy, seed);
    const RunArtifacts& nc = matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainClean, seed);
    const RunArtifacts& cc = matrix_cell(ctx, ModelKind::kCnn, Split::kTrainClean, seed);
    ncnn_noisy += nn.noisy_average;
    cnn_noisy += cn.noisy_average;
    ncnn_clean += nc.noisy_average;
    cnn_clean += cc.noisy_average;
    c.detail.push_back("seed " + std::to_string(seed) + ": noisy-train NCNN " +
                       fmt2(nn.noisy_average) + " vs CNN " + fmt2(cn.noisy_average) +
                       "; clean-train NCNN " + fmt2(nc.noisy_average) + " vs CNN " +
                       fmt2(cc.noisy_average));
  }
  ncnn_noisy /= 3.0;
  cnn_noisy /= 3.0;
  ncnn_clean /= 3.0;
  cnn_clean /= 3.0;

  const double noisy_gap = ncnn_noisy - cnn_noisy;
  const double clean_gap = ncnn_clean - cnn_clean;
  c.detail.push_back("3-seed means: noisy-train NCNN " + fmt2(ncnn_noisy) + " vs CNN " +
                     fmt2(cnn_noisy) + " (gap " + fmt2(noisy_gap) + " pp)");
  c.detail.push_back("3-seed means: clean-train NCNN " + fmt2(ncnn_clean) + " vs CNN " +
                     fmt2(cnn_clean) + " (gap " + fmt2(clean_gap) + " pp)");
  const double noisy_s = ctx.condition_seconds["noisy"], clean_s = ctx.condition_seconds["clean"];
  const bool in_budget = noisy_s <= 7200.0 && clean_s <= 7200.0;
  c.detail.push_back("condition budgets (limit 7200 s each): noisy " + fmt2(noisy_s) +
                     " s, clean " + fmt2(clean_s) + " s");
  c.pass = noisy_gap >= 1.0 && clean_gap >= 0.0 && in_budget;
  return c;
}

// --- criterion 9 (soft): combination-rule ordering ---

// Re-fuses the noisy seed-1 product checkpoint under the given rule and
// returns the full report CSV. Used by criterion 9 (ordering) and rerun by
// criterion 10 (byte-identical reports).
std::string shared_refusion_csv(AcceptContext& ctx, CombinationRule rule) {
  Experiment& e = ctx.experiment();
  PreparedData& data = ctx.world();
  if (!ctx.shared_checkpoint) matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1);
  SpeechModel& model = *ctx.shared_checkpoint;
  const CombinationRule before = model.rule();
  model.set_rule(rule);
  FeatureExtractor fx(data.bank, e.features);
  EvalOptions opt;
  opt.model_name = "NCNN";
  opt.train_condition = "noisy";
  EvalReport report = evaluate(model, all_test_entries(data.manifest), fx, opt);
  model.set_rule(before);
  report.metadata.emplace_back("checkpoint.stem", "accept_ncnn_noisy_s1");
  report.metadata.emplace_back("fusion.rule", combination_rule_name(rule));
  return emit_report_csv(report);
}

Criterion criterion_rule_ordering(AcceptContext& ctx) {
  Criterion c{9, "product rule scores best (reported, not gated)"};
  c.soft = true;
  Experiment& e = ctx.experiment();

  // Per-rule: a model trained and fused under each rule (seed 1).
  double per_rule[3] = {0, 0, 0};
  const CombinationRule rules[3] = {CombinationRule::kProduct, CombinationRule::kSum,
                                    CombinationRule::kMaximum};
  per_rule[0] = matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1).noisy_average;
  per_rule[1] = run_matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1,
                                CombinationRule::kSum)
                    .noisy_average;
  per_rule[2] = run_matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1,
                                CombinationRule::kMaximum)
                    .noisy_average;

  // Shared checkpoint: the product-trained model re-fused under each rule.
  double shared[3] = {per_rule[0], 0, 0};
  for (int i = 1; i < 3; ++i) {
    std::string csv = shared_refusion_csv(ctx, rules[i]);
    shared[i] = parse_report_csv(csv).overall_average("NCNN", "noisy");
    std::ofstream(fs::path(e.reports_dir()) /
                  ("accept_shared_" + combination_rule_name(rules[i]) + ".csv"))
        << csv;
  }

  for (int i = 0; i < 3; ++i)
    c.detail.push_back(std::string(combination_rule_name(rules[i])) + ": per-rule " +
                       fmt2(per_rule[i]) + ", shared checkpoint " + fmt2(shared[i]) +
                       " (seed 1)");
  const bool ordered =
      per_rule[0] >= per_rule[1] && per_rule[0] >= per_rule[2];
  const bool shared_ordered = shared[0] >= shared[1] && shared[0] >= shared[2];
  c.detail.push_back(std::string("per-rule ordering product >= sum, max: ") +
                     (ordered ? "holds" : "DEVIATES"));
  c.detail.push_back(std::string("shared-checkpoint ordering: ") +
                     (shared_ordered ? "holds" : "DEVIATES"));
  c.pass = ordered && shared_ordered;  // reported only; never gates the exit code
  return c;
}

// --- criterion 10: determinism ---

Criterion criterion_determinism(AcceptContext& ctx) {
  Criterion c{10, "reruns with identical configs are byte-identical"};

  // Criterion 7's pipeline: the overfit run, repeated.
  if (ctx.overfit_log.empty()) ctx.overfit_log = run_overfit(ctx).train_log;
  const bool overfit_equal = run_overfit(ctx).train_log == ctx.overfit_log;

  // Criterion 8's pipeline: both noisy seed-1 cells, trained and evaluated
  // again from scratch.
  const RunArtifacts& first_ncnn = matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1);
  const RunArtifacts& first_cnn = matrix_cell(ctx, ModelKind::kCnn, Split::kTrainNoisy, 1);
  RunArtifacts again_ncnn = run_matrix_cell(ctx, ModelKind::kNcnn, Split::kTrainNoisy, 1);
  RunArtifacts again_cnn = run_matrix_cell(ctx, ModelKind::kCnn, Split::kTrainNoisy, 1);
  const bool logs_equal = first_ncnn.train_log == again_ncnn.train_log &&
                          first_cnn.train_log == again_cnn.train_log;
  const bool reports_equal = first_ncnn.report_csv == again_ncnn.report_csv &&
                             first_cnn.report_csv == again_cnn.report_csv;

  // Criterion 9's pipeline: the shared-checkpoint re-fusion report, repeated.
  const std::string refused_a = shared_refusion_csv(ctx, CombinationRule::kMaximum);
  const std::string refused_b = shared_refusion_csv(ctx, CombinationRule::kMaximum);
  const bool refusion_equal = refused_a == refused_b;

  c.detail.push_back(std::string("overfit training log: ") +
                     (overfit_equal ? "byte-identical" : "DIFFERS"));
  c.detail.push_back(std::string("matrix training logs (dual + single path, seed 1): ") +
                     (logs_equal ? "byte-identical" : "DIFFER"));
  c.detail.push_back(std::string("matrix evaluation report CSVs: ") +
                     (reports_equal ? "byte-identical" : "DIFFER"));
  c.detail.push_back(std::string("shared-checkpoint re-fusion CSV: ") +
                     (refusion_equal ? "byte-identical" : "DIFFERS"));
  c.pass = overfit_equal && logs_equal && reports_equal && refusion_equal;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate: structural, numerical, and experiment checks"};
  AcceptContext ctx;
  ctx.out_dir = "accept-out";
  if (const char* env = std::getenv("NSPEECH_OUT"); env && *env) ctx.out_dir = env;
  std::vector<int> only;
  app.add_option("--out", ctx.out_dir, "working directory for data and artifacts");
  app.add_option("--only", only, "run only these criterion numbers");
  app.add_flag("-v,--verbose", ctx.verbose, "training progress and preparation notes");
  CLI11_PARSE(app, argc, argv);

  using CriterionFn = Criterion (*)(AcceptContext&);
  const std::pair<int, CriterionFn> all[] = {
      {1, criterion_shapes},        {2, criterion_gradients}, {3, criterion_oracles},
      {4, criterion_ns_invariants}, {5, criterion_snr},       {6, criterion_fusion},
      {7, criterion_overfit},       {8, criterion_main_result},
      {9, criterion_rule_ordering}, {10, criterion_determinism},
  };

  auto selected = [&](int id) {
    if (only.empty()) return true;
    for (int o : only)
      if (o == id) return true;
    return false;
  };

  int hard_total = 0, hard_passed = 0;
  bool soft_deviation = false;
  try {
    // Runtime limits (seconds) that are part of the criteria themselves.
    // Criterion 8 enforces its per-condition budget internally.
    const std::map<int, double> runtime_limit = {{1, 10}, {2, 120}, {3, 60},  {4, 60},
                                                 {5, 60}, {6, 10},  {7, 900}};
    for (const auto& [id, fn] : all) {
      if (!selected(id)) continue;
      auto t0 = Clock::now();
      Criterion c = fn(ctx);
      c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      if (auto it = runtime_limit.find(id); it != runtime_limit.end() && c.seconds > it->second) {
        c.pass = false;
        c.detail.push_back("runtime " + fmt2(c.seconds) + " s exceeds the " +
                           fmt2(it->second) + " s limit");
      }

      const char* tag = c.soft ? (c.pass ? "[SOFT-PASS]" : "[SOFT-DEVIATION]")
                               : (c.pass ? "[PASS]" : "[FAIL]");
      std::cout << tag << " " << c.id << ". " << c.title << " (" << fmt2(c.seconds) << " s)\n";
      for (const std::string& d : c.detail) std::cout << "        " << d << "\n";
      if (c.soft) {
        soft_deviation = soft_deviation || !c.pass;
      } else {
        ++hard_total;
        hard_passed += c.pass ? 1 : 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance aborted: " << e.what() << "\n";
    return 1;
  }

  std::cout << hard_passed << "/" << hard_total << " gated criteria passed";
  if (soft_deviation) std::cout << "; soft criterion deviates (see above)";
  std::cout << "\n";
  return hard_passed == hard_total ? 0 : 1;
}
