// Command-line front end for the noise-robust speech classification toolkit.
//
// One binary, eight subcommands:
//   prepare            synthesize/load data, build the split manifest
//   transform          export spectrogram + indeterminacy maps for one utterance
//   train              train a model on a training split, save a checkpoint
//   eval               evaluate a checkpoint over the test sets, write reports
//   sweep-window       mean-filter window-size sweep
//   sweep-combination  posterior combination-rule sweep (shared + per-rule)
//   report             re-render text tables from existing report CSVs
//   shapes             layer-shape conformance report for the built-in schedules
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nspeech/evaluate.hpp"
#include "nspeech/experiment.hpp"
#include "nspeech/grid_io.hpp"
#include "nspeech/report_io.hpp"
#include "nspeech/sweeps.hpp"
#include "nspeech/train.hpp"

namespace fs = std::filesystem;
using namespace nspeech;

namespace {

struct GlobalArgs {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::string out_dir;
  int jobs = 0;
  bool verbose = false;
};

// Precedence, lowest to highest: defaults, config files (in order),
// NSPEECH_OUT, --set overrides, --out / --jobs flags.
ConfigRegistry resolve_config(const GlobalArgs& g) {
  ConfigRegistry cfg = default_config();
  for (const std::string& f : g.config_files) cfg.load_file(f);
  if (const char* env_out = std::getenv("NSPEECH_OUT"); env_out && *env_out)
    cfg.set("out.dir", env_out, "env:NSPEECH_OUT");
  for (const std::string& kv : g.overrides) cfg.apply_override(kv);
  if (!g.out_dir.empty()) cfg.set("out.dir", g.out_dir, "flag:--out");
  if (g.jobs > 0) cfg.set("eval.jobs", std::to_string(g.jobs), "flag:--jobs");
  return cfg;
}

std::string train_condition_name(Split s) {
  return s == Split::kTrainClean ? "clean" : "noisy";
}

std::vector<ManifestEntry> test_entries(const std::vector<ManifestEntry>& manifest) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : manifest)
    if (is_test_split(e.split)) out.push_back(e);
  return out;
}

// Checkpoint stems live under <out>/models unless the name carries a path.
std::string resolve_model_stem(const Experiment& e, const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  return (fs::path(e.models_dir()) / name).string();
}

std::string infer_condition(const std::string& stem, const Experiment& e) {
  std::string leaf = fs::path(stem).filename().string();
  if (leaf.find("clean") != std::string::npos) return "clean";
  if (leaf.find("noisy") != std::string::npos) return "noisy";
  return train_condition_name(e.train_split);
}

// --- prepare ---

int cmd_prepare(const ConfigRegistry& cfg, bool verbose) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);
  std::cout << "corpus: " << e.corpus_dir << " (" << data.corpus.size() << " utterances)\n";
  std::cout << "noise bank: " << e.noise_dir << " (" << data.bank.families.size()
            << " families)\n";
  std::cout << "manifest: " << e.manifest_path() << " (hash "
            << hash_hex(manifest_content_hash(data.manifest)) << ")\n";
  std::cout << split_summary(data.manifest);
  if (verbose) std::cout << "\nresolved configuration:\n" << cfg.provenance();
  return 0;
}

// --- transform ---

void export_maps(const FeatureExtractor& fx, const ManifestEntry& entry, const NsWindow& window,
                 const fs::path& dir, const std::string& tag) {
  Spectrogram spec = fx.fitted_spectrogram(entry);
  NeutrosophicMap ns = proposed_transform(spec, window);

  write_grid((dir / (tag + ".spec.grid")).string(), spec.grid, "log-spectrogram", false);
  write_grid((dir / (tag + ".ind.grid")).string(), ns.I, "indeterminacy", ns.i_degenerate);
  write_grid_csv((dir / (tag + ".spec.csv")).string(), spec.grid);
  write_grid_csv((dir / (tag + ".ind.csv")).string(), ns.I);
  write_grid_pgm((dir / (tag + ".spec.pgm")).string(), spec.grid);
  write_grid_pgm((dir / (tag + ".ind.pgm")).string(), ns.I);

  double mean_i = 0.0;
  for (double x : ns.I.v) mean_i += x;
  mean_i /= static_cast<double>(ns.I.v.size());
  std::cout << "  " << tag << ": " << spec.grid.rows << "x" << spec.grid.cols
            << " frames x bins, I mean " << format_double(mean_i) << ", degenerate "
            << (ns.degenerate() ? "yes" : "no") << "\n";
}

int cmd_transform(const ConfigRegistry& cfg, std::string utterance, const std::string& noise,
                  double snr) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);
  FeatureExtractor fx(data.bank, e.features);

  const ManifestEntry* clean = nullptr;
  const ManifestEntry* noisy = nullptr;
  if (utterance.empty()) {
    for (const ManifestEntry& m : data.manifest)
      if (m.split == Split::kTestA && m.clean()) {
        utterance = m.utterance_id;
        break;
      }
  }
  std::vector<std::string> available;
  for (const ManifestEntry& m : data.manifest) {
    if (m.utterance_id != utterance) continue;
    if (m.clean()) {
      if (!clean) clean = &m;
    } else {
      available.push_back(m.noise_type + " @ " + format_double(m.snr_db) + " dB (" +
                          split_name(m.split) + ")");
      if (!noisy && m.noise_type == noise && m.snr_db == snr) noisy = &m;
    }
  }
  if (!clean) throw DataError("transform: utterance not in manifest: " + utterance);
  if (!noisy) {
    std::string msg = "transform: no entry for " + utterance + " with " + noise + " @ " +
                      format_double(snr) + " dB; available:";
    for (const std::string& a : available) msg += "\n  " + a;
    throw DataError(msg);
  }

  fs::path dir = fs::path(e.out_dir) / "transform" / utterance;
  fs::create_directories(dir);
  std::cout << "utterance " << utterance << " (label " << clean->label << ")\n";
  export_maps(fx, *clean, e.features.window, dir, "clean");
  export_maps(fx, *noisy, e.features.window, dir,
              "noisy_" + noise + "_" + format_double(snr) + "dB");
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

// --- train ---

int cmd_train(const ConfigRegistry& cfg, std::string name, bool verbose) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);

  std::vector<ManifestEntry> entries = filter_split(data.manifest, e.train_split);
  if (e.overfit_subset > 0) entries = overfit_subset(entries, e.overfit_subset, e.hp.seed);

  FeatureExtractor fx(data.bank, e.features);
  SpeechModel model(e.kind, e.arch, e.rule, e.features.window, e.model_seed);

  std::string condition = train_condition_name(e.train_split);
  if (name.empty()) name = model_kind_name(e.kind) + "_" + condition;
  std::string stem = resolve_model_stem(e, name);
  fs::create_directories(fs::path(stem).parent_path());

  std::cout << "training " << model_kind_name(e.kind) << " (" << e.arch.name << ") on "
            << split_name(e.train_split) << ": " << entries.size() << " samples, "
            << e.hp.max_iterations << " iterations, batch " << e.hp.batch_size << "\n";
  TrainResult result = train(model, entries, fx, e.hp, verbose ? &std::cout : nullptr);

  model.save(stem);
  std::ofstream log(stem + ".train.tsv");
  log << emit_train_log(result);
  if (!log) throw DataError("train: cannot write log: " + stem + ".train.tsv");

  double final_acc = -1.0;
  for (auto it = result.log.rbegin(); it != result.log.rend(); ++it)
    if (it->train_accuracy >= 0.0) {
      final_acc = it->train_accuracy;
      break;
    }
  std::cout << "final loss " << format_double(result.final_loss);
  if (final_acc >= 0.0) std::cout << ", train accuracy " << format_double(final_acc) << "%";
  std::cout << "\ncheckpoint: " << stem << " (hash " << hash_hex(model.content_hash()) << ")\n";
  std::cout << "train log: " << stem << ".train.tsv\n";
  return 0;
}

// --- eval ---

int cmd_eval(const ConfigRegistry& cfg, std::string model_name, std::string condition,
             bool verbose) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);
  FeatureExtractor fx(data.bank, e.features);

  if (model_name.empty())
    model_name = model_kind_name(e.kind) + "_" + train_condition_name(e.train_split);
  std::string stem = resolve_model_stem(e, model_name);
  SpeechModel model = SpeechModel::load(stem);
  if (condition.empty()) condition = infer_condition(stem, e);

  EvalOptions opt;
  opt.model_name = model.dual() ? "NCNN" : "CNN";
  opt.train_condition = condition;
  opt.jobs = e.jobs;
  EvalReport report = evaluate(model, test_entries(data.manifest), fx, opt);
  report.metadata.emplace_back("checkpoint.stem", fs::path(stem).filename().string());
  report.metadata.emplace_back("checkpoint.hash", hash_hex(model.content_hash()));
  for (auto& [k, v] : config_metadata(cfg)) report.metadata.emplace_back(k, v);

  fs::create_directories(e.reports_dir());
  std::string leaf = fs::path(stem).filename().string();
  std::string csv_path = (fs::path(e.reports_dir()) / (leaf + ".csv")).string();
  std::string txt_path = (fs::path(e.reports_dir()) / (leaf + ".txt")).string();
  write_report_csv(csv_path, report);
  write_report_text(txt_path, report);

  if (verbose) std::cout << render_report_text(report) << "\n";
  for (const std::string& set : report.test_sets(opt.model_name, condition))
    std::cout << "set " << set << " noisy average: "
              << format_double(report.set_average(opt.model_name, condition, set)) << "%\n";
  std::cout << "overall noisy average: "
            << format_double(report.overall_average(opt.model_name, condition)) << "%\n";
  std::cout << "report: " << csv_path << "\n";
  std::cout << "report: " << txt_path << "\n";
  return 0;
}

// --- sweeps ---

SweepContext sweep_context(const Experiment& e, const PreparedData& data) {
  SweepContext ctx;
  ctx.manifest = data.manifest;
  ctx.bank = data.bank;
  ctx.features = e.features;
  ctx.arch = e.arch;
  ctx.hp = e.hp;
  ctx.model_seed = e.model_seed;
  ctx.train_split = e.train_split;
  ctx.jobs = e.jobs;
  return ctx;
}

int cmd_sweep_window(const ConfigRegistry& cfg) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);
  std::vector<WindowSweepRow> rows = sweep_window(e.sweep_window_sizes, sweep_context(e, data));

  fs::create_directories(e.reports_dir());
  std::ostringstream summary;
  summary << "window sweep: label -> odd window -> mean noisy accuracy %\n";
  for (const WindowSweepRow& row : rows) {
    std::string csv_path =
        (fs::path(e.reports_dir()) / ("window_" + row.label + ".csv")).string();
    write_report_csv(csv_path, row.report);
    summary << "  " << row.label << " -> " << row.window.t << "x" << row.window.f << " -> "
            << format_double(row.average) << "\n";
  }
  std::string summary_path = (fs::path(e.reports_dir()) / "window_sweep.txt").string();
  std::ofstream(summary_path) << summary.str();
  std::cout << summary.str() << "summary: " << summary_path << "\n";
  return 0;
}

int cmd_sweep_combination(const ConfigRegistry& cfg) {
  Experiment e = experiment_from(cfg);
  PreparedData data = prepare_data(e);
  std::vector<CombinationSweepRow> rows = sweep_combination(e.sweep_rules, sweep_context(e, data));

  fs::create_directories(e.reports_dir());
  std::ostringstream summary;
  summary << "combination sweep: mode / rule -> mean noisy accuracy %\n";
  for (const CombinationSweepRow& row : rows) {
    std::string leaf = "combination_" + row.mode + "_" + combination_rule_name(row.rule);
    write_report_csv((fs::path(e.reports_dir()) / (leaf + ".csv")).string(), row.report);
    summary << "  " << row.mode << " / " << combination_rule_name(row.rule) << " -> "
            << format_double(row.average) << "\n";
  }
  std::string summary_path = (fs::path(e.reports_dir()) / "combination_sweep.txt").string();
  std::ofstream(summary_path) << summary.str();
  std::cout << summary.str() << "summary: " << summary_path << "\n";
  return 0;
}

// --- report ---

int cmd_report(const std::vector<std::string>& csvs, const std::string& text_out,
               const std::string& csv_out) {
  EvalReport merged;
  for (const std::string& path : csvs) merged.append(read_report_csv(path));
  std::string text = render_report_text(merged);
  if (!text_out.empty()) {
    std::ofstream out(text_out);
    out << text;
    if (!out) throw DataError("report: cannot write: " + text_out);
  }
  if (!csv_out.empty()) write_report_csv(csv_out, merged);
  std::cout << text;
  return 0;
}

// --- shapes ---

int cmd_shapes(const std::string& arch_name) {
  std::vector<ShapeCheckRow> rows = table1_shape_check();
  std::cout << "full-size schedule conformance (declared vs computed)\n";
  size_t matches = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const ShapeCheckRow& r = rows[i];
    std::cout << "  row " << i << "  " << r.layer_type << " " << r.config << "\n"
              << "    declared " << r.declared_in.str() << " -> " << r.declared_out.str()
              << ", computed " << r.computed.str() << "  [" << (r.match ? "match" : "MISMATCH")
              << "]\n";
    if (!r.note.empty()) std::cout << "    rounding candidates: " << r.note << "\n";
    matches += r.match ? 1 : 0;
  }
  std::cout << matches << "/" << rows.size() << " rows match the declared sizes\n\n";

  ArchitectureConfig arch = load_architecture(arch_name);
  std::vector<Shape3> shapes = propagate_shapes(arch);  // one entry per layer
  std::cout << "architecture '" << arch.name << "' shape chain\n  input "
            << Shape3{arch.input_h, arch.input_w, arch.input_c}.str() << "\n";
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerDef& l = arch.layers[i];
    const char* kind = l.kind == LayerKind::kConv ? "conv" : (l.kind == LayerKind::kPool ? "pool" : "fc");
    std::cout << "  " << kind << " -> " << shapes[i].str() << "\n";
  }
  std::cout << "classes: " << arch.class_count << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noise-robust isolated-word classification toolkit"};
  app.require_subcommand(1);
  app.footer("Configuration keys (override with --set key=value or a --config file):\n" +
             default_config().help());

  GlobalArgs g;
  app.add_option("--config", g.config_files, "configuration file(s), applied in order")
      ->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override a configuration key (key=value, repeatable)");
  app.add_option("--out", g.out_dir, "output root (overrides out.dir and NSPEECH_OUT)");
  app.add_option("--jobs", g.jobs, "evaluation worker threads (overrides eval.jobs)");
  app.add_flag("-v,--verbose", g.verbose, "verbose progress and resolved configuration");

  CLI::App* prepare = app.add_subcommand("prepare", "synthesize or load data, write the manifest");

  CLI::App* transform =
      app.add_subcommand("transform", "export spectrogram and indeterminacy maps");
  std::string tf_utterance, tf_noise = "white";
  double tf_snr = 5.0;
  transform->add_option("--utterance", tf_utterance, "utterance id (default: first test utterance)");
  transform->add_option("--noise", tf_noise, "noise family for the noisy variant");
  transform->add_option("--snr", tf_snr, "SNR in dB for the noisy variant");

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and save a checkpoint");
  std::string train_name;
  train_cmd->add_option("--name", train_name, "checkpoint name (default: <kind>_<condition>)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over the test sets");
  std::string eval_model, eval_condition;
  eval_cmd->add_option("--model", eval_model,
                       "checkpoint name or path stem (default: <kind>_<condition>)");
  eval_cmd->add_option("--train-condition", eval_condition,
                       "training condition label for the report (default: inferred)");

  CLI::App* sweep_win = app.add_subcommand("sweep-window", "mean-filter window-size sweep");
  CLI::App* sweep_comb =
      app.add_subcommand("sweep-combination", "combination-rule sweep (shared and per-rule)");

  CLI::App* report_cmd = app.add_subcommand("report", "render text tables from report CSVs");
  std::vector<std::string> report_csvs;
  std::string report_text_out, report_csv_out;
  report_cmd->add_option("csvs", report_csvs, "report CSV files")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--text-out", report_text_out, "also write the rendered tables here");
  report_cmd->add_option("--csv-out", report_csv_out, "also write the merged CSV here");

  CLI::App* shapes = app.add_subcommand("shapes", "layer-shape conformance report");
  std::string shapes_arch = "desk";
  shapes->add_option("--arch", shapes_arch, "architecture to chain: desk, table1, or a file");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    ConfigRegistry cfg = resolve_config(g);
    if (*prepare) return cmd_prepare(cfg, g.verbose);
    if (*transform) return cmd_transform(cfg, tf_utterance, tf_noise, tf_snr);
    if (*train_cmd) return cmd_train(cfg, train_name, g.verbose);
    if (*eval_cmd) return cmd_eval(cfg, eval_model, eval_condition, g.verbose);
    if (*sweep_win) return cmd_sweep_window(cfg);
    if (*sweep_comb) return cmd_sweep_combination(cfg);
    if (*report_cmd) return cmd_report(report_csvs, report_text_out, report_csv_out);
    if (*shapes) return cmd_shapes(shapes_arch);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 0;
}
