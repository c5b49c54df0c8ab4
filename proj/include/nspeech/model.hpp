#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/fusion.hpp"
#include "nspeech/network.hpp"
#include "nspeech/neutrosophic.hpp"

namespace nspeech {

enum class ModelKind { kCnn, kNcnn };

inline std::string model_kind_name(ModelKind k) { return k == ModelKind::kCnn ? "cnn" : "ncnn"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "cnn") return ModelKind::kCnn;
  if (s == "ncnn") return ModelKind::kNcnn;
  throw ConfigError("model kind must be cnn or ncnn; got '" + s + "'");
}

// Index of the largest entry; ties go to the lowest index.
inline size_t argmax_label(const std::vector<double>& p) {
  size_t best = 0;
  for (size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

struct SamplePosteriors {
  std::vector<double> spec;   // spectrogram-path posterior (empty for single-path models)
  std::vector<double> ind;    // indeterminacy-path posterior (empty for single-path models)
  std::vector<double> fused;  // posterior the prediction is read from
};

// A speech classifier: either a single convolutional path over the
// log-spectrogram, or two parallel paths (spectrogram + indeterminacy map)
// whose class posteriors are fused by a combination rule.
class SpeechModel {
 public:
  SpeechModel(ModelKind kind, const ArchitectureConfig& arch, CombinationRule rule, NsWindow window,
              uint64_t seed)
      : kind_(kind),
        rule_(rule),
        window_(window),
        spec_path_(arch, derive_seed(seed, "path/spec")) {
    window_.validate();
    if (kind_ == ModelKind::kNcnn) ind_path_.emplace(arch, derive_seed(seed, "path/ind"));
  }

  ModelKind kind() const { return kind_; }
  bool dual() const { return kind_ == ModelKind::kNcnn; }
  CombinationRule rule() const { return rule_; }
  // Fusion happens at posterior level only, so the rule may be swapped on a
  // trained model (used by the combination sweep's shared-checkpoint mode).
  void set_rule(CombinationRule rule) { rule_ = rule; }
  const NsWindow& window() const { return window_; }
  int class_count() const { return spec_path_.class_count(); }
  Cnn& spec_path() { return spec_path_; }
  Cnn& ind_path() {
    if (!ind_path_) throw ConfigError("model: single-path model has no indeterminacy path");
    return *ind_path_;
  }

  // Class posteriors for one sample. Dual models require the indeterminacy
  // input; single-path models ignore it.
  SamplePosteriors posteriors(const Tensor& spec_in, const Tensor* ind_in) {
    SamplePosteriors out;
    if (kind_ == ModelKind::kCnn) {
      out.fused = softmax(spec_path_.forward(spec_in));
      return out;
    }
    if (!ind_in) throw ConfigError("model: dual model needs an indeterminacy input");
    out.spec = softmax(spec_path_.forward(spec_in));
    out.ind = softmax(ind_path_->forward(*ind_in));
    out.fused = combine_posteriors(out.spec, out.ind, rule_);
    return out;
  }

  size_t predict(const Tensor& spec_in, const Tensor* ind_in) {
    return argmax_label(posteriors(spec_in, ind_in).fused);
  }

  // Cross-entropy on the fused posterior, backpropagated through the
  // combination rule into both paths (or straight through the single path).
  // Accumulates parameter gradients; returns the sample loss.
  double learn_sample(const Tensor& spec_in, const Tensor* ind_in, size_t label) {
    if (label >= static_cast<size_t>(class_count())) throw ConfigError("model: label out of range");
    if (kind_ == ModelKind::kCnn) {
      SoftmaxXentResult r = softmax_cross_entropy(spec_path_.forward(spec_in), label);
      spec_path_.backward(softmax_cross_entropy_backward(r, label));
      return r.loss;
    }
    SamplePosteriors p = posteriors(spec_in, ind_in);
    double qy = std::max(p.fused[label], detail::kProbFloor);
    double loss = -std::log(qy);
    std::vector<double> dq(p.fused.size(), 0.0);
    dq[label] = -1.0 / qy;
    CombineGrads cg = combine_backward(p.spec, p.ind, p.fused, dq, rule_);
    spec_path_.backward(softmax_backward(p.spec, cg.dpa));
    ind_path_->backward(softmax_backward(p.ind, cg.dpb));
    return loss;
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out = spec_path_.params();
    if (ind_path_) {
      std::vector<Tensor*> more = ind_path_->params();
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  uint64_t content_hash() const {
    uint64_t h = fnv1a64(meta_text());
    uint64_t hs = spec_path_.content_hash();
    h = fnv1a64(&hs, sizeof(hs), h);
    if (ind_path_) {
      uint64_t hi = ind_path_->content_hash();
      h = fnv1a64(&hi, sizeof(hi), h);
    }
    return h;
  }

  // Checkpoint trio rooted at a stem: <stem>.meta (text), <stem>.spec.net,
  // and for dual models <stem>.ind.net.
  void save(const std::string& stem) const {
    std::ofstream meta(stem + ".meta");
    if (!meta) throw DataError("model: cannot write " + stem + ".meta");
    meta << meta_text();
    if (!meta) throw DataError("model: short write on " + stem + ".meta");
    meta.close();
    spec_path_.save(stem + ".spec.net");
    if (ind_path_) ind_path_->save(stem + ".ind.net");
  }

  static SpeechModel load(const std::string& stem) {
    std::ifstream meta(stem + ".meta");
    if (!meta) throw DataError("model: cannot open " + stem + ".meta");
    std::string line, kind_s, rule_s = "product", window_s;
    if (!std::getline(meta, line) || line != "nspeech-model v1")
      throw DataError("model: bad meta magic in " + stem + ".meta");
    while (std::getline(meta, line)) {
      std::istringstream ls(trim(line));
      std::string key;
      ls >> key;
      if (key.empty() || key[0] == '#') continue;
      if (key == "kind")
        ls >> kind_s;
      else if (key == "rule")
        ls >> rule_s;
      else if (key == "window")
        ls >> window_s;
      else
        throw DataError("model: unknown meta key '" + key + "' in " + stem + ".meta");
    }
    if (kind_s.empty()) throw DataError("model: meta missing kind in " + stem + ".meta");
    ModelKind kind = parse_model_kind(kind_s);
    NsWindow win = window_s.empty() ? NsWindow{} : parse_ns_window(window_s);

    Cnn spec = Cnn::load(stem + ".spec.net");
    SpeechModel m(kind, spec.arch(), parse_combination_rule(rule_s), win, /*seed=*/0);
    m.spec_path_ = std::move(spec);
    if (kind == ModelKind::kNcnn) {
      Cnn ind = Cnn::load(stem + ".ind.net");
      if (emit_architecture(ind.arch()) != emit_architecture(m.spec_path_.arch()))
        throw DataError("model: path schedules disagree in checkpoint " + stem);
      m.ind_path_ = std::move(ind);
    }
    return m;
  }

 private:
  std::string meta_text() const {
    std::ostringstream out;
    out << "nspeech-model v1\n";
    out << "kind " << model_kind_name(kind_) << "\n";
    if (kind_ == ModelKind::kNcnn) {
      out << "rule " << combination_rule_name(rule_) << "\n";
      out << "window " << window_.t << "x" << window_.f << "\n";
    }
    return out.str();
  }

  ModelKind kind_;
  CombinationRule rule_;
  NsWindow window_;
  Cnn spec_path_;
  std::optional<Cnn> ind_path_;
};

}  // namespace nspeech
