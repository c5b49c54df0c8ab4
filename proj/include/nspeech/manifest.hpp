#pragma once

// Corpus manifests: one record per line, tab-separated. Each record names an
// utterance, the clean audio file backing it, its class label, the split it
// belongs to, and the noise condition (family + SNR) under which the feature
// pipeline should present it. Parsing is the exact inverse of emission.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nspeech/common.hpp"

namespace nspeech {

enum class Split { kTrainClean, kTrainNoisy, kTestA, kTestB, kTestC };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrainClean: return "train_clean";
    case Split::kTrainNoisy: return "train_noisy";
    case Split::kTestA: return "test_A";
    case Split::kTestB: return "test_B";
    case Split::kTestC: return "test_C";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train_clean") return Split::kTrainClean;
  if (s == "train_noisy") return Split::kTrainNoisy;
  if (s == "test_A") return Split::kTestA;
  if (s == "test_B") return Split::kTestB;
  if (s == "test_C") return Split::kTestC;
  throw DataError("manifest: unknown split '" + s + "'");
}

inline bool is_test_split(Split s) {
  return s == Split::kTestA || s == Split::kTestB || s == Split::kTestC;
}

// The SNR grid used throughout: six test points, of which the top four also
// serve as multi-condition training points.
inline const std::vector<double>& allowed_snrs() {
  static const std::vector<double> k{20.0, 15.0, 10.0, 5.0, 0.0, -5.0};
  return k;
}

inline bool snr_allowed(double snr) {
  for (double s : allowed_snrs())
    if (s == snr) return true;
  return false;
}

struct ManifestEntry {
  std::string utterance_id;
  std::string audio_path;
  int label = 0;
  Split split = Split::kTrainClean;
  std::string noise_type = "clean";  // noise family, or "clean"
  double snr_db = 0.0;
  bool has_snr = false;

  bool clean() const { return noise_type == "clean"; }

  void validate() const {
    if (utterance_id.empty() || audio_path.empty())
      throw DataError("manifest: empty utterance id or audio path");
    for (const std::string* f : {&utterance_id, &audio_path, &noise_type})
      if (f->find_first_of("\t\n") != std::string::npos)
        throw DataError("manifest: field contains tab or newline: '" + *f + "'");
    if (label < 0) throw DataError("manifest: negative label");
    if (clean() && has_snr)
      throw DataError("manifest: clean entry '" + utterance_id + "' carries an SNR");
    if (!clean()) {
      if (!has_snr) throw DataError("manifest: noisy entry '" + utterance_id + "' lacks an SNR");
      if (!snr_allowed(snr_db))
        throw DataError("manifest: SNR " + format_double(snr_db) + " outside the allowed grid");
    }
  }

  bool operator==(const ManifestEntry& o) const {
    return utterance_id == o.utterance_id && audio_path == o.audio_path && label == o.label &&
           split == o.split && noise_type == o.noise_type && has_snr == o.has_snr &&
           (!has_snr || snr_db == o.snr_db);
  }
};

inline std::string emit_entry(const ManifestEntry& e) {
  e.validate();
  std::string line = e.utterance_id;
  line += '\t';
  line += e.audio_path;
  line += '\t';
  line += std::to_string(e.label);
  line += '\t';
  line += split_name(e.split);
  line += '\t';
  line += e.noise_type;
  line += '\t';
  line += e.has_snr ? format_double(e.snr_db) : std::string("-");
  return line;
}

inline ManifestEntry parse_entry(const std::string& line) {
  std::vector<std::string> f = split(line, '\t');
  if (f.size() != 6)
    throw DataError("manifest: expected 6 tab-separated fields, got " + std::to_string(f.size()));
  ManifestEntry e;
  e.utterance_id = f[0];
  e.audio_path = f[1];
  {
    int v = 0;
    auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), v);
    if (ec != std::errc() || p != f[2].data() + f[2].size())
      throw DataError("manifest: bad label '" + f[2] + "'");
    e.label = v;
  }
  e.split = parse_split(f[3]);
  e.noise_type = f[4];
  if (f[5] == "-") {
    e.has_snr = false;
  } else {
    double v = 0.0;
    auto [p, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), v);
    if (ec != std::errc() || p != f[5].data() + f[5].size())
      throw DataError("manifest: bad SNR '" + f[5] + "'");
    e.snr_db = v;
    e.has_snr = true;
  }
  e.validate();
  return e;
}

inline std::string emit_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const ManifestEntry& e : entries) {
    out += emit_entry(e);
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("manifest: cannot open for writing: " + path);
  f << emit_manifest(entries);
  if (!f) throw DataError("manifest: write failed: " + path);
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("manifest: cannot open: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_entry(line));
    } catch (const DataError& err) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return out;
}

inline std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& entries,
                                               Split split) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

inline uint64_t manifest_content_hash(const std::vector<ManifestEntry>& entries) {
  std::string text = emit_manifest(entries);
  return fnv1a64(text);
}

}  // namespace nspeech
