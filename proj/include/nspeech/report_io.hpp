#pragma once

// Report artifacts: a machine-readable CSV (one row per evaluation cell,
// metadata echoed as '#' comments, exact round trip) and human-readable text
// tables (per-set accuracy grids with SNR rows and noise-family columns,
// per-set and overall averages, and a word-error-rate-by-SNR summary).

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nspeech/common.hpp"
#include "nspeech/evaluate.hpp"
#include "nspeech/manifest.hpp"

namespace nspeech {

inline const char* kReportCsvHeader = "model,train_condition,test_set,noise_type,snr_db,accuracy,n,wer";

inline std::string emit_report_csv(const EvalReport& report) {
  std::string out;
  for (const auto& [key, value] : report.metadata) out += "# " + key + " = " + value + "\n";
  out += kReportCsvHeader;
  out += '\n';
  for (const EvalCell& c : report.cells) {
    double acc = c.accuracy();
    out += c.model + "," + c.train_condition + "," + c.test_set + "," + c.noise_type + ",";
    out += c.has_snr ? format_double(c.snr_db) : std::string("-");
    out += "," + format_double(acc) + "," + std::to_string(c.total) + "," +
           format_double(100.0 - acc) + "\n";
  }
  return out;
}

inline EvalReport parse_report_csv(const std::string& text) {
  EvalReport report;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      // No trimming: empty values ('# key = ') and values with surrounding
      // whitespace must survive the round trip byte for byte.
      std::string body = line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1);
      size_t eq = body.find(" = ");
      if (eq == std::string::npos)
        throw DataError("report csv: bad metadata line " + std::to_string(line_no));
      report.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 3));
      continue;
    }
    if (!header_seen) {
      if (line != kReportCsvHeader)
        throw DataError("report csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split(line, ',');
    if (f.size() != 8) throw DataError("report csv: expected 8 fields at line " + std::to_string(line_no));
    EvalCell c;
    c.model = f[0];
    c.train_condition = f[1];
    c.test_set = f[2];
    c.noise_type = f[3];
    if (f[4] == "-") {
      c.has_snr = false;
    } else {
      auto [p, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), c.snr_db);
      if (ec != std::errc() || p != f[4].data() + f[4].size())
        throw DataError("report csv: bad snr at line " + std::to_string(line_no));
      c.has_snr = true;
    }
    double acc = 0.0;
    {
      auto [p, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), acc);
      if (ec != std::errc() || p != f[5].data() + f[5].size())
        throw DataError("report csv: bad accuracy at line " + std::to_string(line_no));
    }
    {
      auto [p, ec] = std::from_chars(f[6].data(), f[6].data() + f[6].size(), c.total);
      if (ec != std::errc() || p != f[6].data() + f[6].size())
        throw DataError("report csv: bad count at line " + std::to_string(line_no));
    }
    if (c.total == 0) throw DataError("report csv: empty cell at line " + std::to_string(line_no));
    c.correct = static_cast<size_t>(std::llround(acc * static_cast<double>(c.total) / 100.0));
    if (std::fabs(c.accuracy() - acc) > 1e-9)
      throw DataError("report csv: accuracy/count mismatch at line " + std::to_string(line_no));
    double wer = 0.0;
    {
      auto [p, ec] = std::from_chars(f[7].data(), f[7].data() + f[7].size(), wer);
      if (ec != std::errc() || p != f[7].data() + f[7].size())
        throw DataError("report csv: bad wer at line " + std::to_string(line_no));
    }
    if (wer != 100.0 - acc)
      throw DataError("report csv: wer is not 100 - accuracy at line " + std::to_string(line_no));
    report.cells.push_back(c);
  }
  if (!header_seen) throw DataError("report csv: missing header");
  return report;
}

inline void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("report: cannot open for writing: " + path);
  f << emit_report_csv(report);
  if (!f) throw DataError("report: write failed: " + path);
}

inline EvalReport read_report_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("report: cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_report_csv(buf.str());
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void pad_to(std::string& line, size_t width) {
  if (line.size() < width) line.append(width - line.size(), ' ');
}

}  // namespace detail

// One accuracy grid per (model, condition, set): SNR rows (clean first),
// noise-family columns, row means, and the per-family/per-set averages over
// noisy rows.
inline std::string render_report_text(const EvalReport& report) {
  std::ostringstream out;
  const size_t col = 12;
  for (const auto& [model, condition] : report.model_conditions()) {
    for (const std::string& set : report.test_sets(model, condition)) {
      // Families in this set, preserving cell order (clean excluded).
      std::vector<std::string> families;
      std::vector<double> snrs;
      for (const EvalCell& c : report.cells) {
        if (c.model != model || c.train_condition != condition || c.test_set != set || !c.has_snr)
          continue;
        if (std::find(families.begin(), families.end(), c.noise_type) == families.end())
          families.push_back(c.noise_type);
        if (std::find(snrs.begin(), snrs.end(), c.snr_db) == snrs.end()) snrs.push_back(c.snr_db);
      }
      auto cell_at = [&](const std::string& family, double snr) -> const EvalCell* {
        for (const EvalCell& c : report.cells)
          if (c.model == model && c.train_condition == condition && c.test_set == set &&
              c.has_snr && c.noise_type == family && c.snr_db == snr)
            return &c;
        return nullptr;
      };
      const EvalCell* clean_cell = nullptr;
      for (const EvalCell& c : report.cells)
        if (c.model == model && c.train_condition == condition && c.test_set == set && !c.has_snr)
          clean_cell = &c;

      out << "== " << model << ", " << condition << " training, test set " << set
          << " (accuracy %) ==\n";
      std::string head = "snr_db";
      detail::pad_to(head, col);
      for (const std::string& fam : families) {
        std::string h = fam;
        detail::pad_to(h, col);
        head += h;
      }
      head += "mean";
      out << head << "\n";

      if (clean_cell) {
        std::string line = "clean";
        detail::pad_to(line, col);
        std::string v = detail::fixed2(clean_cell->accuracy());
        detail::pad_to(v, col * families.size());
        out << line << v << detail::fixed2(clean_cell->accuracy()) << "\n";
      }
      for (double snr : snrs) {
        std::string line = format_double(snr);
        detail::pad_to(line, col);
        double sum = 0.0;
        for (const std::string& fam : families) {
          const EvalCell* c = cell_at(fam, snr);
          if (!c) throw DataError("report: missing cell " + fam + "@" + format_double(snr));
          std::string v = detail::fixed2(c->accuracy());
          detail::pad_to(v, col);
          line += v;
          sum += c->accuracy();
        }
        out << line << detail::fixed2(sum / families.size()) << "\n";
      }
      std::string avg_line = "average";
      detail::pad_to(avg_line, col);
      for (const std::string& fam : families) {
        double sum = 0.0;
        for (double snr : snrs) sum += cell_at(fam, snr)->accuracy();
        std::string v = detail::fixed2(sum / snrs.size());
        detail::pad_to(v, col);
        avg_line += v;
      }
      out << avg_line << detail::fixed2(report.set_average(model, condition, set)) << "\n\n";
    }

    out << "== " << model << ", " << condition << " training: set averages ==\n";
    for (const std::string& set : report.test_sets(model, condition))
      out << "  set " << set << ": " << detail::fixed2(report.set_average(model, condition, set))
          << "\n";
    out << "  overall: " << detail::fixed2(report.overall_average(model, condition)) << "\n\n";

    // Word error rate by SNR over all noisy cells (Fig. 4-style summary).
    std::vector<double> snrs;
    for (const EvalCell& c : report.cells)
      if (c.model == model && c.train_condition == condition && c.has_snr &&
          std::find(snrs.begin(), snrs.end(), c.snr_db) == snrs.end())
        snrs.push_back(c.snr_db);
    out << "== " << model << ", " << condition << " training: word error rate by SNR ==\n";
    for (double snr : snrs)
      out << "  " << format_double(snr) << " dB: "
          << detail::fixed2(100.0 - report.snr_average(model, condition, snr)) << "\n";
    out << "\n";
  }
  return out.str();
}

inline void write_report_text(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("report: cannot open for writing: " + path);
  f << render_report_text(report);
  if (!f) throw DataError("report: write failed: " + path);
}

}  // namespace nspeech
