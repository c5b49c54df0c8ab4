#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "nspeech/common.hpp"

namespace nspeech {

// One-line text header followed by the flat row-major grid as little-endian
// 64-bit doubles. The header is the interchange point with external tooling,
// keep it stable.
struct GridFile {
  Grid grid;
  std::string kind = "grid";
  bool degenerate = false;
};

inline void write_grid(const std::string& path, const Grid& g, const std::string& kind,
                       bool degenerate = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("grid: cannot open for write: " + path);
  out << "nspeech-grid v1 rows=" << g.rows << " cols=" << g.cols << " dtype=f64 kind=" << kind
      << " degenerate=" << (degenerate ? 1 : 0) << "\n";
  out.write(reinterpret_cast<const char*>(g.v.data()), static_cast<std::streamsize>(g.v.size() * sizeof(double)));
  if (!out) throw DataError("grid: write failed: " + path);
}

inline GridFile read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("grid: cannot open: " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("grid: missing header: " + path);

  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "nspeech-grid" || version != "v1") throw DataError("grid: bad header magic: " + path);

  GridFile f;
  int rows = -1, cols = -1;
  std::string tok;
  while (hs >> tok) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos) throw DataError("grid: malformed header token '" + tok + "': " + path);
    std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "rows") rows = std::stoi(val);
    else if (key == "cols") cols = std::stoi(val);
    else if (key == "dtype") {
      if (val != "f64") throw DataError("grid: unsupported dtype " + val + ": " + path);
    } else if (key == "kind") f.kind = val;
    else if (key == "degenerate") f.degenerate = (val == "1");
  }
  if (rows <= 0 || cols <= 0) throw DataError("grid: missing or invalid dims: " + path);

  f.grid = Grid(rows, cols);
  in.read(reinterpret_cast<char*>(f.grid.v.data()), static_cast<std::streamsize>(f.grid.v.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(f.grid.v.size() * sizeof(double)))
    throw DataError("grid: truncated payload: " + path);
  return f;
}

// CSV rendering for inspection; shortest round-trip formatting per cell.
inline void write_grid_csv(const std::string& path, const Grid& g) {
  std::ofstream out(path);
  if (!out) throw DataError("grid: cannot open for write: " + path);
  char buf[64];
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      auto res = std::to_chars(buf, buf + sizeof(buf), g.at(r, c));
      out.write(buf, res.ptr - buf);
      out.put(c + 1 == g.cols ? '\n' : ',');
    }
  }
  if (!out) throw DataError("grid: write failed: " + path);
}

// 8-bit greyscale PGM, linear min-max scaled for display. A flat grid renders
// as all-black.
inline void write_grid_pgm(const std::string& path, const Grid& g) {
  double lo = g.v.empty() ? 0.0 : g.v[0], hi = lo;
  for (double x : g.v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  double span = hi - lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("grid: cannot open for write: " + path);
  out << "P5\n" << g.cols << " " << g.rows << "\n255\n";
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      int px = span > 0.0 ? static_cast<int>(std::lround((g.at(r, c) - lo) / span * 255.0)) : 0;
      out.put(static_cast<char>(px < 0 ? 0 : (px > 255 ? 255 : px)));
    }
  if (!out) throw DataError("grid: write failed: " + path);
}

}  // namespace nspeech
