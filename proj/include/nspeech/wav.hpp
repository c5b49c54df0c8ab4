#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nspeech/common.hpp"

namespace nspeech {

// Mono audio, samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline double rms(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

namespace detail {

inline uint32_t read_u32le(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint16_t read_u16le(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace detail

// Reads a PCM-16 WAV file. Stereo input is downmixed by channel average.
// Samples are normalized to [-1, 1] by dividing by 32768.
inline AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("wav: not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const unsigned char* ch = bytes.data() + off;
    uint32_t len = detail::read_u32le(ch + 4);
    const unsigned char* body = ch + 8;
    if (off + 8 + len > bytes.size()) len = static_cast<uint32_t>(bytes.size() - off - 8);
    if (std::memcmp(ch, "fmt ", 4) == 0 && len >= 16) {
      format = detail::read_u16le(body);
      channels = detail::read_u16le(body + 2);
      rate = detail::read_u32le(body + 4);
      bits = detail::read_u16le(body + 14);
      have_fmt = true;
    } else if (std::memcmp(ch, "data", 4) == 0) {
      data_ptr = body;
      data_len = len;
    }
    off += 8 + len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw DataError("wav: missing fmt chunk: " + path);
  if (format != 1 || bits != 16)
    throw DataError("wav: unsupported encoding (need PCM 16-bit), got format=" + std::to_string(format) +
                    " bits=" + std::to_string(bits) + ": " + path);
  if (channels < 1) throw DataError("wav: invalid channel count: " + path);
  if (data_ptr == nullptr || data_len == 0) throw DataError("wav: zero-length payload: " + path);

  size_t frame_count = data_len / (2 * channels);
  if (frame_count == 0) throw DataError("wav: zero-length payload: " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frame_count);
  for (size_t i = 0; i < frame_count; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = data_ptr + (i * channels + c) * 2;
      int16_t raw = static_cast<int16_t>(uint16_t(s[0]) | uint16_t(s[1]) << 8);
      acc += static_cast<double>(raw);
    }
    clip.samples[i] = acc / channels / 32768.0;
  }
  return clip;
}

// Writes mono PCM-16. Samples are clamped to [-1, 1], scaled by 32768 (the
// inverse of read_wav's normalization, so round trips stay within half a
// quantization step), and capped at the int16 range.
inline void write_wav(const std::string& path, const AudioClip& clip) {
  if (clip.samples.empty()) throw DataError("wav: refusing to write empty clip: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot open for write: " + path);

  uint32_t data_len = static_cast<uint32_t>(clip.samples.size() * 2);
  uint32_t riff_len = 36 + data_len;
  uint32_t rate = static_cast<uint32_t>(clip.sample_rate);
  uint32_t byte_rate = rate * 2;

  auto w16 = [&](uint16_t x) { out.put(char(x & 0xff)).put(char(x >> 8)); };
  auto w32 = [&](uint32_t x) {
    out.put(char(x & 0xff)).put(char((x >> 8) & 0xff)).put(char((x >> 16) & 0xff)).put(char(x >> 24));
  };

  out.write("RIFF", 4);
  w32(riff_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  w32(16);
  w16(1);   // PCM
  w16(1);   // mono
  w32(rate);
  w32(byte_rate);
  w16(2);   // block align
  w16(16);  // bits
  out.write("data", 4);
  w32(data_len);
  for (double x : clip.samples) {
    double c = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
    long q = std::lrint(c * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    w16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) throw DataError("wav: write failed: " + path);
}

}  // namespace nspeech
