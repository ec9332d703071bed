#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xtts/audio.hpp"
#include "xtts/binio.hpp"
#include "xtts/error.hpp"

namespace xtts::audio {
namespace {

std::uint16_t le16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t le32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Waveform wav_decode(std::string_view b, std::optional<int> expected_rate) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE")
    throw Error(ErrorKind::Format, "malformed WAV header: missing RIFF/WAVE tags");
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::string_view data;
  bool have_data = false;
  while (pos + 8 <= b.size()) {
    const auto id = b.substr(pos, 4);
    const std::uint32_t size = le32(b, pos + 4);
    pos += 8;
    if (size > b.size() - pos) throw Error(ErrorKind::Format, "malformed WAV header: chunk overruns file");
    if (id == "fmt ") {
      if (size < 16) throw Error(ErrorKind::Format, "malformed WAV header: short fmt chunk");
      const std::uint16_t format = le16(b, pos);
      channels = le16(b, pos + 2);
      rate = le32(b, pos + 4);
      bits = le16(b, pos + 14);
      if (format != 1 || bits != 16)
        throw Error(ErrorKind::Format, "unsupported encoding: format " + std::to_string(format) +
                                           ", " + std::to_string(bits) + " bits (need PCM 16-bit)");
      if (channels != 1)
        throw Error(ErrorKind::Format, "unsupported channel count " + std::to_string(channels));
      have_fmt = true;
    } else if (id == "data") {
      data = b.substr(pos, size);
      have_data = true;
    }
    pos += size + (size & 1);
  }
  if (!have_fmt || !have_data) throw Error(ErrorKind::Format, "malformed WAV header: missing fmt or data chunk");
  if (rate == 0) throw Error(ErrorKind::Format, "malformed WAV header: zero sample rate");
  if (expected_rate && static_cast<int>(rate) != *expected_rate)
    throw Error(ErrorKind::Data, "sample rate mismatch: file has " + std::to_string(rate) +
                                     " Hz, config expects " + std::to_string(*expected_rate) + " Hz");
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(data.size() / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<std::int16_t>(le16(data, 2 * i)) / 32768.0;
  return w;
}

Waveform wav_read(const std::filesystem::path& path, std::optional<int> expected_rate) {
  try {
    return wav_decode(slurp(path), expected_rate);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string wav_encode(const Waveform& w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::string out = "RIFF";
  binio::put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  binio::put_u32(out, 16);
  put16(out, 1);
  put16(out, 1);
  binio::put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  binio::put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  binio::put_u32(out, 2 * n);
  for (double s : w.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void wav_write(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const auto bytes = wav_encode(w);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string encode_mel(const Matrix& frames) {
  std::string out = "MEL1";
  binio::put_u32(out, static_cast<std::uint32_t>(frames.rows));
  binio::put_u32(out, static_cast<std::uint32_t>(frames.cols));
  for (double v : frames.data) binio::put_f32(out, static_cast<float>(v));
  return out;
}

Matrix decode_mel(std::string_view bytes) {
  binio::Reader r(bytes, "mel file");
  if (r.bytes(4) != "MEL1") throw Error(ErrorKind::Format, "mel file: bad magic");
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (r.remaining() != rows * cols * 4)
    throw Error(ErrorKind::Format, "mel file: payload size does not match header");
  Matrix m(rows, cols);
  for (double& v : m.data) v = r.f32();
  return m;
}

void write_mel(const std::filesystem::path& path, const Matrix& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const auto bytes = encode_mel(frames);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Matrix read_mel(const std::filesystem::path& path) { return decode_mel(slurp(path)); }

}  // namespace xtts::audio
