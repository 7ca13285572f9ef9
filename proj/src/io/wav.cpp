#include "ainx/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "ainx/binary_io.hpp"

namespace ainx::io {

namespace {

constexpr std::uint16_t kPcm = 1;
constexpr std::uint16_t kFloat = 3;
constexpr std::uint16_t kExtensible = 0xFFFE;

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

std::string hex_tag(std::uint16_t tag) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%04X", unsigned(tag));
  return buf;
}

Format parse_fmt(ByteReader& r, std::uint32_t size, std::size_t chunk_offset) {
  if (size < 16) throw FormatError("fmt chunk shorter than 16 bytes", chunk_offset);
  Format f;
  f.tag = r.get<std::uint16_t>("format tag");
  f.channels = r.get<std::uint16_t>("channel count");
  f.rate = r.get<std::uint32_t>("sample rate");
  r.get<std::uint32_t>("byte rate");
  f.block_align = r.get<std::uint16_t>("block align");
  f.bits = r.get<std::uint16_t>("bits per sample");
  std::uint32_t consumed = 16;
  if (f.tag == kExtensible) {
    if (size < 40) throw FormatError("extensible fmt chunk shorter than 40 bytes", chunk_offset);
    r.get<std::uint16_t>("extension size");
    r.get<std::uint16_t>("valid bits");
    r.get<std::uint32_t>("channel mask");
    // The sub-format GUID starts with the effective format tag.
    f.tag = r.get<std::uint16_t>("sub-format tag");
    r.get_bytes(14, "sub-format GUID");
    consumed = 40;
  }
  r.get_bytes(size - consumed, "fmt chunk tail");
  return f;
}

}  // namespace

WavClip decode_wav(std::span<const char> bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4, "RIFF id") != "RIFF") throw FormatError("missing RIFF id", 0);
  r.get<std::uint32_t>("RIFF size");
  if (r.get_bytes(4, "WAVE id") != "WAVE") throw FormatError("missing WAVE id", 8);

  std::optional<Format> fmt;
  while (r.remaining() > 0) {
    const std::size_t chunk_offset = r.position();
    const std::string id = r.get_bytes(4, "chunk id");
    const auto size = r.get<std::uint32_t>("chunk size");
    if (id == "fmt ") {
      fmt = parse_fmt(r, size, chunk_offset);
    } else if (id == "data") {
      if (!fmt) throw FormatError("data chunk before fmt chunk", chunk_offset);
      const Format& f = *fmt;
      const bool pcm16 = f.tag == kPcm && f.bits == 16;
      const bool float32 = f.tag == kFloat && f.bits == 32;
      if (!pcm16 && !float32) {
        throw UnsupportedFormatError("unsupported WAV format tag " + hex_tag(f.tag) + " with " +
                                     std::to_string(f.bits) + " bits per sample (expected PCM 16-bit or float 32-bit)");
      }
      if (f.channels == 0) throw FormatError("zero channels", chunk_offset);
      if (f.rate == 0) throw FormatError("zero sample rate", chunk_offset);
      const std::size_t frame_bytes = std::size_t(f.channels) * (f.bits / 8);
      if (f.block_align != frame_bytes) throw FormatError("block align does not match channels x sample size", chunk_offset);
      if (size > r.remaining()) throw FormatError("data chunk runs past end of file", r.position());
      if (size % frame_bytes != 0) throw FormatError("data chunk is not a whole number of frames", r.position());
      const std::size_t frames = size / frame_bytes;
      if (frames == 0) throw FormatError("no audio frames", r.position());
      WavClip clip;
      clip.sample_rate = f.rate;
      clip.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0;
        for (unsigned c = 0; c < f.channels; ++c) {
          acc += pcm16 ? double(r.get<std::int16_t>("sample")) / 32768.0 : double(r.get<float>("sample"));
        }
        clip.samples[i] = float(acc / f.channels);
      }
      return clip;
    } else {
      r.get_bytes(size, "chunk body");
    }
    if (size % 2 == 1 && r.remaining() > 0) r.get<std::uint8_t>("chunk pad byte");
  }
  throw FormatError(fmt ? "no data chunk" : "no fmt chunk", r.position());
}

WavClip read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    WavClip clip = decode_wav(bytes);
    clip.source_path = path;
    return clip;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

std::vector<char> encode_wav(std::span<const float> samples, double sample_rate, WavEncoding encoding,
                             unsigned channels) {
  if (channels == 0 || samples.size() % channels != 0) {
    throw std::invalid_argument("encode_wav: sample count must be a multiple of the channel count");
  }
  if (!(sample_rate > 0)) throw std::invalid_argument("encode_wav: sample rate must be positive");
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = std::uint32_t(samples.size() * (bits / 8));
  const std::uint16_t align = std::uint16_t(channels * (bits / 8));
  const auto rate = std::uint32_t(std::lround(sample_rate));
  ByteWriter w;
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVEfmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(encoding == WavEncoding::pcm16 ? kPcm : kFloat);
  w.put<std::uint16_t>(std::uint16_t(channels));
  w.put<std::uint32_t>(rate);
  w.put<std::uint32_t>(rate * align);
  w.put<std::uint16_t>(align);
  w.put<std::uint16_t>(bits);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  for (float s : samples) {
    if (encoding == WavEncoding::pcm16) {
      w.put<std::int16_t>(std::int16_t(std::clamp(std::lround(double(s) * 32768.0), -32768L, 32767L)));
    } else {
      w.put<float>(s);
    }
  }
  return w.bytes();
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, double sample_rate,
               WavEncoding encoding, unsigned channels) {
  write_file_atomic(path, encode_wav(samples, sample_rate, encoding, channels));
}

}  // namespace ainx::io
