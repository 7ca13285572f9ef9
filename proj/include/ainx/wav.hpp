#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ainx::io {

/// Mono audio in [-1, 1]. Multi-channel input is averaged per frame.
struct WavClip {
  std::vector<float> samples;
  double sample_rate = 0.0;
  std::filesystem::path source_path;
};

enum class WavEncoding { pcm16, float32 };

/// Reads RIFF/WAVE PCM 16-bit or IEEE float 32-bit (plain or
/// WAVE_FORMAT_EXTENSIBLE). Malformed input throws FormatError with the
/// byte offset; other codecs throw UnsupportedFormatError naming the tag.
WavClip decode_wav(std::span<const char> bytes);
WavClip read_wav(const std::filesystem::path& path);

/// `samples` are interleaved when channels > 1. PCM16 values are clamped.
std::vector<char> encode_wav(std::span<const float> samples, double sample_rate, WavEncoding encoding,
                             unsigned channels = 1);
void write_wav(const std::filesystem::path& path, std::span<const float> samples, double sample_rate,
               WavEncoding encoding = WavEncoding::pcm16, unsigned channels = 1);

}  // namespace ainx::io
