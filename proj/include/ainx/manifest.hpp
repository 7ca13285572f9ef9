#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ainx/train.hpp"

namespace ainx::io {

struct ManifestRow {
  std::filesystem::path audio_path;  // resolved against the manifest directory
  std::int32_t label = 0;
  std::optional<double> start_s;
  std::optional<double> end_s;
  std::size_t line = 0;  // 1-based source line
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> class_names;
};

/// CSV with header `path,label,start,end` (start/end may be empty). An
/// optional `#classes=a,b,...` line before the header names the classes;
/// otherwise they are "0".."max label". Other `#` lines are comments.
/// Errors throw FormatError carrying the 1-based line number.
Manifest parse_manifest_text(std::string_view text, const std::filesystem::path& base_dir);
Manifest parse_manifest(const std::filesystem::path& path);

/// Inverse of parse_manifest_text; paths are written relative to base_dir
/// when possible.
std::string format_manifest(const Manifest& manifest, const std::filesystem::path& base_dir);

/// Reads every row's audio and applies its [start, end) window.
train::Dataset load_dataset(const Manifest& manifest);

}  // namespace ainx::io
