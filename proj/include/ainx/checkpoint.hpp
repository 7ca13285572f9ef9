#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ainx/model.hpp"
#include "ainx/optim.hpp"

namespace ainx::io {

/// AINX1: "AINX1", u16 version, u32 metadata byte count, UTF-8 key=value
/// lines, u32 tensor count, then per tensor: u16 name length, name, u8 rank,
/// u32 extents, little-endian f32 data.
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Optimizer velocities are stored as tensors named with this prefix.
inline constexpr std::string_view kVelocityPrefix = "optim.velocity.";

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<TensorRecord> tensors;

  std::optional<std::string> meta(const std::string& key) const;
  const TensorRecord* find(const std::string& name) const;
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError (with byte offset) or UnsupportedFormatError.
Checkpoint decode_checkpoint(std::span<const char> bytes);

/// Model state, then optimizer velocities (if any), with `metadata`.
Checkpoint make_checkpoint(const model::Model& model, const SgdMomentum* optimizer,
                           std::vector<std::pair<std::string, std::string>> metadata);

void save_checkpoint(const std::filesystem::path& path, const model::Model& model, const SgdMomentum* optimizer,
                     std::vector<std::pair<std::string, std::string>> metadata);
Checkpoint read_checkpoint(const std::filesystem::path& path);

struct LoadOptions {
  /// Skip `head.*` tensors (and their velocities) so a checkpoint trained
  /// with another class count can seed a freshly replaced head.
  bool reset_head = false;
};

/// Copies tensors into `model` (and velocities into `optimizer`). Any
/// missing, unexpected or mis-shaped tensor raises std::invalid_argument
/// listing every difference; the model is untouched in that case.
void load_into(const Checkpoint& ckpt, model::Model& model, SgdMomentum* optimizer = nullptr,
               const LoadOptions& options = {});

/// FNV-1a over the raw bytes of a tensor.
std::uint64_t checksum(std::span<const float> data);

}  // namespace ainx::io
