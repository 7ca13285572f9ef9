#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ainx/dsp.hpp"

namespace ainx::dsp {

/// AINXSPEC: "AINXSPEC", u16 version, u32 T, u32 F, T*F f32 row-major.
inline constexpr std::uint16_t kSpecFileVersion = 1;

std::vector<char> encode_spec(const Matrix& values);
/// Throws FormatError (with byte offset) or UnsupportedFormatError.
Matrix decode_spec(std::span<const char> bytes);

void write_spec(const std::filesystem::path& path, const Matrix& values);
Matrix read_spec(const std::filesystem::path& path);

}  // namespace ainx::dsp
