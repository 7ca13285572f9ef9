#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ainx {

/// Malformed binary or text input. `offset` is the byte offset (binary
/// formats) or 1-based line number (text formats) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Well-formed input in a codec or version this build does not read.
class UnsupportedFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ainx
