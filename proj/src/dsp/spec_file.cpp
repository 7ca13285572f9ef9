#include "ainx/spec_file.hpp"

#include <limits>
#include <string>

#include "ainx/binary_io.hpp"

namespace ainx::dsp {

namespace {
constexpr char kMagic[] = "AINXSPEC";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;
}  // namespace

std::vector<char> encode_spec(const Matrix& values) {
  if (values.rows > std::numeric_limits<std::uint32_t>::max() ||
      values.cols > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("spectrogram too large for AINXSPEC");
  }
  io::ByteWriter w;
  w.put_bytes({kMagic, kMagicSize});
  w.put<std::uint16_t>(kSpecFileVersion);
  w.put<std::uint32_t>(std::uint32_t(values.rows));
  w.put<std::uint32_t>(std::uint32_t(values.cols));
  w.put_floats(values.values);
  return w.bytes();
}

Matrix decode_spec(std::span<const char> bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(kMagicSize, "magic") != std::string_view(kMagic, kMagicSize)) {
    throw FormatError("bad AINXSPEC magic", 0);
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kSpecFileVersion) {
    throw UnsupportedFormatError("AINXSPEC version " + std::to_string(version) + " is not supported");
  }
  const auto rows = r.get<std::uint32_t>("frame count");
  const auto cols = r.get<std::uint32_t>("bin count");
  if (std::uint64_t(rows) * cols * sizeof(float) != r.remaining()) {
    throw FormatError("AINXSPEC payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(std::uint64_t(rows) * cols * sizeof(float)),
                      r.position());
  }
  Matrix m(rows, cols);
  r.get_floats(m.values, "values");
  return m;
}

void write_spec(const std::filesystem::path& path, const Matrix& values) {
  io::write_file_atomic(path, encode_spec(values));
}

Matrix read_spec(const std::filesystem::path& path) { return decode_spec(io::read_file(path)); }

}  // namespace ainx::dsp
