#include "ainx/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <map>
#include <sstream>

#include "ainx/binary_io.hpp"

namespace ainx::io {

namespace {

constexpr std::string_view kMagic = "AINX1";

std::string shape_text(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

bool is_head(const std::string& name) {
  return name.starts_with("head.") || name.starts_with(std::string(kVelocityPrefix) + "head.");
}

}  // namespace

std::optional<std::string> Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kCheckpointVersion);
  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint metadata '" + k + "' contains '=' in the key or a newline");
    }
    meta += k + "=" + v + "\n";
  }
  w.put<std::uint32_t>(std::uint32_t(meta.size()));
  w.put_bytes(meta);
  w.put<std::uint32_t>(std::uint32_t(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.empty() || t.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("checkpoint tensor name length out of range");
    }
    if (t.shape.size() > 255) throw std::invalid_argument("checkpoint tensor rank exceeds 255: " + t.name);
    if (shape_numel(t.shape) != t.data.size()) {
      throw std::invalid_argument("checkpoint tensor " + t.name + " data does not match its shape");
    }
    w.put<std::uint16_t>(std::uint16_t(t.name.size()));
    w.put_bytes(t.name);
    w.put<std::uint8_t>(std::uint8_t(t.shape.size()));
    for (auto d : t.shape) w.put<std::uint32_t>(std::uint32_t(d));
    w.put_floats(t.data);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const char> bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(kMagic.size(), "magic") != kMagic) throw FormatError("bad checkpoint magic (expected AINX1)", 0);
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw UnsupportedFormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const auto meta_len = r.get<std::uint32_t>("metadata length");
  const std::size_t meta_offset = r.position();
  const std::string meta = r.get_bytes(meta_len, "metadata");
  std::size_t pos = 0;
  while (pos < meta.size()) {
    const auto nl = meta.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("metadata line without newline", meta_offset + pos);
    const std::string line = meta.substr(pos, nl - pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("metadata line without '='", meta_offset + pos);
    ckpt.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    pos = nl + 1;
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t offset = r.position();
    TensorRecord t;
    const auto name_len = r.get<std::uint16_t>("tensor name length");
    if (name_len == 0) throw FormatError("empty tensor name", offset);
    t.name = r.get_bytes(name_len, "tensor name");
    if (seen[t.name]) throw FormatError("duplicate tensor " + t.name, offset);
    seen[t.name] = true;
    const auto rank = r.get<std::uint8_t>("tensor rank");
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto extent = r.get<std::uint32_t>("tensor extent");
      t.shape.push_back(extent);
      numel *= extent;
      if (numel > r.remaining() / sizeof(float) + 1) {
        throw FormatError("tensor " + t.name + " shape " + shape_text(t.shape) + " exceeds the remaining file length",
                          r.position());
      }
    }
    if (numel * sizeof(float) > r.remaining()) {
      throw FormatError("tensor " + t.name + " shape " + shape_text(t.shape) + " needs " +
                            std::to_string(numel * sizeof(float)) + " bytes, " + std::to_string(r.remaining()) +
                            " remain",
                        r.position());
    }
    t.data.resize(numel);
    r.get_floats(t.data, "tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after the tensor table", r.position());
  }
  return ckpt;
}

Checkpoint make_checkpoint(const model::Model& model, const SgdMomentum* optimizer,
                           std::vector<std::pair<std::string, std::string>> metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  for (const auto& nt : model.state()) {
    ckpt.tensors.push_back({nt.name, nt.tensor.shape(), {nt.tensor.data().begin(), nt.tensor.data().end()}});
  }
  if (optimizer) {
    std::map<std::string, Shape> shapes;
    for (const auto& nt : model.named_parameters()) shapes[nt.name] = nt.tensor.shape();
    for (const auto& [name, v] : optimizer->velocities()) {
      auto it = shapes.find(name);
      const Shape shape = it != shapes.end() ? it->second : Shape{v.size()};
      ckpt.tensors.push_back({std::string(kVelocityPrefix) + name, shape, v});
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const model::Model& model, const SgdMomentum* optimizer,
                     std::vector<std::pair<std::string, std::string>> metadata) {
  write_file_atomic(path, encode_checkpoint(make_checkpoint(model, optimizer, std::move(metadata))));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

void load_into(const Checkpoint& ckpt, model::Model& model, SgdMomentum* optimizer, const LoadOptions& options) {
  std::vector<std::string> problems;
  std::map<std::string, const TensorRecord*> stored;
  for (const auto& t : ckpt.tensors) {
    if (options.reset_head && is_head(t.name)) continue;
    if (t.name.starts_with(kVelocityPrefix) && !optimizer) continue;
    stored[t.name] = &t;
  }
  auto state = model.state();
  std::map<std::string, Shape> expected;
  for (const auto& nt : state) {
    if (options.reset_head && is_head(nt.name)) continue;
    expected[nt.name] = nt.tensor.shape();
    auto it = stored.find(nt.name);
    if (it == stored.end()) {
      problems.push_back("missing " + nt.name + " " + shape_text(nt.tensor.shape()));
    } else if (it->second->shape != nt.tensor.shape()) {
      problems.push_back("shape of " + nt.name + ": checkpoint " + shape_text(it->second->shape) + ", model " +
                         shape_text(nt.tensor.shape()));
    }
  }
  for (const auto& [name, t] : stored) {
    if (name.starts_with(kVelocityPrefix)) {
      const auto param = name.substr(kVelocityPrefix.size());
      auto it = expected.find(param);
      if (it == expected.end()) {
        problems.push_back("velocity for unknown parameter " + param);
      } else if (shape_numel(it->second) != t->data.size()) {
        problems.push_back("velocity size of " + param + ": checkpoint " + std::to_string(t->data.size()) +
                           ", model " + std::to_string(shape_numel(it->second)));
      }
    } else if (!expected.count(name)) {
      problems.push_back("unexpected " + name + " " + shape_text(t->shape));
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match the model configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::invalid_argument(msg);
  }
  for (auto& nt : state) {
    auto it = stored.find(nt.name);
    if (it == stored.end()) continue;
    auto dst = nt.tensor.mutable_data();
    std::copy(it->second->data.begin(), it->second->data.end(), dst.begin());
  }
  if (optimizer) {
    if (options.reset_head) optimizer->forget("head.");
    for (const auto& [name, t] : stored) {
      if (name.starts_with(kVelocityPrefix)) optimizer->set_velocity(name.substr(kVelocityPrefix.size()), t->data);
    }
  }
}

std::uint64_t checksum(std::span<const float> data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  for (std::size_t i = 0; i < data.size_bytes(); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ainx::io
