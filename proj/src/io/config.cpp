#include "ainx/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ainx/binary_io.hpp"

namespace ainx::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename U>
std::string fmt_list(const U& values) {
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("'" + s + "' is not a finite number");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("'" + s + "' is not a non-negative integer");
  }
  return v;
}

std::size_t parse_size(const std::string& s) { return std::size_t(parse_uint(s)); }

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = s.find(',', pos);
    out.push_back(parse_size(s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::array<std::size_t, 4> parse_array4(const std::string& s) {
  const auto v = parse_list(s);
  if (v.size() != 4) throw std::invalid_argument("expected 4 comma-separated values, got '" + s + "'");
  return {v[0], v[1], v[2], v[3]};
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("'" + s + "' is not a boolean");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define AINX_FIELD(key, expr, to_text, from_text)                                         \
  {                                                                                       \
    key, Field {                                                                          \
      [](const RunConfig& c) { return to_text(c.expr); },                                 \
          [](RunConfig& c, const std::string& v) { c.expr = from_text(v); }               \
    }                                                                                     \
  }

std::string fmt_size(std::size_t v) { return std::to_string(v); }
std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }
std::string fmt_str(const std::string& s) { return s; }
std::string parse_str(const std::string& s) { return s; }
float parse_float(const std::string& s) { return float(parse_double(s)); }
std::string fmt_float(float v) { return fmt(double(v)); }
std::string fmt_mel(dsp::MelScale s) { return s == dsp::MelScale::slaney ? "slaney" : "htk"; }
dsp::MelScale parse_mel(const std::string& s) {
  if (s == "slaney") return dsp::MelScale::slaney;
  if (s == "htk") return dsp::MelScale::htk;
  throw std::invalid_argument("unknown mel scale '" + s + "'");
}
std::string fmt_bn(model::BnPolicy p) { return model::to_string(p); }
std::string fmt_init(model::InitScheme s) { return model::to_string(s); }
std::string fmt_phase(train::Phase p) { return train::to_string(p); }
template <typename U>
std::string fmt_vec(const U& v) {
  return fmt_list(v);
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      AINX_FIELD("spectrogram.sample_rate", spectrogram.sample_rate, fmt, parse_double),
      AINX_FIELD("spectrogram.window_ms", spectrogram.window_ms, fmt, parse_double),
      AINX_FIELD("spectrogram.hop_ms", spectrogram.hop_ms, fmt, parse_double),
      AINX_FIELD("spectrogram.n_mels", spectrogram.n_mels, fmt_size, parse_size),
      AINX_FIELD("spectrogram.n_fft", spectrogram.n_fft, fmt_size, parse_size),
      AINX_FIELD("spectrogram.fmin", spectrogram.fmin, fmt, parse_double),
      AINX_FIELD("spectrogram.fmax", spectrogram.fmax, fmt, parse_double),
      AINX_FIELD("spectrogram.clip_seconds", spectrogram.clip_seconds, fmt, parse_double),
      AINX_FIELD("spectrogram.log_floor", spectrogram.log_floor, fmt, parse_double),
      AINX_FIELD("spectrogram.mel_scale", spectrogram.mel_scale, fmt_mel, parse_mel),
      AINX_FIELD("spectrogram.slaney_norm", spectrogram.slaney_norm, fmt_bool, parse_bool),
      AINX_FIELD("augment.enabled", augment.enabled, fmt_bool, parse_bool),
      AINX_FIELD("augment.freq_mask_max", augment.freq_mask_max, fmt_size, parse_size),
      AINX_FIELD("augment.freq_masks", augment.freq_masks, fmt_size, parse_size),
      AINX_FIELD("augment.time_mask_max", augment.time_mask_max, fmt_size, parse_size),
      AINX_FIELD("augment.time_masks", augment.time_masks, fmt_size, parse_size),
      AINX_FIELD("augment.time_warp_w", augment.time_warp_w, fmt_size, parse_size),
      AINX_FIELD("augment.mask_value", augment.mask_value, fmt_float, parse_float),
      AINX_FIELD("model.in_channels", model.in_channels, fmt_size, parse_size),
      AINX_FIELD("model.stem_kernel_h", model.stem_kernel_h, fmt_size, parse_size),
      AINX_FIELD("model.stem_kernel_w", model.stem_kernel_w, fmt_size, parse_size),
      AINX_FIELD("model.stem_stride", model.stem_stride, fmt_size, parse_size),
      AINX_FIELD("model.stem_out", model.stem_out, fmt_size, parse_size),
      AINX_FIELD("model.stage_channels", model.stage_channels, fmt_vec, parse_array4),
      AINX_FIELD("model.stage_depths", model.stage_depths, fmt_vec, parse_array4),
      AINX_FIELD("model.expansion", model.expansion, fmt_size, parse_size),
      AINX_FIELD("model.branch_kernels", model.branch_kernels, fmt_vec, parse_list),
      AINX_FIELD("model.downsample_stride", model.downsample_stride, fmt_size, parse_size),
      AINX_FIELD("model.num_classes", model.num_classes, fmt_size, parse_size),
      AINX_FIELD("model.bn_policy", bn_policy, fmt_bn, model::parse_bn_policy),
      AINX_FIELD("model.init", init, fmt_init, model::parse_init_scheme),
      AINX_FIELD("train.phase", schedule.phase, fmt_phase, train::parse_phase),
      AINX_FIELD("train.epochs", schedule.epochs, fmt_size, parse_size),
      AINX_FIELD("train.base_lr", schedule.base_lr, fmt, parse_double),
      AINX_FIELD("train.momentum", schedule.momentum, fmt, parse_double),
      AINX_FIELD("train.decay_factor", schedule.decay_factor, fmt, parse_double),
      AINX_FIELD("train.decay_epochs", schedule.decay_epochs, fmt_vec, parse_list),
      AINX_FIELD("train.batch_size", schedule.batch_size, fmt_size, parse_size),
      AINX_FIELD("seed", seed, fmt_u64, parse_uint),
      AINX_FIELD("paths.manifest", manifest, fmt_str, parse_str),
      AINX_FIELD("paths.eval_manifest", eval_manifest, fmt_str, parse_str),
      AINX_FIELD("paths.checkpoint", checkpoint, fmt_str, parse_str),
      AINX_FIELD("paths.out", out, fmt_str, parse_str),
  };
  return table;
}

#undef AINX_FIELD

const Field& lookup(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::for_phase(train::Phase phase) {
  RunConfig c;
  c.schedule = train::TrainSchedule::for_phase(phase);
  if (phase == train::Phase::pretrain) {
    c.spectrogram = dsp::SpectrogramConfig::pretrain();
    c.model.num_classes = 309;
    c.bn_policy = model::BnPolicy::none;
  } else {
    c.spectrogram = dsp::SpectrogramConfig::finetune();
    c.model.num_classes = 44;
    c.bn_policy = model::BnPolicy::freeze_all_except_stem_first;
  }
  c.augment = augment::AugmentPolicy::defaults_for(c.spectrogram.target_frames(), c.spectrogram.n_mels);
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& field = lookup(key);
  try {
    field.set(*this, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
}

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, f] : fields()) out.emplace_back(k, f.get(*this));
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> k;
    for (const auto& entry : fields()) k.push_back(entry.first);
    return k;
  }();
  return all;
}

void RunConfig::validate() const {
  spectrogram.validate();
  model.validate();
  schedule.validate();
  augment.validate(spectrogram.target_frames(), spectrogram.n_mels);
  if (model.in_channels != 1) {
    throw std::invalid_argument("model.in_channels must be 1 for single-channel spectrogram input");
  }
  if (model.num_classes < 1) throw std::invalid_argument("model.num_classes must be >= 1");
  model::stage_extents(model, spectrogram.target_frames(), spectrogram.n_mels);
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value", line_no);
    auto strip = [](std::string s) {
      const auto sb = s.find_first_not_of(" \t");
      if (sb == std::string::npos) return std::string();
      return s.substr(sb, s.find_last_not_of(" \t") - sb + 1);
    };
    try {
      config.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    } catch (const std::invalid_argument& err) {
      throw FormatError(err.what(), line_no);
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    apply_config_text(config, std::string_view(bytes.data(), bytes.size()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config.to_pairs()) out += k + "=" + v + "\n";
  return out;
}

}  // namespace ainx::io
