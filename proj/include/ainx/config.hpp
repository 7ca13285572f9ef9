#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ainx/augment.hpp"
#include "ainx/dsp.hpp"
#include "ainx/model.hpp"
#include "ainx/train.hpp"

namespace ainx::io {

/// Everything a run needs. Every field has a dotted key, e.g.
/// `model.stage_channels=64,128,256,512` or `train.base_lr=0.001`.
struct RunConfig {
  dsp::SpectrogramConfig spectrogram = dsp::SpectrogramConfig::finetune();
  augment::AugmentPolicy augment = augment::AugmentPolicy::defaults_for(416, 128);
  model::ModelConfig model;
  model::BnPolicy bn_policy = model::BnPolicy::none;
  model::InitScheme init = model::InitScheme::he_uniform;
  train::TrainSchedule schedule = train::TrainSchedule::finetune();
  std::uint64_t seed = 0;
  std::string manifest;
  std::string eval_manifest;
  std::string checkpoint;
  std::string out;

  /// Presets: spectrogram, schedule, class count and BN policy per phase.
  static RunConfig for_phase(train::Phase phase);

  /// Throws std::invalid_argument for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  static const std::vector<std::string>& keys();

  /// Checks each component and their consistency (masks fit the target
  /// T x F input, the model takes one input channel, ...).
  void validate() const;
};

/// Applies `key=value` lines (blank lines and `#` comments skipped).
/// Errors throw FormatError with the 1-based line number.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

std::string format_config(const RunConfig& config);

}  // namespace ainx::io
