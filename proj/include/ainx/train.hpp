#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ainx/augment.hpp"
#include "ainx/dsp.hpp"
#include "ainx/model.hpp"
#include "ainx/optim.hpp"

namespace ainx::train {

enum class Phase { pretrain, finetune };

Phase parse_phase(const std::string& name);
std::string to_string(Phase phase);

struct TrainSchedule {
  std::size_t epochs = 30;
  double base_lr = 0.001;
  double momentum = 0.9;
  double decay_factor = 0.1;
  /// The decayed rate applies from these (0-based) epochs onward.
  std::vector<std::size_t> decay_epochs{20, 25};
  std::size_t batch_size = 32;
  Phase phase = Phase::finetune;

  /// 50 epochs at 0.01, dropped by 10x at 30 and 40.
  static TrainSchedule pretrain();
  /// 30 epochs at 0.001, dropped by 10x at 20 and 25.
  static TrainSchedule finetune();
  static TrainSchedule for_phase(Phase phase);

  void validate() const;
};

/// base_lr * decay_factor^(number of decay epochs <= epoch).
double lr_at(const TrainSchedule& schedule, std::size_t epoch);

struct Example {
  std::vector<float> samples;
  double sample_rate = 16000.0;
  std::int32_t label = 0;
  std::string source;
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<std::string> class_names;

  std::size_t size() const { return examples.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

/// Independent stream for one (seed, epoch, sample) triple.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

/// Waveform to model input: resample, clip (random when training, centered
/// otherwise), log-mel, fit to the target frame count, mean-center, and
/// augment when training.
dsp::Spectrogram preprocess(const Example& example, const dsp::SpectrogramConfig& config, bool training,
                            const augment::AugmentPolicy& policy, std::mt19937_64& rng,
                            augment::AugmentStats* stats = nullptr);

struct TrainOptions {
  TrainSchedule schedule;
  dsp::SpectrogramConfig spectrogram = dsp::SpectrogramConfig::finetune();
  augment::AugmentPolicy augment;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;  // mean over samples
  double top1 = 0.0;  // percentage, from the training-mode forward passes
  std::size_t warps_skipped = 0;
};

/// One pass over shuffled mini-batches with an SGD step per batch.
/// Deterministic for a fixed seed.
EpochStats train_epoch(model::Model& model, const Dataset& dataset, const TrainOptions& options,
                       SgdMomentum& optimizer, std::size_t epoch);

/// Stacks pre-processed examples into an [N, 1, T, F] batch.
Tensor stack_batch(const std::vector<dsp::Spectrogram>& specs);

struct ClassRow {
  std::string name;
  std::size_t samples = 0;
  std::size_t correct = 0;
  double ap = -1.0;   // -1 when undefined
  double auc = -1.0;
};

struct EvalReport {
  std::size_t samples = 0;
  double top1 = 0.0;
  double top5 = 0.0;
  double mpca = 0.0;
  double map = 0.0;
  double mauc = 0.0;
  double d_prime = 0.0;
  std::size_t mpca_excluded = 0;
  std::size_t map_excluded = 0;
  std::size_t auc_excluded = 0;
  std::vector<ClassRow> per_class;

  /// UTF-8 key=value lines.
  std::string to_key_value() const;
};

/// Metrics from raw logits (one row per sample).
EvalReport report_from_logits(const std::vector<float>& logits, const std::vector<std::int32_t>& labels,
                              const std::vector<std::string>& class_names);

/// Eval-mode forward with centered crops and no augmentation.
EvalReport evaluate(model::Model& model, const Dataset& dataset, const dsp::SpectrogramConfig& config,
                    std::size_t batch_size = 32);

/// `epoch<TAB>lr<TAB>loss<TAB>top1`
std::string format_epoch_line(const EpochStats& stats);

struct SyntheticOptions {
  double sample_rate = 16000.0;
  double seconds = 2.08;
  double noise = 0.05;
  double min_hz = 200.0;
  double max_hz = 6000.0;
};

/// Class c is a mixture of sinusoids at class-specific mel-spaced
/// frequencies plus seeded noise. Labels are assigned round-robin.
Dataset make_synthetic_dataset(std::size_t num_classes, std::size_t samples_per_class, std::uint64_t seed,
                               const SyntheticOptions& options = {});

/// The fundamental frequency used for class `c` of `num_classes`.
double synthetic_class_frequency(std::size_t c, std::size_t num_classes, const SyntheticOptions& options = {});

}  // namespace ainx::train
