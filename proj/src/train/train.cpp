#include "ainx/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ainx/metrics.hpp"

namespace ainx::train {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Phase parse_phase(const std::string& name) {
  if (name == "pretrain") return Phase::pretrain;
  if (name == "finetune") return Phase::finetune;
  throw std::invalid_argument("unknown phase '" + name + "' (expected pretrain or finetune)");
}

std::string to_string(Phase phase) { return phase == Phase::pretrain ? "pretrain" : "finetune"; }

TrainSchedule TrainSchedule::pretrain() {
  TrainSchedule s;
  s.epochs = 50;
  s.base_lr = 0.01;
  s.decay_epochs = {30, 40};
  s.phase = Phase::pretrain;
  return s;
}

TrainSchedule TrainSchedule::finetune() { return TrainSchedule{}; }

TrainSchedule TrainSchedule::for_phase(Phase phase) {
  return phase == Phase::pretrain ? pretrain() : finetune();
}

void TrainSchedule::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train schedule: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(base_lr >= 0)) fail("base_lr must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0,1)");
  if (!(decay_factor > 0)) fail("decay_factor must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  for (std::size_t i = 0; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] >= epochs) fail("decay epoch " + std::to_string(decay_epochs[i]) + " is not below epochs");
    if (i > 0 && decay_epochs[i] <= decay_epochs[i - 1]) fail("decay_epochs must be strictly increasing");
  }
}

double lr_at(const TrainSchedule& schedule, std::size_t epoch) {
  if (epoch >= schedule.epochs) {
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0," +
                                std::to_string(schedule.epochs) + ")");
  }
  int drops = 0;
  for (std::size_t d : schedule.decay_epochs) drops += d <= epoch;
  // Dividing by an integral reciprocal (10 for 0.1) keeps decimal rates
  // exact: 0.01 / 100 == 0.0001, whereas 0.01 * 0.1 * 0.1 is not.
  const double inv = 1.0 / schedule.decay_factor;
  if (inv == std::round(inv)) return schedule.base_lr / std::pow(inv, drops);
  return schedule.base_lr * std::pow(schedule.decay_factor, drops);
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return splitmix(splitmix(splitmix(seed) ^ epoch) ^ index);
}

dsp::Spectrogram preprocess(const Example& example, const dsp::SpectrogramConfig& config, bool training,
                            const augment::AugmentPolicy& policy, std::mt19937_64& rng,
                            augment::AugmentStats* stats) {
  if (example.samples.empty()) throw std::invalid_argument("empty waveform in " + example.source);
  std::vector<float> wave = example.sample_rate == config.sample_rate
                                ? example.samples
                                : dsp::resample_linear(example.samples, example.sample_rate, config.sample_rate);
  wave = training ? dsp::random_clip(wave, config.clip_seconds, config.sample_rate, rng)
                  : dsp::center_clip(wave, config.clip_seconds, config.sample_rate);
  auto spec = dsp::log_mel(wave, config);
  spec = dsp::fit_to_frames(spec, config.target_frames(), training ? dsp::CropMode::random : dsp::CropMode::center,
                            rng);
  dsp::center_in_place(spec);
  if (training) spec = augment::augment(spec, policy, rng, stats);
  return spec;
}

Tensor stack_batch(const std::vector<dsp::Spectrogram>& specs) {
  if (specs.empty()) throw std::invalid_argument("stack_batch: empty batch");
  const std::size_t T = specs[0].frames(), F = specs[0].bins();
  std::vector<float> data;
  data.reserve(specs.size() * T * F);
  for (const auto& s : specs) {
    if (s.frames() != T || s.bins() != F) throw std::invalid_argument("stack_batch: ragged spectrogram sizes");
    data.insert(data.end(), s.values.values.begin(), s.values.values.end());
  }
  return Tensor::from_data({specs.size(), 1, T, F}, std::move(data));
}

EpochStats train_epoch(model::Model& model, const Dataset& dataset, const TrainOptions& options,
                       SgdMomentum& optimizer, std::size_t epoch) {
  if (dataset.examples.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  options.schedule.validate();
  EpochStats stats;
  stats.epoch = epoch;
  stats.lr = lr_at(options.schedule, epoch);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(sample_seed(options.seed, epoch, ~std::uint64_t(0)));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const std::size_t B = options.schedule.batch_size;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += B) {
    const std::size_t n = std::min(B, order.size() - begin);
    std::vector<dsp::Spectrogram> specs(n);
    std::vector<augment::AugmentStats> aug(n);
    std::vector<std::int32_t> labels(n);
    // Each sample owns its rng stream, so the thread count does not matter.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
      const std::size_t idx = order[begin + std::size_t(i)];
      std::mt19937_64 rng(sample_seed(options.seed, epoch, idx));
      specs[i] = preprocess(dataset.examples[idx], options.spectrogram, true, options.augment, rng, &aug[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = dataset.examples[order[begin + i]].label;
      stats.warps_skipped += aug[i].warps_skipped;
    }
    model.zero_grad();
    const auto logits = model.forward(stack_batch(specs), model::Mode::train);
    const auto loss = softmax_cross_entropy(logits, labels);
    backward(loss);
    auto params = model.trainable_parameters();
    optimizer.step(params, stats.lr);
    loss_sum += double(loss.item()) * double(n);
    const auto pred = metrics::argmax_rows({n, logits.dim(1), logits.data()});
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == labels[i];
  }
  model.zero_grad();
  stats.loss = loss_sum / double(dataset.size());
  stats.top1 = 100.0 * double(correct) / double(dataset.size());
  return stats;
}

EvalReport report_from_logits(const std::vector<float>& logits, const std::vector<std::int32_t>& labels,
                              const std::vector<std::string>& class_names) {
  const std::size_t K = class_names.size();
  if (K == 0) throw std::invalid_argument("evaluate: no classes");
  const std::size_t N = labels.size();
  if (logits.size() != N * K) throw std::invalid_argument("evaluate: logits do not match labels x classes");
  const metrics::ScoreMatrix raw{N, K, logits};
  const auto probs = metrics::softmax_rows(raw);
  const metrics::ScoreMatrix scores{N, K, probs};
  EvalReport r;
  r.samples = N;
  if (N == 0) return r;
  r.top1 = metrics::topk_accuracy(raw, labels, 1);
  r.top5 = metrics::topk_accuracy(raw, labels, std::min<std::size_t>(5, K));
  const auto pred = metrics::argmax_rows(raw);
  const auto mpca = metrics::mean_per_class_accuracy(pred, labels, K);
  r.mpca = mpca.value;
  r.mpca_excluded = mpca.excluded;
  const auto map = metrics::mean_average_precision(scores, labels);
  r.map = map.value;
  r.map_excluded = map.excluded;
  const auto mauc = metrics::mean_roc_auc(scores, labels);
  r.mauc = mauc.value;
  r.auc_excluded = mauc.excluded;
  if (mauc.included == 0) {
    r.d_prime = std::nan("");
  } else if (r.mauc >= 1.0) {
    r.d_prime = std::numeric_limits<double>::infinity();
  } else if (r.mauc <= 0.0) {
    r.d_prime = -std::numeric_limits<double>::infinity();
  } else {
    r.d_prime = metrics::d_prime(r.mauc);
  }
  for (std::size_t c = 0; c < K; ++c) {
    ClassRow row;
    row.name = class_names[c];
    std::vector<float> col(N);
    std::vector<std::uint8_t> pos(N);
    for (std::size_t i = 0; i < N; ++i) {
      col[i] = scores(i, c);
      pos[i] = labels[i] == std::int32_t(c);
      if (pos[i]) {
        ++row.samples;
        row.correct += pred[i] == labels[i];
      }
    }
    if (row.samples > 0) row.ap = metrics::average_precision(col, pos);
    if (row.samples > 0 && row.samples < N) row.auc = metrics::roc_auc(col, pos);
    r.per_class.push_back(row);
  }
  return r;
}

EvalReport evaluate(model::Model& model, const Dataset& dataset, const dsp::SpectrogramConfig& config,
                    std::size_t batch_size) {
  if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  const std::size_t K = model.config().num_classes;
  if (dataset.num_classes() != K) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(dataset.num_classes()) +
                                " classes, model head has " + std::to_string(K));
  }
  std::vector<float> logits;
  std::vector<std::int32_t> labels;
  NoGradGuard no_grad;
  const augment::AugmentPolicy none = augment::AugmentPolicy::disabled();
  for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
    const std::size_t n = std::min(batch_size, dataset.size() - begin);
    std::vector<dsp::Spectrogram> specs(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
      std::mt19937_64 unused(0);
      specs[i] = preprocess(dataset.examples[begin + std::size_t(i)], config, false, none, unused);
    }
    const auto out = model.forward(stack_batch(specs), model::Mode::eval);
    logits.insert(logits.end(), out.data().begin(), out.data().end());
    for (std::size_t i = 0; i < n; ++i) labels.push_back(dataset.examples[begin + i].label);
  }
  return report_from_logits(logits, labels, dataset.class_names);
}

std::string EvalReport::to_key_value() const {
  std::ostringstream out;
  out << "samples=" << samples << '\n'
      << "top1=" << format_double(top1) << '\n'
      << "top5=" << format_double(top5) << '\n'
      << "mpca=" << format_double(mpca) << '\n'
      << "map=" << format_double(map) << '\n'
      << "mauc=" << format_double(mauc) << '\n'
      << "d_prime=" << format_double(d_prime) << '\n'
      << "mpca_excluded_classes=" << mpca_excluded << '\n'
      << "map_excluded_classes=" << map_excluded << '\n'
      << "auc_excluded_classes=" << auc_excluded << '\n';
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& row = per_class[c];
    const std::string key = "class." + std::to_string(c) + ".";
    out << key << "name=" << row.name << '\n'
        << key << "samples=" << row.samples << '\n'
        << key << "correct=" << row.correct << '\n'
        << key << "ap=" << (row.ap < 0 ? "na" : format_double(row.ap)) << '\n'
        << key << "auc=" << (row.auc < 0 ? "na" : format_double(row.auc)) << '\n';
  }
  return out.str();
}

std::string format_epoch_line(const EpochStats& stats) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.8g\t%.6f\t%.4f\n", stats.epoch, stats.lr, stats.loss, stats.top1);
  return buf;
}

}  // namespace ainx::train
