#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "ainx/train.hpp"

namespace ainx::train {

double synthetic_class_frequency(std::size_t c, std::size_t num_classes, const SyntheticOptions& options) {
  if (num_classes < 1 || c >= num_classes) throw std::invalid_argument("synthetic_class_frequency: bad class index");
  const double lo = dsp::hz_to_mel(options.min_hz, dsp::MelScale::slaney);
  const double hi = dsp::hz_to_mel(options.max_hz, dsp::MelScale::slaney);
  const double t = num_classes == 1 ? 0.5 : double(c) / double(num_classes - 1);
  return dsp::mel_to_hz(lo + t * (hi - lo), dsp::MelScale::slaney);
}

Dataset make_synthetic_dataset(std::size_t num_classes, std::size_t samples_per_class, std::uint64_t seed,
                               const SyntheticOptions& options) {
  if (num_classes < 1 || samples_per_class < 1) {
    throw std::invalid_argument("make_synthetic_dataset: counts must be >= 1");
  }
  if (!(options.sample_rate > 0 && options.seconds > 0)) {
    throw std::invalid_argument("make_synthetic_dataset: sample rate and duration must be positive");
  }
  const double nyquist = options.sample_rate / 2;
  const std::size_t n = std::size_t(std::llround(options.seconds * options.sample_rate));
  Dataset ds;
  for (std::size_t c = 0; c < num_classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::uniform_real_distribution<double> gain(0.6, 1.0);
  std::normal_distribution<double> noise(0.0, options.noise);
  for (std::size_t i = 0; i < num_classes * samples_per_class; ++i) {
    Example ex;
    ex.label = std::int32_t(i % num_classes);
    ex.sample_rate = options.sample_rate;
    ex.source = "synthetic:" + std::to_string(i);
    const double f0 = synthetic_class_frequency(std::size_t(ex.label), num_classes, options) * (1 + jitter(rng));
    // Fundamental plus two weaker partials below Nyquist.
    const double partials[][2] = {{1.0, 1.0}, {1.5, 0.5}, {2.0, 0.25}};
    double amp[3], ph[3];
    for (int p = 0; p < 3; ++p) {
      amp[p] = partials[p][1] * gain(rng);
      ph[p] = phase(rng);
    }
    ex.samples.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      const double t = double(s) / options.sample_rate;
      double v = 0;
      for (int p = 0; p < 3; ++p) {
        const double f = f0 * partials[p][0];
        if (f < nyquist) v += amp[p] * std::sin(2 * std::numbers::pi * f * t + ph[p]);
      }
      ex.samples[s] = float(0.25 * v + noise(rng));
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace ainx::train
