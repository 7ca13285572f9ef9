#include "ainx/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace ainx::dsp {

namespace {

constexpr std::size_t kMaxAutoFft = 1 << 16;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Slaney/auditory-toolbox constants: linear below 1 kHz, log above.
constexpr double kSlaneyStep = 200.0 / 3.0;
constexpr double kSlaneyLogHz = 1000.0;
constexpr double kSlaneyLogMel = kSlaneyLogHz / kSlaneyStep;
const double kSlaneyLogStep = std::log(6.4) / 27.0;

std::vector<double> mel_points(const SpectrogramConfig& c) {
  const double lo = hz_to_mel(c.fmin, c.mel_scale);
  const double hi = hz_to_mel(c.resolved_fmax(), c.mel_scale);
  std::vector<double> hz(c.n_mels + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * double(i) / double(c.n_mels + 1), c.mel_scale);
  }
  return hz;
}

// Filter weights for one n_fft; returns the index of the first empty row.
std::optional<std::size_t> build_filterbank(const SpectrogramConfig& c, std::size_t n_fft, Matrix* out) {
  const std::size_t bins = n_fft / 2 + 1;
  const auto edges = mel_points(c);
  Matrix fb(c.n_mels, bins);
  std::optional<std::size_t> first_empty;
  for (std::size_t m = 0; m < c.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double norm = c.slaney_norm ? 2.0 / (right - left) : 1.0;
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = double(k) * c.sample_rate / double(n_fft);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      if (w > 0) any = true;
      fb(m, k) = float(w * norm);
    }
    if (!any && !first_empty) first_empty = m;
  }
  if (out) *out = std::move(fb);
  return first_empty;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (std::ptrdiff_t(n) - 1);
  i %= period;
  if (i < 0) i += period;
  return std::size_t(i < std::ptrdiff_t(n) ? i : period - i);
}

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed concurrently through the new-array interface.
fftw_plan plan_for(std::size_t n_fft) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n_fft);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(n_fft);
  fftw_complex* out = fftw_alloc_complex(n_fft / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(int(n_fft), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n_fft, plan);
  return plan;
}

}  // namespace

SpectrogramConfig SpectrogramConfig::pretrain() {
  SpectrogramConfig c;
  c.window_ms = 20.0;
  c.hop_ms = 10.0;
  c.clip_seconds = 5.12;
  return c;
}

SpectrogramConfig SpectrogramConfig::finetune() {
  SpectrogramConfig c;
  c.window_ms = 10.0;
  c.hop_ms = 5.0;
  c.clip_seconds = 2.08;
  return c;
}

std::size_t SpectrogramConfig::window_samples() const {
  return std::max<std::size_t>(1, std::size_t(std::llround(sample_rate * window_ms / 1000.0)));
}

double SpectrogramConfig::hop_samples() const { return sample_rate * hop_ms / 1000.0; }

std::size_t SpectrogramConfig::clip_samples() const {
  return std::size_t(std::llround(clip_seconds * sample_rate));
}

std::size_t SpectrogramConfig::frames_for(std::size_t samples) const {
  if (samples == 0) return 0;
  const double exact = double(samples) / hop_samples();
  return std::max<std::size_t>(1, std::size_t(std::floor(exact + 1e-9)));
}

std::size_t SpectrogramConfig::target_frames() const {
  return std::max<std::size_t>(1, std::size_t(std::floor(clip_seconds * 1000.0 / hop_ms + 1e-9)));
}

double SpectrogramConfig::resolved_fmax() const { return fmax > 0 ? fmax : sample_rate / 2.0; }

std::size_t SpectrogramConfig::resolved_n_fft() const {
  if (n_fft != 0) return n_fft;
  for (std::size_t n = next_pow2(window_samples()); n <= kMaxAutoFft; n <<= 1) {
    if (!build_filterbank(*this, n, nullptr)) return n;
  }
  throw std::invalid_argument("no FFT size up to " + std::to_string(kMaxAutoFft) + " gives non-empty filters for " +
                              std::to_string(n_mels) + " mel bands");
}

void SpectrogramConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("spectrogram config: " + what); };
  if (!(sample_rate > 0)) fail("sample_rate must be positive");
  if (!(window_ms > 0)) fail("window_ms must be positive");
  if (!(hop_ms > 0)) fail("hop_ms must be positive");
  if (n_mels < 1) fail("n_mels must be at least 1");
  if (n_fft != 0 && n_fft < window_samples()) {
    fail("n_fft " + std::to_string(n_fft) + " is shorter than the window (" + std::to_string(window_samples()) +
         " samples)");
  }
  if (!(fmin >= 0)) fail("fmin must be non-negative");
  if (!(fmin < resolved_fmax())) fail("fmin must be below fmax");
  if (resolved_fmax() > sample_rate / 2.0 + 1e-9) fail("fmax exceeds the Nyquist frequency");
  if (!(clip_seconds > 0)) fail("clip_seconds must be positive");
  if (!(log_floor > 0)) fail("log_floor must be positive");
}

double hz_to_mel(double hz, MelScale scale) {
  if (scale == MelScale::htk) return 2595.0 * std::log10(1.0 + hz / 700.0);
  if (hz < kSlaneyLogHz) return hz / kSlaneyStep;
  return kSlaneyLogMel + std::log(hz / kSlaneyLogHz) / kSlaneyLogStep;
}

double mel_to_hz(double mel, MelScale scale) {
  if (scale == MelScale::htk) return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  if (mel < kSlaneyLogMel) return mel * kSlaneyStep;
  return kSlaneyLogHz * std::exp(kSlaneyLogStep * (mel - kSlaneyLogMel));
}

Matrix stft_power(std::span<const float> signal, const SpectrogramConfig& config) {
  if (signal.empty()) throw std::invalid_argument("stft_power: empty signal");
  config.validate();
  const std::size_t n_fft = config.resolved_n_fft();
  const std::size_t win = std::min(config.window_samples(), n_fft);
  const std::size_t bins = n_fft / 2 + 1;
  const std::size_t frames = config.frames_for(signal.size());
  const double hop = config.hop_samples();

  // Periodic Hann window, zero-padded and centered inside n_fft.
  std::vector<double> window(n_fft, 0.0);
  const std::size_t offset = (n_fft - win) / 2;
  for (std::size_t i = 0; i < win; ++i) {
    window[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(win));
  }

  fftw_plan plan = plan_for(n_fft);
  double* buffer = fftw_alloc_real(n_fft);
  fftw_complex* spectrum = fftw_alloc_complex(bins);
  Matrix power(frames, bins);
  const std::ptrdiff_t half = std::ptrdiff_t(n_fft / 2);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = std::ptrdiff_t(std::llround(double(t) * hop)) - half;
    for (std::size_t i = 0; i < n_fft; ++i) {
      buffer[i] = window[i] * signal[reflect_index(start + std::ptrdiff_t(i), signal.size())];
    }
    fftw_execute_dft_r2c(plan, buffer, spectrum);
    for (std::size_t k = 0; k < bins; ++k) {
      power(t, k) = float(spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1]);
    }
  }
  fftw_free(buffer);
  fftw_free(spectrum);
  return power;
}

Matrix mel_filterbank(const SpectrogramConfig& config) {
  config.validate();
  Matrix fb;
  if (auto empty = build_filterbank(config, config.resolved_n_fft(), &fb)) {
    throw std::invalid_argument("mel_filterbank: filter " + std::to_string(*empty) + " of " +
                                std::to_string(config.n_mels) + " covers no FFT bin at n_fft=" +
                                std::to_string(config.resolved_n_fft()));
  }
  return fb;
}

Spectrogram log_mel(std::span<const float> signal, const SpectrogramConfig& config) {
  const Matrix power = stft_power(signal, config);
  const Matrix fb = mel_filterbank(config);
  Spectrogram spec;
  spec.config = config;
  spec.values = Matrix(power.rows, config.n_mels);
  for (std::size_t t = 0; t < power.rows; ++t) {
    const float* p = &power.values[t * power.cols];
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      const float* w = &fb.values[m * fb.cols];
      double e = 0;
      for (std::size_t k = 0; k < power.cols; ++k) e += double(w[k]) * p[k];
      spec.values(t, m) = float(std::log(std::max(e, config.log_floor)));
    }
  }
  return spec;
}

Spectrogram fit_to_frames(const Spectrogram& spec, std::size_t target_frames, CropMode mode,
                          std::mt19937_64& rng) {
  if (target_frames == 0) throw std::invalid_argument("fit_to_frames: target must be at least 1");
  const std::size_t T = spec.frames(), F = spec.bins();
  if (T == target_frames) return spec;
  Spectrogram out;
  out.config = spec.config;
  out.values = Matrix(target_frames, F);
  if (T < target_frames) {
    std::copy(spec.values.values.begin(), spec.values.values.end(), out.values.values.begin());
    for (std::size_t t = T; t < target_frames; ++t) {
      std::copy_n(&spec.values.values[(T - 1) * F], F, &out.values.values[t * F]);
    }
    return out;
  }
  const std::size_t slack = T - target_frames;
  const std::size_t start =
      mode == CropMode::center ? slack / 2 : std::uniform_int_distribution<std::size_t>(0, slack)(rng);
  std::copy_n(&spec.values.values[start * F], target_frames * F, out.values.values.begin());
  return out;
}

std::vector<float> random_clip(std::span<const float> signal, double clip_seconds, double sample_rate,
                               std::mt19937_64& rng) {
  if (!(clip_seconds > 0)) throw std::invalid_argument("random_clip: clip_seconds must be positive");
  const std::size_t clip = std::size_t(std::llround(clip_seconds * sample_rate));
  if (signal.size() <= clip) return {signal.begin(), signal.end()};
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, signal.size() - clip)(rng);
  return {signal.begin() + start, signal.begin() + start + clip};
}

std::vector<float> center_clip(std::span<const float> signal, double clip_seconds, double sample_rate) {
  if (!(clip_seconds > 0)) throw std::invalid_argument("center_clip: clip_seconds must be positive");
  const std::size_t clip = std::size_t(std::llround(clip_seconds * sample_rate));
  if (signal.size() <= clip) return {signal.begin(), signal.end()};
  const std::size_t start = (signal.size() - clip) / 2;
  return {signal.begin() + start, signal.begin() + start + clip};
}

std::vector<float> resample_linear(std::span<const float> signal, double from_rate, double to_rate) {
  if (!(from_rate > 0 && to_rate > 0)) throw std::invalid_argument("resample_linear: rates must be positive");
  if (signal.empty() || from_rate == to_rate) return {signal.begin(), signal.end()};
  const std::size_t n = std::max<std::size_t>(1, std::size_t(std::llround(double(signal.size()) * to_rate / from_rate)));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double src = double(i) * from_rate / to_rate;
    const std::size_t i0 = std::min(std::size_t(src), signal.size() - 1);
    const std::size_t i1 = std::min(i0 + 1, signal.size() - 1);
    const double frac = src - double(i0);
    out[i] = float((1.0 - frac) * signal[i0] + frac * signal[i1]);
  }
  return out;
}

void center_in_place(Spectrogram& spec) {
  auto& v = spec.values.values;
  if (v.empty()) return;
  double mean = 0;
  for (float x : v) mean += x;
  mean /= double(v.size());
  for (float& x : v) x = float(x - mean);
}

}  // namespace ainx::dsp
