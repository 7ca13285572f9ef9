#include <gtest/gtest.h>

#include <random>

#include "ainx/augment.hpp"

namespace ainx::augment {
namespace {

using dsp::Matrix;
using dsp::Spectrogram;

Spectrogram random_spec(std::size_t frames, std::size_t bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Spectrogram s;
  s.values = Matrix(frames, bins);
  for (auto& v : s.values.values) v = d(rng);
  return s;
}

AugmentPolicy only_freq(std::size_t masks, std::size_t max_width) {
  AugmentPolicy p;
  p.time_masks = 0;
  p.time_warp_w = 0;
  p.freq_masks = masks;
  p.freq_mask_max = max_width;
  return p;
}

AugmentPolicy only_time(std::size_t masks, std::size_t max_width) {
  AugmentPolicy p;
  p.freq_masks = 0;
  p.time_warp_w = 0;
  p.time_masks = masks;
  p.time_mask_max = max_width;
  return p;
}

TEST(FreqMaskTest, ZeroMasksOrZeroWidthIsIdentity) {
  auto s = random_spec(40, 128, 1);
  std::mt19937_64 rng(3);
  EXPECT_EQ(freq_mask(s, only_freq(0, 27), rng).values.values, s.values.values);
  EXPECT_EQ(freq_mask(s, only_freq(2, 0), rng).values.values, s.values.values);
}

TEST(FreqMaskTest, SeededSingleMaskReplay) {
  auto s = random_spec(40, 128, 2);
  auto p = only_freq(1, 27);
  p.mask_value = -7.5f;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed), replay(seed);
    auto out = freq_mask(s, p, rng);
    const auto width = std::uniform_int_distribution<std::size_t>(0, 27)(replay);
    const auto start = std::uniform_int_distribution<std::size_t>(0, 128 - width)(replay);
    for (std::size_t t = 0; t < 40; ++t)
      for (std::size_t f = 0; f < 128; ++f) {
        if (f >= start && f < start + width) {
          ASSERT_EQ(out.at(t, f), -7.5f);
        } else {
          ASSERT_EQ(out.at(t, f), s.at(t, f));
        }
      }
  }
}

TEST(TimeMaskTest, ZeroMasksOrZeroWidthIsIdentity) {
  auto s = random_spec(128, 40, 1);
  std::mt19937_64 rng(3);
  EXPECT_EQ(time_mask(s, only_time(0, 25), rng).values.values, s.values.values);
  EXPECT_EQ(time_mask(s, only_time(2, 0), rng).values.values, s.values.values);
}

TEST(TimeMaskTest, SeededSingleMaskReplay) {
  auto s = random_spec(128, 40, 2);
  auto p = only_time(1, 25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed), replay(seed);
    auto out = time_mask(s, p, rng);
    const auto width = std::uniform_int_distribution<std::size_t>(0, 25)(replay);
    const auto start = std::uniform_int_distribution<std::size_t>(0, 128 - width)(replay);
    for (std::size_t t = 0; t < 128; ++t)
      for (std::size_t f = 0; f < 40; ++f) {
        if (t >= start && t < start + width) {
          ASSERT_EQ(out.at(t, f), 0.0f);
        } else {
          ASSERT_EQ(out.at(t, f), s.at(t, f));
        }
      }
  }
}

TEST(MaskTest, OversizedPolicyRejected) {
  auto s = random_spec(8, 8, 1);
  std::mt19937_64 rng(1);
  EXPECT_THROW(freq_mask(s, only_freq(1, 9), rng), std::invalid_argument);
  EXPECT_THROW(time_mask(s, only_time(1, 9), rng), std::invalid_argument);
}

// Every placement of one frequency mask and one time mask on a 4x4 matrix.
TEST(MaskTest, ExhaustiveFourByFour) {
  auto s = random_spec(4, 4, 5);
  for (std::size_t fw = 0; fw <= 4; ++fw)
    for (std::size_t f0 = 0; f0 + fw <= 4; ++f0)
      for (std::size_t tw = 0; tw <= 4; ++tw)
        for (std::size_t t0 = 0; t0 + tw <= 4; ++t0) {
          Matrix m = s.values;
          apply_freq_mask(m, f0, fw, 1e9f);
          apply_time_mask(m, t0, tw, 1e9f);
          for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t f = 0; f < 4; ++f) {
              const bool masked = (f >= f0 && f < f0 + fw) || (t >= t0 && t < t0 + tw);
              ASSERT_EQ(m(t, f), masked ? 1e9f : s.at(t, f));
            }
        }
  Matrix full = s.values;
  apply_freq_mask(full, 0, 4, 0.0f);
  apply_time_mask(full, 0, 4, 0.0f);
  for (float v : full.values) EXPECT_EQ(v, 0.0f);
}

TEST(MaskTest, MaximalPolicyOnFourByFourMasksEverything) {
  AugmentPolicy p;
  p.time_warp_w = 0;
  p.freq_mask_max = 4;
  p.time_mask_max = 4;
  p.freq_masks = 64;
  p.time_masks = 64;
  auto s = random_spec(4, 4, 6);
  std::mt19937_64 rng(11);
  for (float v : augment(s, p, rng).values.values) EXPECT_EQ(v, 0.0f);
}

TEST(TimeWarpTest, ZeroShiftIsIdentity) {
  auto s = random_spec(30, 6, 1);
  auto out = warp_time_axis(s.values, 12, 0);
  for (std::size_t i = 0; i < out.values.size(); ++i) EXPECT_NEAR(out.values[i], s.values.values[i], 1e-6);
}

TEST(TimeWarpTest, ConstantSpectrogramUnchanged) {
  Spectrogram s;
  s.values = Matrix(50, 8, 3.25f);
  AugmentPolicy p = AugmentPolicy::defaults_for(50, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    EXPECT_EQ(time_warp(s, p, rng).values.values, s.values.values);
  }
}

// Independent oracle: invert the forward map by bisection.
double warp_source(double dest, double anchor, double target, double last) {
  auto forward = [&](double src) {
    return src <= anchor ? src * target / anchor : target + (src - anchor) * (last - target) / (last - anchor);
  };
  double lo = 0, hi = last;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (forward(mid) < dest ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(TimeWarpTest, AnchorFiveShiftTwoOnTenFrames) {
  auto s = random_spec(10, 3, 7);
  auto out = warp_time_axis(s.values, 5, 2);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_FLOAT_EQ(out(7, f), s.at(5, f));
  for (std::size_t t = 0; t < 10; ++t) {
    const double src = warp_source(double(t), 5, 7, 9);
    const auto i0 = std::size_t(std::floor(src + 1e-12));
    const auto i1 = std::min<std::size_t>(i0 + 1, 9);
    const double frac = src - double(i0);
    for (std::size_t f = 0; f < 3; ++f) {
      const double expected = (1 - frac) * s.at(i0, f) + frac * s.at(i1, f);
      EXPECT_NEAR(out(t, f), expected, 1e-6) << t;
    }
  }
  EXPECT_EQ(out(0, 1), s.at(0, 1));
  EXPECT_EQ(out(9, 2), s.at(9, 2));
}

TEST(TimeWarpTest, ShortInputSkippedAndCounted) {
  auto s = random_spec(10, 4, 1);
  AugmentPolicy p;
  p.time_warp_w = 5;
  AugmentStats stats;
  std::mt19937_64 rng(1);
  EXPECT_EQ(time_warp(s, p, rng, &stats).values.values, s.values.values);
  EXPECT_EQ(stats.warps_skipped, 1u);
  EXPECT_EQ(stats.warps_applied, 0u);
}

TEST(TimeWarpTest, SeededDrawsMatchReplay) {
  auto s = random_spec(100, 4, 8);
  AugmentPolicy p;
  p.time_warp_w = 5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed), replay(seed);
    auto out = time_warp(s, p, rng);
    const auto anchor = std::uniform_int_distribution<std::size_t>(5, 94)(replay);
    const auto shift = std::uniform_int_distribution<std::ptrdiff_t>(-5, 5)(replay);
    const auto expected = shift == 0 ? s.values : warp_time_axis(s.values, anchor, shift);
    EXPECT_EQ(out.values.values, expected.values);
  }
}

TEST(AugmentTest, DisabledIsIdentity) {
  auto s = random_spec(64, 32, 1);
  std::mt19937_64 rng(1);
  EXPECT_EQ(augment(s, AugmentPolicy::disabled(), rng).values.values, s.values.values);
}

TEST(AugmentTest, SeededPipelineIsBitExact) {
  auto s = random_spec(416, 128, 4);
  const auto p = AugmentPolicy::defaults_for(416, 128);
  std::mt19937_64 a(123), b(123);
  auto x = augment(s, p, a);
  auto y = augment(s, p, b);
  EXPECT_EQ(x.values.values, y.values.values);
  EXPECT_NE(x.values.values, s.values.values);
}

TEST(AugmentTest, MaskOnlyPropertiesOverSeeds) {
  auto s = random_spec(64, 48, 9);
  AugmentPolicy p;
  p.time_warp_w = 0;
  p.freq_mask_max = 10;
  p.time_mask_max = 8;
  p.mask_value = 1e6f;
  const double bound = double(p.freq_masks * p.freq_mask_max * 64 + p.time_masks * p.time_mask_max * 48) / (64 * 48);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    auto out = augment(s, p, rng);
    ASSERT_EQ(out.frames(), 64u);
    ASSERT_EQ(out.bins(), 48u);
    std::size_t masked = 0;
    for (std::size_t i = 0; i < out.values.values.size(); ++i) {
      if (out.values.values[i] == 1e6f) {
        ++masked;
      } else {
        ASSERT_EQ(out.values.values[i], s.values.values[i]);
      }
    }
    EXPECT_LE(double(masked) / (64 * 48), bound);
  }
}

TEST(AugmentPolicyTest, DefaultsScaleToSmallInputs) {
  auto p = AugmentPolicy::defaults_for(416, 128);
  EXPECT_EQ(p.time_mask_max, 25u);
  EXPECT_EQ(p.freq_mask_max, 27u);
  EXPECT_EQ(p.freq_masks, 2u);
  EXPECT_EQ(p.time_masks, 2u);
  EXPECT_EQ(p.time_warp_w, 5u);
  p = AugmentPolicy::defaults_for(80, 16);
  EXPECT_EQ(p.time_mask_max, 10u);
  EXPECT_EQ(p.freq_mask_max, 16u);
}

}  // namespace
}  // namespace ainx::augment
