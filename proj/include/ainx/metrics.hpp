#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ainx::metrics {

/// Row-major N x K score matrix.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const float> values;

  float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Percentage of samples whose label is among the k largest scores. Ties
/// rank the lower class index first.
double topk_accuracy(const ScoreMatrix& logits, std::span<const std::int32_t> labels, std::size_t k);

/// Top-1 prediction per row (lowest index on ties).
std::vector<std::int32_t> argmax_rows(const ScoreMatrix& scores);

struct ClassAverage {
  double value = 0.0;             // unweighted mean over included classes
  std::size_t included = 0;
  std::size_t excluded = 0;       // classes skipped for lack of data
};

/// Mean per-class recall, as a percentage. Classes without samples are
/// excluded and counted.
ClassAverage mean_per_class_accuracy(std::span<const std::int32_t> predictions,
                                     std::span<const std::int32_t> labels, std::size_t num_classes);

/// Average precision of one ranking: sum over hits of precision@k divided
/// by the number of positives. Higher scores rank first; ties keep the
/// input order.
double average_precision(std::span<const float> scores, std::span<const std::uint8_t> positives);

/// Mann-Whitney U / (n+ n-), ties counted 0.5.
double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> positives);

/// One-vs-rest mean AP over classes with at least one positive.
ClassAverage mean_average_precision(const ScoreMatrix& scores, std::span<const std::int32_t> labels);
/// One-vs-rest mean AUC over classes with both positives and negatives.
ClassAverage mean_roc_auc(const ScoreMatrix& scores, std::span<const std::int32_t> labels);

/// Standard normal quantile.
double normal_quantile(double p);
/// sqrt(2) * Phi^-1(auc); auc must lie in (0, 1).
double d_prime(double auc);

/// Row-wise softmax.
std::vector<float> softmax_rows(const ScoreMatrix& logits);

}  // namespace ainx::metrics
