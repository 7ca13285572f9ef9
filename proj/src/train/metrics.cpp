#include "ainx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ainx::metrics {

namespace {

void check_labels(const ScoreMatrix& s, std::span<const std::int32_t> labels) {
  if (labels.size() != s.rows) {
    throw std::invalid_argument(std::to_string(labels.size()) + " labels for " + std::to_string(s.rows) + " rows");
  }
  if (s.values.size() != s.rows * s.cols) throw std::invalid_argument("score matrix size mismatch");
  for (auto l : labels) {
    if (l < 0 || std::size_t(l) >= s.cols) {
      throw std::invalid_argument("label " + std::to_string(l) + " outside [0," + std::to_string(s.cols) + ")");
    }
  }
}

std::vector<float> column(const ScoreMatrix& s, std::size_t c) {
  std::vector<float> out(s.rows);
  for (std::size_t r = 0; r < s.rows; ++r) out[r] = s(r, c);
  return out;
}

std::vector<std::uint8_t> one_vs_rest(std::span<const std::int32_t> labels, std::size_t c) {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == std::int32_t(c);
  return out;
}

}  // namespace

double topk_accuracy(const ScoreMatrix& logits, std::span<const std::int32_t> labels, std::size_t k) {
  check_labels(logits, labels);
  if (k < 1 || k > logits.cols) throw std::invalid_argument("topk_accuracy: k must be in [1, num_classes]");
  if (logits.rows == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const std::size_t label = std::size_t(labels[r]);
    const float target = logits(r, label);
    // Rank of the label: classes scored higher, or equal with a lower index.
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const float v = logits(r, c);
      if (v > target || (v == target && c < label)) ++ahead;
    }
    hits += ahead < k;
  }
  return 100.0 * double(hits) / double(logits.rows);
}

std::vector<std::int32_t> argmax_rows(const ScoreMatrix& scores) {
  std::vector<std::int32_t> out(scores.rows);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols; ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[r] = std::int32_t(best);
  }
  return out;
}

ClassAverage mean_per_class_accuracy(std::span<const std::int32_t> predictions,
                                     std::span<const std::int32_t> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("prediction/label count mismatch");
  std::vector<std::size_t> total(num_classes), correct(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || std::size_t(labels[i]) >= num_classes) throw std::invalid_argument("label out of range");
    ++total[labels[i]];
    correct[labels[i]] += predictions[i] == labels[i];
  }
  ClassAverage out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (total[c] == 0) {
      ++out.excluded;
      continue;
    }
    out.value += double(correct[c]) / double(total[c]);
    ++out.included;
  }
  if (out.included) out.value = 100.0 * out.value / double(out.included);
  return out;
}

double average_precision(std::span<const float> scores, std::span<const std::uint8_t> positives) {
  if (scores.size() != positives.size()) throw std::invalid_argument("average_precision: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!positives[order[k]]) continue;
    ++hits;
    sum += double(hits) / double(k + 1);
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no positives");
  return sum / double(hits);
}

double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> positives) {
  if (scores.size() != positives.size()) throw std::invalid_argument("roc_auc: size mismatch");
  // Rank-sum form of Mann-Whitney U with average ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * double(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      if (positives[order[t]]) {
        pos_rank_sum += rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: needs both positives and negatives");
  const double u = pos_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

ClassAverage mean_average_precision(const ScoreMatrix& scores, std::span<const std::int32_t> labels) {
  check_labels(scores, labels);
  ClassAverage out;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    const auto pos = one_vs_rest(labels, c);
    if (std::find(pos.begin(), pos.end(), 1) == pos.end()) {
      ++out.excluded;
      continue;
    }
    out.value += average_precision(column(scores, c), pos);
    ++out.included;
  }
  if (out.included) out.value /= double(out.included);
  return out;
}

ClassAverage mean_roc_auc(const ScoreMatrix& scores, std::span<const std::int32_t> labels) {
  check_labels(scores, labels);
  ClassAverage out;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    const auto pos = one_vs_rest(labels, c);
    const auto n_pos = std::size_t(std::count(pos.begin(), pos.end(), 1));
    if (n_pos == 0 || n_pos == pos.size()) {
      ++out.excluded;
      continue;
    }
    out.value += roc_auc(column(scores, c), pos);
    ++out.included;
  }
  if (out.included) out.value /= double(out.included);
  return out;
}

// Acklam's rational approximation, refined with one Halley step against erfc.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

double d_prime(double auc) {
  if (!(auc > 0.0 && auc < 1.0)) throw std::invalid_argument("d_prime: auc must lie in (0,1)");
  return std::sqrt(2.0) * normal_quantile(auc);
}

std::vector<float> softmax_rows(const ScoreMatrix& logits) {
  std::vector<float> out(logits.rows * logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    float mx = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, logits(r, c));
    double z = 0;
    for (std::size_t c = 0; c < logits.cols; ++c) z += std::exp(double(logits(r, c) - mx));
    for (std::size_t c = 0; c < logits.cols; ++c) out[r * logits.cols + c] = float(std::exp(double(logits(r, c) - mx)) / z);
  }
  return out;
}

}  // namespace ainx::metrics
