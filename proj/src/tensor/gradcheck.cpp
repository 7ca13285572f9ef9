#include "ainx/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ainx {

GradCheckResult grad_check(const ScalarFunction& f, std::span<Tensor64> inputs, double eps) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  backward(f(inputs));
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.has_grad()) {
      analytic.emplace_back(in.grad().begin(), in.grad().end());
    } else {
      analytic.emplace_back(in.numel(), 0.0);
    }
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + eps;
      const double plus = f(inputs).item();
      values[e] = saved - eps;
      const double minus = f(inputs).item();
      values[e] = saved;
      const double numeric = (plus - minus) / (2 * eps);
      const double a = analytic[i][e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_relative_error) {
        result = {err, i, e, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace ainx
