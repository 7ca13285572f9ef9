#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ainx/tensor.hpp"

namespace ainx {

template <typename T>
struct BasicNamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

using NamedTensor = BasicNamedTensor<float>;

/// Classic (non-Nesterov) momentum SGD:
///   v <- momentum * v + g
///   p <- p - lr * v
/// Velocity buffers are keyed by parameter name and start at zero.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9);

  double momentum() const { return momentum_; }

  /// Applies one update to every parameter that holds a gradient.
  void step(std::vector<NamedTensor>& params, double lr);

  /// Drops velocity buffers whose name starts with `prefix`.
  void forget(const std::string& prefix);

  const std::map<std::string, std::vector<float>>& velocities() const { return velocity_; }
  void set_velocity(const std::string& name, std::vector<float> v) { velocity_[name] = std::move(v); }

 private:
  double momentum_;
  std::map<std::string, std::vector<float>> velocity_;
};

}  // namespace ainx
