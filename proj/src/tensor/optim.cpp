#include "ainx/optim.hpp"

#include <stdexcept>

namespace ainx {

SgdMomentum::SgdMomentum(double momentum) : momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0,1), got " + std::to_string(momentum));
  }
}

void SgdMomentum::step(std::vector<NamedTensor>& params, double lr) {
  const float m = static_cast<float>(momentum_);
  const float rate = static_cast<float>(lr);
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    auto& v = velocity_[name];
    if (v.size() != p.numel()) v.assign(p.numel(), 0.0f);
    auto data = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = m * v[i] + grad[i];
      data[i] -= rate * v[i];
    }
  }
}

void SgdMomentum::forget(const std::string& prefix) {
  for (auto it = velocity_.begin(); it != velocity_.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      it = velocity_.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace ainx
