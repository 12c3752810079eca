#include "pit/optim.hpp"

#include <cmath>
#include <utility>

namespace pit {

Adam::Adam(std::vector<ParamRef> params, AdamOptions options)
    : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].tensor;
    if (!p.has_grad()) continue;
    auto data = p.data();
    const auto g = std::as_const(p).grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = params_[k].frozen_prefix; i < data.size(); ++i) {
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= opt_.lr * m_hat / (std::sqrt(v_hat) + opt_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Sgd::Sgd(std::vector<ParamRef> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Sgd::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].tensor;
    if (!p.has_grad()) continue;
    auto data = p.data();
    const auto g = std::as_const(p).grad();
    for (std::size_t i = params_[k].frozen_prefix; i < data.size(); ++i) {
      velocity_[k][i] = momentum_ * velocity_[k][i] + g[i];
      data[i] -= lr_ * velocity_[k][i];
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace pit
