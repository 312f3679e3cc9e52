// SPDX-License-Identifier: Apache-2.0
#include "segzsl/adam.hpp"

#include <cmath>

#include "segzsl/error.hpp"

namespace segzsl {

AdamState::AdamState(std::string group_name, AdamConfig cfg,
                     std::span<const Tensor* const> params)
    : group_(std::move(group_name)), cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.push_back(Tensor::zeros_like(*p));
    v_.push_back(Tensor::zeros_like(*p));
  }
}

void AdamState::step(std::span<Tensor* const> params,
                     std::span<const Tensor> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    fail(Errc::shape_mismatch,
         "adam[" + group_ + "]: expected " + std::to_string(m_.size()) +
             " parameter tensors, got " + std::to_string(params.size()) +
             " params / " + std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) {
      fail(Errc::shape_mismatch,
           "adam[" + group_ + "]: grad " + std::to_string(i) + " has shape " +
               shape_str(grads[i]) + ", parameter has " +
               shape_str(*params[i]));
    }
    if (!grads[i].all_finite()) {
      fail(Errc::numeric_failure,
           "adam[" + group_ + "]: non-finite gradient in tensor " +
               std::to_string(i));
    }
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < theta.numel(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace segzsl
