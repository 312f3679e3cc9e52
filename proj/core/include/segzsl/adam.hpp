// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segzsl/tensor.hpp"

namespace segzsl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. One state instance owns the moment buffers for
// one parameter group; the step counter is incremented before correction.
class AdamState {
 public:
  AdamState(std::string group_name, AdamConfig cfg,
            std::span<const Tensor* const> params);

  // In-place update. grads must align with the params the state was built
  // for; a non-finite gradient raises a numeric_failure naming the group.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  std::uint64_t t() const { return t_; }
  const std::string& group() const { return group_; }

 private:
  std::string group_;
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

}  // namespace segzsl
