#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "segzsl/networks.hpp"
#include "segzsl/rng.hpp"
#include "segzsl/tensor.hpp"

namespace segzsl::test {

// Relative-error comparison with an absolute floor for near-zero entries,
// matching the gradient-oracle tolerance contract.
inline bool close_rel(double got, double want, double rel = 1e-4,
                      double abs_floor = 1e-8) {
  const double diff = std::fabs(got - want);
  if (diff <= abs_floor) return true;
  return diff <= rel * std::max(std::fabs(got), std::fabs(want));
}

// Central finite differences of a scalar function of the model parameters.
// The callback must be a pure function of the params (any internal
// randomness re-seeded identically per call).
using ParamLossFn = std::function<double(const ModelParams&)>;

struct FdCheck {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
};

inline FdCheck fd_check_group(ModelParams& scratch,
                              const std::vector<Tensor*>& scratch_view,
                              const std::vector<Tensor>& analytic,
                              const ParamLossFn& fn, double h = 1e-5,
                              double rel = 1e-4, double abs_floor = 1e-8) {
  FdCheck result;
  for (std::size_t ti = 0; ti < scratch_view.size(); ++ti) {
    Tensor& target = *scratch_view[ti];
    for (std::size_t j = 0; j < target.numel(); ++j) {
      const double saved = target[j];
      target[j] = saved + h;
      const double up = fn(scratch);
      target[j] = saved - h;
      const double down = fn(scratch);
      target[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double got = analytic[ti][j];
      ++result.checked;
      const double diff = std::fabs(got - fd);
      const double denom = std::max(std::fabs(got), std::fabs(fd));
      if (diff > abs_floor && denom > 0.0) {
        result.worst_rel = std::max(result.worst_rel, diff / denom);
      }
      if (!close_rel(got, fd, rel, abs_floor)) ++result.failed;
    }
  }
  return result;
}

struct ModelFdOutcome {
  FdCheck encoder;
  FdCheck generator;
  FdCheck regressor;

  bool ok() const {
    return encoder.failed == 0 && generator.failed == 0 &&
           regressor.failed == 0;
  }
  double worst() const {
    return std::max(encoder.worst_rel,
                    std::max(generator.worst_rel, regressor.worst_rel));
  }
};

// Which parameter groups a loss is defined to propagate gradient into.
// Frozen (stop-gradient) groups must be excluded from FD comparison: the
// loss value still depends on them, but the defined gradient is zero by the
// routing contract.
struct GroupMask {
  bool encoder = true;
  bool generator = true;
  bool regressor = true;
};

// FD comparison over the unmasked parameter groups of the model.
inline ModelFdOutcome fd_check_model(const ModelParams& params,
                                     const ModelGrads& grads,
                                     const ParamLossFn& fn,
                                     GroupMask mask = {}, double h = 1e-5,
                                     double rel = 1e-4,
                                     double abs_floor = 1e-8) {
  ModelFdOutcome out;
  ModelParams scratch = params;
  if (mask.encoder) {
    out.encoder = fd_check_group(scratch, scratch.encoder.tensors(),
                                 grads.encoder, fn, h, rel, abs_floor);
  }
  if (mask.generator) {
    out.generator = fd_check_group(scratch, scratch.generator.tensors(),
                                   grads.generator, fn, h, rel, abs_floor);
  }
  if (mask.regressor) {
    out.regressor = fd_check_group(scratch, scratch.regressor.tensors(),
                                   grads.regressor, fn, h, rel, abs_floor);
  }
  return out;
}

// Small dims used by gradient-oracle tests.
inline Dims tiny_dims() { return Dims{6, 3, 2, 4}; }

inline Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng,
                            double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

inline bool params_equal(const ModelParams& a, const ModelParams& b) {
  const auto ea = a.encoder.tensors();
  const auto eb = b.encoder.tensors();
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (!tensors_equal(*ea[i], *eb[i])) return false;
  }
  const auto ga = a.generator.tensors();
  const auto gb = b.generator.tensors();
  for (std::size_t i = 0; i < ga.size(); ++i) {
    if (!tensors_equal(*ga[i], *gb[i])) return false;
  }
  const auto ra = a.regressor.tensors();
  const auto rb = b.regressor.tensors();
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (!tensors_equal(*ra[i], *rb[i])) return false;
  }
  return true;
}

inline bool grads_all_zero(const std::vector<Tensor>& group) {
  for (const Tensor& t : group) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (t[i] != 0.0) return false;
    }
  }
  return true;
}

inline bool grads_any_nonzero(const std::vector<Tensor>& group) {
  return !grads_all_zero(group);
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("segzsl_test_" + tag + "_" + std::to_string(::getpid()) +
                    "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace segzsl::test
