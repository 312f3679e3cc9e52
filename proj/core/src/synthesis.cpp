// SPDX-License-Identifier: Apache-2.0
#include "segzsl/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"

namespace segzsl {

ExemplarSet concat(const ExemplarSet& a, const ExemplarSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.features.cols() != b.features.cols()) {
    fail(Errc::dim_mismatch,
         "exemplar concat: widths " + std::to_string(a.features.cols()) +
             " and " + std::to_string(b.features.cols()) + " differ");
  }
  ExemplarSet out;
  const std::size_t d = a.features.cols();
  out.features = Tensor({a.size() + b.size(), d});
  std::copy(a.features.data().begin(), a.features.data().end(),
            out.features.data().begin());
  std::copy(b.features.data().begin(), b.features.data().end(),
            out.features.data().begin() + a.size() * d);
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(),
                        b.provenance.end());
  return out;
}

ExemplarSet synthesize_class(const ModelParams& params,
                             const Tensor& class_attr, int class_id,
                             std::size_t n, std::uint64_t seed,
                             SynthesisMode mode) {
  if (n < 1) {
    fail(Errc::invalid_argument, "synthesize_class: n must be >= 1");
  }
  if (class_attr.rank() != 1 ||
      class_attr.numel() != params.dims.attr_dim) {
    fail(Errc::dim_mismatch,
         "synthesize_class: attribute vector " + shape_str(class_attr) +
             " does not match attr_dim " +
             std::to_string(params.dims.attr_dim));
  }
  RngStream rng(derive_seed(seed, StreamId::synthesis,
                            static_cast<std::uint64_t>(class_id)));
  const std::size_t dz = params.dims.latent_dim;
  const std::size_t d = params.dims.feature_dim;
  const std::size_t l = params.dims.attr_dim;

  Tensor z({n, dz});
  Tensor eps({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(z.data().subspan(i * dz, dz));
    if (mode == SynthesisMode::sample) {
      rng.fill_normal(eps.data().subspan(i * d, d));
    }
  }
  Tensor attrs({n, l});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l; ++j) attrs.at(i, j) = class_attr[j];
  }

  GaussianDiag out = generate(params, z, attrs);
  ExemplarSet set;
  if (mode == SynthesisMode::sample) {
    set.features = reparameterize(out, eps);
  } else {
    set.features = std::move(out.mean);
  }
  if (!set.features.all_finite()) {
    fail(Errc::numeric_failure, "synthesize_class: non-finite features");
  }
  set.labels.assign(n, class_id);
  set.provenance.assign(n, Provenance::synthesized);
  return set;
}

ExemplarSet synthesize_all(const ModelParams& params,
                           const AttributeBank& bank,
                           std::span<const int> classes,
                           std::size_t n_per_class, std::uint64_t seed,
                           SynthesisMode mode, std::size_t threads) {
  if (classes.empty()) {
    fail(Errc::invalid_argument, "synthesize_all: no classes requested");
  }
  std::vector<ExemplarSet> per_class(classes.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      per_class[i] = synthesize_class(params, bank.row(classes[i]),
                                      classes[i], n_per_class, seed, mode);
    }
  };
  if (threads <= 1 || classes.size() <= 1) {
    run_range(0, classes.size());
  } else {
    const std::size_t workers = std::min(threads, classes.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (classes.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(begin + chunk, classes.size());
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  ExemplarSet out;
  for (const ExemplarSet& part : per_class) out = concat(out, part);
  return out;
}

Tensor impute_attributes(const ModelParams& params,
                         const Tensor& x_unlabeled) {
  if (x_unlabeled.rank() != 2 ||
      x_unlabeled.cols() != params.dims.feature_dim) {
    fail(Errc::dim_mismatch,
         "impute_attributes: input " + shape_str(x_unlabeled) +
             " does not match feature_dim " +
             std::to_string(params.dims.feature_dim));
  }
  return regress(params, x_unlabeled);
}

}  // namespace segzsl
