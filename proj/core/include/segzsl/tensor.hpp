// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace segzsl {

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar, rank 1 a
// vector, rank 2 a matrix; nothing higher is needed here.
class Tensor {
 public:
  // Rank-0 zero scalar.
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor zeros_like(const Tensor& other);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }

  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double item() const;  // numel() must be 1

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_str(const Tensor& t);
std::string shape_str(std::span<const std::size_t> shape);

// Accumulating matrix kernels on raw row-major buffers. `accumulate` keeps
// existing values in c, otherwise c is overwritten.
// gemm_nn: c[m,n] (+)= a[m,k] * b[k,n]
// gemm_nt: c[m,n] (+)= a[m,k] * b[n,k]^T
// gemm_tn: c[m,n] (+)= a[k,m]^T * b[k,n]
void gemm_nn(std::span<double> c, std::span<const double> a,
             std::span<const double> b, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_nt(std::span<double> c, std::span<const double> a,
             std::span<const double> b, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(std::span<double> c, std::span<const double> a,
             std::span<const double> b, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

}  // namespace segzsl
