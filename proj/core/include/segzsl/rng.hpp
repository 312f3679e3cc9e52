// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace segzsl {

std::uint64_t splitmix64(std::uint64_t x);

// Stream ids of the seed-derivation scheme. Every random decision in the
// pipeline draws from RngStream(derive_seed(master, stream, counter)), where
// the counter is the stream-specific position (epoch index, global step,
// class id, sweep count, ...). Two runs with the same master seed therefore
// replay the exact same draw sequence regardless of wall-clock or threading.
enum class StreamId : std::uint64_t {
  init = 1,           // parameter initialization
  shuffle = 2,        // minibatch shuffling; counter = global epoch
  sampler = 3,        // z / epsilon / attribute draws; counter = global step
  split = 4,          // GZSL class-stratified split; counter = class id
  synthesis = 5,      // exemplar generation; counter = class id
  classifier = 6,     // classifier-internal shuffles; counter = epoch
  dataset_attrs = 7,  // synthetic benchmark attribute rows
  dataset_map = 8,    // synthetic benchmark attribute->feature map
  dataset_rows = 9,   // synthetic benchmark example noise; counter = class id
  train = 10,         // master -> trainer seed
};

std::uint64_t derive_seed(std::uint64_t master, StreamId stream,
                          std::uint64_t counter);

// xoshiro256++ with hand-rolled uniform/normal/bounded-int draws so that the
// generated sequence depends only on the seed, never on a standard-library
// distribution implementation.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller with a cached spare.
  double normal();

  // Uniform integer on [0, n), Lemire's unbiased method. n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace segzsl
