// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "segzsl/tensor.hpp"

namespace segzsl {

// Shared binary framing for model and classifier checkpoints:
//   8-byte magic "SEGZSLCK", little-endian u32 version (= 1), u32 header
//   length, UTF-8 JSON header, then raw little-endian f64 payload tensors in
//   the order the header declares.
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'G', 'Z',
                                             'S', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class FramedWriter {
 public:
  // Buffers everything and commits on finish() via rename, so a failed write
  // never leaves a partial file behind.
  FramedWriter(std::filesystem::path path, const std::string& header_json);
  void write_tensor(const Tensor& t);
  void finish();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool finished_ = false;
};

class FramedReader {
 public:
  // Validates magic and version eagerly; format_version/truncated_file
  // errors carry the offending path.
  explicit FramedReader(std::filesystem::path path);

  const std::string& header_json() const { return header_json_; }

  // Reads exactly product(shape) doubles; truncation is an error.
  Tensor read_tensor(std::vector<std::size_t> shape);

  // Errors if payload bytes remain.
  void expect_end();

 private:
  void read_raw(void* out, std::size_t bytes, const char* what);

  std::filesystem::path path_;
  std::ifstream in_;
  std::string header_json_;
};

// Convenience for whole-file text I/O. write_text_atomic writes to a
// temporary sibling and renames over the target.
std::string read_text_file(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace segzsl
