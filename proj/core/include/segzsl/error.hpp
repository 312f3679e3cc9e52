// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace segzsl {

// Error categories. The CLI maps numeric_failure to exit code 3 and every
// other category to exit code 2.
enum class Errc {
  shape_mismatch,
  invalid_argument,
  io_failure,
  format_version,
  truncated_file,
  dim_mismatch,
  numeric_failure,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace segzsl
