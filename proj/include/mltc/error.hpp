#pragma once

#include <stdexcept>
#include <string>

namespace mltc {

/// Bad input: unreadable files, malformed rows, invalid arguments or configs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric failure during optimization (non-finite loss or gradient).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace mltc
