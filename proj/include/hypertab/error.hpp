#pragma once

#include <stdexcept>
#include <string>

namespace hypertab {

enum class ErrorCode {
  kParse = 1,
  kEmptyInput,
  kInvalidArgument,
  kShape,
  kIo,
  kCheckpoint,
  kNumeric,
};

// All library failures surface as this exception; the C layer maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace hypertab
