#pragma once

#include <stdexcept>
#include <string>

namespace ggrasp {

enum class ErrorCode {
  kInvalidArgument = 1,
  kDegenerate,
  kNoGroundTruth,
  kInvalidDepth,
  kIo,
  kFormat,
  kConfig,
  kDiverged,
  kEmptyLabels,
  kShape,
};

// Every failure in the core library surfaces as this exception; the C API
// maps the code onto gg_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ggrasp
