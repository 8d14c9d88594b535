#pragma once

#include <stdexcept>
#include <string>

namespace breathscope {

enum class ErrorKind {
  config,             // bad or missing configuration/calibration keys
  format,             // malformed input file or image layout
  sequence,           // frame numbering problems (gaps, empty)
  parameter,          // invalid argument to an operation
  validation,         // data fails a structural invariant
  geometry,           // degenerate camera geometry
  invalid_disparity,  // non-positive disparity passed to depth conversion
  degeneracy,         // rank-deficient point sets in rigid fitting
  alignment,          // ICP could not align (too few correspondences)
  coverage,           // too little grid overlap for a depth delta
  no_signal,          // empty spectrum in the plausible breathing band
  io,                 // filesystem / stream failures
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace breathscope
