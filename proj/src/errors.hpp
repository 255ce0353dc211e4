#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sfb {

// Error taxonomy shared between the C++ core and the C API status codes.
// Keep numbering in sync with sfb_status in include/singletfb/sfb.h.
enum class Err {
  Parse = 1,
  UnknownKey = 2,
  Range = 3,
  Dim = 4,
  NotHermitian = 5,
  KernelNone = 6,
  KernelDegenerate = 7,
  Stiff = 8,
  NotConverged = 9,
  Io = 10,
  Invalid = 11,
  Buffer = 12,
  Internal = 13,
};

inline const char* err_name(Err c) noexcept {
  switch (c) {
    case Err::Parse: return "E_PARSE";
    case Err::UnknownKey: return "E_UNKNOWN_KEY";
    case Err::Range: return "E_RANGE";
    case Err::Dim: return "E_DIM";
    case Err::NotHermitian: return "E_NOT_HERMITIAN";
    case Err::KernelNone: return "E_KERNEL_NONE";
    case Err::KernelDegenerate: return "E_KERNEL_DEGENERATE";
    case Err::Stiff: return "E_STIFF";
    case Err::NotConverged: return "E_NOT_CONVERGED";
    case Err::Io: return "E_IO";
    case Err::Invalid: return "E_INVALID";
    case Err::Buffer: return "E_BUFFER";
    case Err::Internal: return "E_INTERNAL";
  }
  return "E_INTERNAL";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Err code() const noexcept { return code_; }
  const char* code_name() const noexcept { return err_name(code_); }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

}  // namespace sfb
