#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rankvol {

enum class ErrorCode {
  invalid_input,
  numerical_blowup,
  data_quality,
  inconsistent_inputs,
  undefined_horizon,
  bankruptcy,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carried by every failing operation in the library. The code
/// decides the C status and the CLI exit status; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the simulator when a step produces a non-finite weight.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::size_t step, double time, const std::string& what)
      : Error(ErrorCode::numerical_blowup, what), step_(step), time_(time) {}
  std::size_t step() const noexcept { return step_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t step_;
  double time_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_input, what);
}

}  // namespace rankvol
