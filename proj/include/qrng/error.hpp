#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qrng {

enum class ErrorCode {
  parameter_domain,
  internal_consistency,
  undefined_conditional,
  insufficient_entropy,
  encoding,
  insufficient_data,
  dimension,
  format,
  config,
  transport,
  timeout,
  protocol,
  negotiation,
  authorization,
  not_found,
  incomplete_stream,
};

std::string_view to_string(ErrorCode code) noexcept;

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

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace qrng
