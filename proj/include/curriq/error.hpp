#pragma once

#include <stdexcept>
#include <string>

namespace curriq {

// Coarse failure categories; the CLI maps them onto process exit codes.
enum class ErrorKind {
  Usage,    // bad arguments or configuration
  Data,     // malformed or missing input data
  Service,  // an external service failed or timed out
  Numeric,  // non-finite values inside an optimizer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::Usage, what);
}
inline Error data_error(const std::string& what) {
  return Error(ErrorKind::Data, what);
}
inline Error service_error(const std::string& what) {
  return Error(ErrorKind::Service, what);
}

// 0 success, 1 usage/config, 2 data, 3 external service.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return 1;
    case ErrorKind::Data:
    case ErrorKind::Numeric:
      return 2;
    case ErrorKind::Service:
      return 3;
  }
  return 2;
}

}  // namespace curriq
