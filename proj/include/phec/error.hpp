#pragma once

#include <stdexcept>
#include <string>

namespace phec {

/// Failure class, mapped onto the CLI exit codes (1 usage/config, 2 data, 3 numeric).
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

struct UsageError : Error {
  UsageError(const std::string& module, const std::string& what) : Error(ErrorKind::Usage, module, what) {}
};

struct DataError : Error {
  DataError(const std::string& module, const std::string& what) : Error(ErrorKind::Data, module, what) {}
};

struct NumericError : Error {
  NumericError(const std::string& module, const std::string& what) : Error(ErrorKind::Numeric, module, what) {}
};

}  // namespace phec
