#pragma once

#include <stdexcept>
#include <string>

namespace caring {

// Broad failure classes; the C API and the CLI map them onto status / exit codes.
enum class ErrorKind {
  InvalidArgument,  // violated precondition on a call (bad config, shape mismatch)
  Data,             // unreadable or inconsistent input files
  Numeric,          // non-finite loss or parameters during fitting
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::InvalidArgument, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace caring
