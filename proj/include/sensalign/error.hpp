#pragma once

#include <stdexcept>
#include <string>

namespace sensalign {

enum class ErrorKind { validation, io };

// All toolkit failures. The kind decides the CLI exit code (1 validation, 2 I/O).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorKind::validation, what);
}

[[noreturn]] inline void fail_io(const std::string& what) {
  throw Error(ErrorKind::io, what);
}

}  // namespace sensalign
