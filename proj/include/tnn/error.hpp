#pragma once

#include <stdexcept>
#include <string>

namespace tnn {

enum class ErrorKind {
  InvalidArgument,
  Domain,
  Numerical,
  DegenerateBasis,
  SingularSystem,
  Validation,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so the CLI can map it
/// onto an exit status (1 for configuration problems, 2 for numerical ones).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool numerical() const noexcept {
    return kind_ == ErrorKind::Numerical || kind_ == ErrorKind::DegenerateBasis ||
           kind_ == ErrorKind::SingularSystem;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace tnn
