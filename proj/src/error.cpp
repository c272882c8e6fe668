#include "tnn/error.hpp"

namespace tnn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Domain: return "domain-error";
    case ErrorKind::Numerical: return "numerical-error";
    case ErrorKind::DegenerateBasis: return "degenerate-basis";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::Validation: return "validation-error";
  }
  return "error";
}

}  // namespace tnn
