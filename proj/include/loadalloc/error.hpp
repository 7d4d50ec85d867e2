#pragma once

#include <stdexcept>
#include <string>

namespace loadalloc {

/// Input or configuration does not satisfy a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation failed after its inputs were accepted (divergence, I/O, ...).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace loadalloc
