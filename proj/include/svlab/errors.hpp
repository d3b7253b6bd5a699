#pragma once

#include <stdexcept>
#include <string>

namespace svlab {

/// Failure category; the CLI maps config -> 2 and everything numerical -> 3.
enum class ErrorKind {
  config,
  invalid_mesh,
  mesh_mismatch,
  nan_input,
  no_bracket,
  nonconvergence,
  insufficient_window,
  boundary_violation,
  zero_denominator,
  stall,
  singular_jacobian,
  diverged,
  core_exclusion,
  invalid_radius,
  no_root,
  insufficient_data,
  nondegeneracy_failure,
  no_sign_change,
  degenerate_point,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  bool is_config() const noexcept { return kind_ == ErrorKind::config; }

 private:
  ErrorKind kind_;
};

}  // namespace svlab
