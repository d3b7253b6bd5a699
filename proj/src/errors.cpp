#include "svlab/errors.hpp"

namespace svlab {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config-error";
    case ErrorKind::invalid_mesh: return "invalid-mesh";
    case ErrorKind::mesh_mismatch: return "mesh-mismatch";
    case ErrorKind::nan_input: return "nan-input";
    case ErrorKind::no_bracket: return "no-bracket";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::insufficient_window: return "insufficient-window";
    case ErrorKind::boundary_violation: return "boundary-violation";
    case ErrorKind::zero_denominator: return "zero-denominator";
    case ErrorKind::stall: return "stall";
    case ErrorKind::singular_jacobian: return "singular-jacobian";
    case ErrorKind::diverged: return "diverged";
    case ErrorKind::core_exclusion: return "core-exclusion";
    case ErrorKind::invalid_radius: return "invalid-radius";
    case ErrorKind::no_root: return "no-root";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::nondegeneracy_failure: return "nondegeneracy-failure";
    case ErrorKind::no_sign_change: return "no-sign-change";
    case ErrorKind::degenerate_point: return "degenerate-point";
  }
  return "error";
}

}  // namespace svlab
