#include "svlab/linalg.hpp"

#include <Eigen/SparseLU>

#include "svlab/errors.hpp"

namespace svlab {

Eigen::VectorXd direct_solve(const SpMat& A, const Eigen::VectorXd& b) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw Error(ErrorKind::singular_jacobian, "sparse LU failed: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite())
    throw Error(ErrorKind::singular_jacobian, "sparse LU solve failed");
  return x;
}

}  // namespace svlab
