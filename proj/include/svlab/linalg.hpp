#pragma once

#include <Eigen/Sparse>
#include <vector>

namespace svlab {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Direct sparse solve; throws singular-jacobian on factorization failure.
Eigen::VectorXd direct_solve(const SpMat& A, const Eigen::VectorXd& b);

}  // namespace svlab
