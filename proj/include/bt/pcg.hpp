#pragma once

#include <Eigen/Core>

#include <functional>

namespace bt {

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
  /// Set when a non-positive curvature direction stopped the iteration.
  bool degraded = false;
};

using LinearOperator = std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)>;

/// Jacobi-preconditioned conjugate gradient for A x = b with A symmetric
/// positive semi-definite, given as an operator. Zero or negative entries of
/// `diagonal` fall back to 1. Starts from x = 0.
PcgResult pcg_solve(const LinearOperator& apply_A, const Eigen::VectorXd& b, const Eigen::VectorXd& diagonal,
                    double tol = 1e-6, int max_iter = 100);

}  // namespace bt
