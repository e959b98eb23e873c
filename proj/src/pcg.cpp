#include "bt/pcg.hpp"

#include <cmath>

namespace bt {

PcgResult pcg_solve(const LinearOperator& apply_A, const Eigen::VectorXd& b, const Eigen::VectorXd& diagonal,
                    double tol, int max_iter) {
  const Eigen::Index n = b.size();
  PcgResult res;
  res.x = Eigen::VectorXd::Zero(n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_diag(i) = diagonal(i) > 0 ? 1.0 / diagonal(i) : 1.0;

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  Eigen::VectorXd Ap(n);
  double rz = r.dot(z);
  res.relative_residual = 1.0;

  for (int it = 0; it < max_iter; ++it) {
    apply_A(p, Ap);
    const double curvature = p.dot(Ap);
    if (!(curvature > 1e-300 * p.squaredNorm()) || !std::isfinite(curvature)) {
      res.degraded = true;
      break;
    }
    const double step = rz / curvature;
    res.x += step * p;
    r -= step * Ap;
    res.iterations = it + 1;
    res.relative_residual = r.norm() / b_norm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return res;
}

}  // namespace bt
