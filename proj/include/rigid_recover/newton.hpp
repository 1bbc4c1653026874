#pragma once

#include <Eigen/Core>
#include <functional>

namespace rigid {

// Residual F(x) and, when the pointer is non-null, its Jacobian.
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, Eigen::MatrixXd* jacobian)>;

struct NewtonOptions {
  int max_iterations = 40;
  double backtrack_factor = 0.5;
  int max_backtracks = 30;
  double tolerance = 1e-12;  // on the infinity norm of F
  // Extra full steps after convergence; each must not increase |F|.
  int polish_steps = 2;
};

struct NewtonResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // infinity norm at x
  int iterations = 0;
  bool converged = false;
};

// Damped Newton for square (or overdetermined, via least squares) systems,
// with backtracking on the residual norm.
NewtonResult damped_newton(const ResidualFn& f, Eigen::VectorXd x0, const NewtonOptions& options = {});

// sigma_min / sigma_max of a matrix, 0 when it is all zeros.
double inverse_condition(const Eigen::MatrixXd& m);

}  // namespace rigid
