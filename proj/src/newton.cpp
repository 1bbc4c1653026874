#include "rigid_recover/newton.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace rigid {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

double inverse_condition(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  if (smax == 0.0) return 0.0;
  return s(s.size() - 1) / smax;
}

NewtonResult damped_newton(const ResidualFn& f, Eigen::VectorXd x0, const NewtonOptions& options) {
  NewtonResult out;
  out.x = std::move(x0);
  Eigen::MatrixXd jac;
  Eigen::VectorXd fx = f(out.x, &jac);
  if (!all_finite(fx)) {
    out.residual = INFINITY;
    return out;
  }
  double norm = fx.norm();
  out.residual = inf_norm(fx);

  int polished = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it;
    if (out.residual < options.tolerance) {
      out.converged = true;
      if (polished >= options.polish_steps) break;
    }
    Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-fx);
    if (!all_finite(step)) break;

    double lambda = 1.0;
    bool accepted = false;
    Eigen::MatrixXd trial_jac;
    for (int b = 0; b <= options.max_backtracks; ++b) {
      Eigen::VectorXd trial = out.x + lambda * step;
      Eigen::VectorXd ft = f(trial, &trial_jac);
      if (all_finite(ft)) {
        const double tn = ft.norm();
        if (tn < norm || (out.converged && tn <= norm)) {
          out.x = std::move(trial);
          fx = std::move(ft);
          jac = std::move(trial_jac);
          norm = tn;
          out.residual = inf_norm(fx);
          accepted = true;
          break;
        }
      }
      if (out.converged) break;  // polishing only takes full steps
      lambda *= options.backtrack_factor;
    }
    if (out.converged) {
      ++polished;
      if (!accepted) break;
      continue;
    }
    if (!accepted) break;
  }
  out.converged = out.residual < options.tolerance;
  return out;
}

}  // namespace rigid
