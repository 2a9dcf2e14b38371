#pragma once

// Damped Newton solver for square shooting systems F(z) = 0. The Jacobian
// comes from central finite differences; steps fall back to Levenberg
// damping when the plain Newton direction stalls or the Jacobian loses rank.

#include <Eigen/Dense>
#include <functional>

namespace homopt::shooting {

using ResidualMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct SolveOptions {
  double tol = 1e-8;        // infinity norm of the residual
  int max_iterations = 200;
  int max_backtracks = 30;  // step halvings per iteration
};

enum class Failure {
  None,
  MaxIterations,      // ran out of iterations before reaching tol
  SingularJacobian,   // no productive direction even with heavy damping
  NonFiniteResidual,  // residual not evaluable at the starting point
};

struct SolveReport {
  Eigen::VectorXd z;          // final iterate, returned even on failure
  double residual_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  Failure failure = Failure::None;
};

// Central differences with per-component step 1e-7 * max(1, |z_i|).
// Throws NonFiniteResidual if any probe fails to evaluate.
Eigen::MatrixXd fd_jacobian(const ResidualMap& f, const Eigen::VectorXd& z);

SolveReport solve(const ResidualMap& f, const Eigen::VectorXd& z_guess,
                  const SolveOptions& opts = {});

// Converged with a finite iterate and a positive leading component (both
// problems put the flight time first, so z[0] <= 0 is never physical).
bool successful(const SolveReport& report);

}  // namespace homopt::shooting
