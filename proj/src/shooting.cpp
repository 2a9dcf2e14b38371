#include "homopt/shooting.hpp"

#include <cmath>
#include <optional>

#include "homopt/errors.hpp"

namespace homopt::shooting {
namespace {

// Evaluate f, mapping thrown domain errors and non-finite output to nullopt
// so the solver can treat a bad probe as a rejected step.
std::optional<Eigen::VectorXd> try_eval(const ResidualMap& f,
                                        const Eigen::VectorXd& z) {
  try {
    Eigen::VectorXd r = f(z);
    if (!r.allFinite()) return std::nullopt;
    return r;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

Eigen::MatrixXd fd_jacobian(const ResidualMap& f, const Eigen::VectorXd& z) {
  const int n = static_cast<int>(z.size());
  Eigen::MatrixXd jac;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-7 * std::max(1.0, std::abs(z[i]));
    Eigen::VectorXd zp = z;
    Eigen::VectorXd zm = z;
    zp[i] += h;
    zm[i] -= h;
    const auto rp = try_eval(f, zp);
    const auto rm = try_eval(f, zm);
    if (!rp || !rm)
      throw NonFiniteResidual(
          "residual not evaluable while probing the Jacobian");
    if (jac.size() == 0) jac.resize(rp->size(), n);
    jac.col(i) = (*rp - *rm) / (2.0 * h);
  }
  return jac;
}

SolveReport solve(const ResidualMap& f, const Eigen::VectorXd& z_guess,
                  const SolveOptions& opts) {
  SolveReport report;
  report.z = z_guess;

  const auto first = try_eval(f, z_guess);
  if (!first) {
    report.failure = Failure::NonFiniteResidual;
    return report;
  }
  Eigen::VectorXd res = *first;
  report.residual_norm = res.lpNorm<Eigen::Infinity>();
  if (report.residual_norm < opts.tol) {
    report.converged = true;
    return report;
  }

  double lm = 0.0;  // Levenberg parameter; zero runs the plain Newton step
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    report.iterations = iter;

    Eigen::MatrixXd jac;
    try {
      jac = fd_jacobian(f, report.z);
    } catch (const NonFiniteResidual&) {
      report.failure = Failure::NonFiniteResidual;
      return report;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * res;
    const Eigen::VectorXd damping =
        jtj.diagonal().array().max(1e-12).matrix();

    // One candidate per damping level; failures crank the damping up until
    // the step degenerates into a short gradient descent move.
    bool accepted = false;
    for (int trial = 0; trial <= opts.max_backtracks; ++trial) {
      Eigen::VectorXd step;
      if (lm == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (lu.isInvertible()) step = lu.solve(-res);
        if (step.size() == 0 || !step.allFinite()) {
          lm = 1e-4;
          continue;
        }
      } else {
        Eigen::MatrixXd a = jtj;
        a.diagonal() += lm * damping;
        step = a.ldlt().solve(-grad);
        if (!step.allFinite()) {
          lm *= 4.0;
          continue;
        }
      }

      const auto probe = try_eval(f, report.z + step);
      if (probe && probe->squaredNorm() < res.squaredNorm()) {
        report.z += step;
        res = *probe;
        report.residual_norm = res.lpNorm<Eigen::Infinity>();
        lm = lm > 1e-12 ? lm / 4.0 : 0.0;
        accepted = true;
        break;
      }
      lm = lm == 0.0 ? 1e-4 : lm * 4.0;
    }

    if (!accepted) {
      report.failure = Failure::SingularJacobian;
      return report;
    }
    if (report.residual_norm < opts.tol) {
      report.converged = true;
      return report;
    }
  }

  report.failure = Failure::MaxIterations;
  return report;
}

bool successful(const SolveReport& report) {
  return report.converged && report.z.size() > 0 && report.z.allFinite() &&
         report.z[0] > 0.0;
}

}  // namespace homopt::shooting
