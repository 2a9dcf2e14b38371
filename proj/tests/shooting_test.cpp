#include "doctest.h"

#include <cmath>

#include "homopt/errors.hpp"
#include "homopt/pendulum.hpp"
#include "homopt/shooting.hpp"

using namespace homopt::shooting;

TEST_CASE("a root is a fixed point of the solver") {
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return z.array().square() - 4.0;
  };
  Eigen::VectorXd root(2);
  root << 2.0, 2.0;
  const SolveReport report = solve(f, root);
  CHECK(report.converged);
  CHECK(report.iterations == 0);
  CHECK((report.z - root).norm() < 1e-10);
}

TEST_CASE("newton converges on a quadratic map") {
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd r(2);
    r[0] = z[0] * z[0] + z[1];
    r[1] = z[1] * z[1] - z[0] * z[1];
    return r;
  };
  Eigen::VectorXd guess(2);
  guess << 1.0, 1.0;
  const SolveReport report = solve(f, guess);
  CHECK(report.converged);
  CHECK(report.z.norm() < 1e-9);
}

TEST_CASE("fd_jacobian recovers a linear map") {
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 2.0, 3.0, -4.0, 0.5, 0.0, 7.0, -2.5, 1.5;
  const ResidualMap f = [&a](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return a * z;
  };
  Eigen::VectorXd z(3);
  z << 0.3, -0.7, 2.0;
  const Eigen::MatrixXd j = fd_jacobian(f, z);
  CHECK((j - a).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("fd_jacobian of a constant map is zero") {
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(z.size(), 5.0);
  };
  const Eigen::MatrixXd j = fd_jacobian(f, Eigen::VectorXd::Ones(4));
  CHECK(j.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("fd_jacobian of the pendulum residual matches forward differences") {
  const auto s0 = homopt::pendulum::nominal_state();
  const ResidualMap f = homopt::pendulum::make_residual_map(s0, 0.4);
  Eigen::VectorXd z(5);
  z << 3.0, 0.2, -0.4, 0.6, -0.1;

  const Eigen::MatrixXd j = fd_jacobian(f, z);
  const Eigen::VectorXd base = f(z);
  for (int c = 0; c < 5; ++c) {
    const double h = 1e-7 * std::max(1.0, std::abs(z[c]));
    Eigen::VectorXd zp = z;
    zp[c] += h;
    const Eigen::VectorXd forward = (f(zp) - base) / h;
    const double scale = std::max(1.0, forward.lpNorm<Eigen::Infinity>());
    CHECK((j.col(c) - forward).lpNorm<Eigen::Infinity>() / scale < 1e-4);
  }
}

TEST_CASE("fd_jacobian surfaces non-evaluable probes") {
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd r(1);
    r[0] = std::sqrt(z[0]);  // NaN for probes below zero
    return r;
  };
  CHECK_THROWS_AS(fd_jacobian(f, Eigen::VectorXd::Zero(1)),
                  homopt::NonFiniteResidual);
}

TEST_CASE("solver reports a non-evaluable start instead of throwing") {
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(
        1, std::numeric_limits<double>::quiet_NaN());
  };
  const SolveReport report = solve(f, Eigen::VectorXd::Ones(1));
  CHECK_FALSE(report.converged);
  CHECK(report.failure == Failure::NonFiniteResidual);
}

TEST_CASE("iteration cap is reported") {
  // Root at 0 but with an exponentially flat approach; a tiny budget runs
  // out first.
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return z.array().atan() * 2.0 + z.array() * 1e-4;
  };
  SolveOptions opts;
  opts.max_iterations = 2;
  const SolveReport report = solve(f, Eigen::VectorXd::Constant(1, 50.0), opts);
  CHECK_FALSE(report.converged);
  CHECK(report.failure == Failure::MaxIterations);
  CHECK(report.iterations == 2);
}

TEST_CASE("residual norm never increases across accepted iterates") {
  // The report's final residual never exceeds the starting one even on a
  // map whose Newton steps overshoot badly.
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd r(2);
    r[0] = std::sin(3.0 * z[0]) + 0.1 * z[0];
    r[1] = z[1] * z[1] * z[1] - z[0];
    return r;
  };
  Eigen::VectorXd guess(2);
  guess << 2.0, -1.5;
  const double start_norm = f(guess).norm();
  const SolveReport report = solve(f, guess);
  CHECK(f(report.z).norm() <= start_norm + 1e-12);
}

TEST_CASE("successful applies the duration sanity bound") {
  SolveReport report;
  report.converged = true;
  report.z = Eigen::VectorXd::Constant(3, 1.0);
  report.z[0] = 2.0;
  CHECK(successful(report));

  report.z[0] = -1.0;
  CHECK_FALSE(successful(report));

  report.z[0] = 2.0;
  report.converged = false;
  CHECK_FALSE(successful(report));

  report.converged = true;
  report.z[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(successful(report));
}

TEST_CASE("a singular flat landscape reports SingularJacobian") {
  // Constant nonzero residual: the Jacobian is exactly zero, damping cannot
  // produce a descent step.
  const ResidualMap f = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(2, 1.0);
  };
  const SolveReport report = solve(f, Eigen::VectorXd::Zero(2));
  CHECK_FALSE(report.converged);
  CHECK(report.failure == Failure::SingularJacobian);
}
