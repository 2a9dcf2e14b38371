#include "doctest.h"

#include <cmath>

#include "homopt/errors.hpp"
#include "homopt/ode.hpp"

using homopt::ode::IntegratorConfig;
using homopt::ode::integrate;
using homopt::ode::sample_at;
using homopt::ode::SolutionPath;

namespace {

void zero_field(const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
  dydt.setZero(y.size());
}

void exp_field(const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
  dydt = y;
}

// Planar two-body around a unit-mu primary, state [x, y, vx, vy].
void two_body_field(const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
  dydt.resize(4);
  const double r3 = std::pow(y.head<2>().norm(), 3);
  dydt[0] = y[2];
  dydt[1] = y[3];
  dydt[2] = -y[0] / r3;
  dydt[3] = -y[1] / r3;
}

Eigen::VectorXd circular_orbit_start() {
  Eigen::VectorXd y0(4);
  y0 << 1.0, 0.0, 0.0, 1.0;
  return y0;
}

double orbit_energy(const Eigen::VectorXd& y) {
  return 0.5 * y.tail<2>().squaredNorm() - 1.0 / y.head<2>().norm();
}

}  // namespace

TEST_CASE("zero field keeps the state constant") {
  Eigen::VectorXd y0(2);
  y0 << 1.0, 2.0;
  const SolutionPath path = integrate(zero_field, y0, 0.0, 1.0);
  REQUIRE(path.times.front() == 0.0);
  REQUIRE(path.times.back() == 1.0);
  for (const auto& s : path.states) {
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 2.0);
  }
  // Dense output of a constant path is the initial state everywhere.
  for (double t : {0.0, 0.25, 0.7, 1.0}) {
    const Eigen::VectorXd s = sample_at(path, t);
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("scalar exponential reaches e at t=1") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const SolutionPath path = integrate(exp_field, y0, 0.0, 1.0);
  CHECK(std::abs(path.final_state()[0] - std::exp(1.0)) < 1e-10);
  CHECK(std::abs(sample_at(path, 0.5)[0] - std::exp(0.5)) < 1e-8);
}

TEST_CASE("final time lands on tf") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const SolutionPath path = integrate(exp_field, y0, 0.0, 1.0);
  CHECK(std::abs(path.t_end() - 1.0) <= 1e-12);
  for (std::size_t i = 1; i < path.times.size(); ++i)
    CHECK(path.times[i] > path.times[i - 1]);
  CHECK(path.states.size() == path.times.size());
  CHECK(path.interp.size() + 1 == path.times.size());
}

TEST_CASE("circular two-body orbit closes after one period") {
  const SolutionPath path =
      integrate(two_body_field, circular_orbit_start(), 0.0, 2.0 * M_PI);
  const Eigen::VectorXd yf = path.final_state();
  CHECK((yf - circular_orbit_start()).norm() < 1e-9);
}

TEST_CASE("two-body energy drift stays below 1e-9 over a period") {
  const SolutionPath path =
      integrate(two_body_field, circular_orbit_start(), 0.0, 2.0 * M_PI);
  const double e0 = orbit_energy(path.states.front());
  for (const auto& s : path.states)
    CHECK(std::abs(orbit_energy(s) - e0) < 1e-9);
}

TEST_CASE("sample_at returns stored states exactly at accepted nodes") {
  const SolutionPath path =
      integrate(two_body_field, circular_orbit_start(), 0.0, 2.0 * M_PI);
  REQUIRE(path.times.size() > 3);
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const Eigen::VectorXd s = sample_at(path, path.times[i]);
    CHECK(s == path.states[i]);
  }
}

TEST_CASE("halving tolerances reduces the two-body terminal error") {
  double tol = 1e-6;
  double previous = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 6; ++level) {
    IntegratorConfig cfg;
    cfg.rtol = tol;
    cfg.atol = tol;
    // Start with a large step so the error controller, not the step-growth
    // ramp, decides the step sizes.
    cfg.h_init = 1.0;
    const double err = (integrate(two_body_field, circular_orbit_start(), 0.0,
                                  2.0 * M_PI, cfg)
                            .final_state() -
                        circular_orbit_start())
                           .norm();
    CHECK(err < previous);
    previous = err;
    tol *= 0.5;
  }
}

TEST_CASE("identical inputs produce bit-identical paths") {
  const SolutionPath a =
      integrate(two_body_field, circular_orbit_start(), 0.0, 2.0 * M_PI);
  const SolutionPath b =
      integrate(two_body_field, circular_orbit_start(), 0.0, 2.0 * M_PI);
  REQUIRE(a.times.size() == b.times.size());
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.times[i] == b.times[i]);
    CHECK(a.states[i] == b.states[i]);
  }
}

TEST_CASE("integrate rejects bad arguments") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  CHECK_THROWS_AS(integrate(exp_field, y0, 1.0, 0.0), homopt::OutOfRange);
  IntegratorConfig bad;
  bad.rtol = 0.0;
  CHECK_THROWS_AS(integrate(exp_field, y0, 0.0, 1.0, bad), homopt::OutOfRange);
}

TEST_CASE("step budget exhaustion raises StepLimitExceeded") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  IntegratorConfig cfg;
  cfg.max_steps = 3;
  CHECK_THROWS_AS(integrate(exp_field, y0, 0.0, 1.0, cfg),
                  homopt::StepLimitExceeded);
}

TEST_CASE("finite-time blowup collapses the step size") {
  // dy/dt = y^2 from y0=1 has a pole at t=1. Error control keeps every
  // iterate finite, so the failure mode is step underflow short of tf.
  auto blowup = [](const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
    dydt = y.array().square();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  CHECK_THROWS_AS(integrate(blowup, y0, 0.0, 2.0), homopt::StepLimitExceeded);
}

TEST_CASE("NaN-producing fields raise NonFiniteState") {
  // Growth drives y past 2 where the field turns NaN; rejected steps then
  // shrink until the integrator gives up and reports the non-finite cause.
  auto poisoned = [](const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
    dydt = y;
    if (y[0] > 2.0) dydt[0] = std::numeric_limits<double>::quiet_NaN();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  CHECK_THROWS_AS(integrate(poisoned, y0, 0.0, 3.0), homopt::NonFiniteState);

  Eigen::VectorXd bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(integrate(exp_field, bad, 0.0, 1.0), homopt::NonFiniteState);
}

TEST_CASE("sample_at rejects times outside the span") {
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const SolutionPath path = integrate(exp_field, y0, 0.0, 1.0);
  CHECK_THROWS_AS(sample_at(path, -0.1), homopt::OutOfRange);
  CHECK_THROWS_AS(sample_at(path, 1.1), homopt::OutOfRange);
}
