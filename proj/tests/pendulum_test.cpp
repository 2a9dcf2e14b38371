#include "doctest.h"

#include <cmath>

#include "homopt/errors.hpp"
#include "homopt/ode.hpp"
#include "homopt/pendulum.hpp"

namespace pend = homopt::pendulum;
using pend::Costate;
using pend::State;

namespace {

State make_state(double x, double v, double theta, double omega) {
  State s;
  s << x, v, theta, omega;
  return s;
}

// Central finite differences of the Hamiltonian in the state at fixed u.
Costate minus_grad_h_fd(const State& s, const Costate& lambda, double u,
                        double alpha) {
  Costate grad;
  for (int i = 0; i < 4; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(s[i]));
    State hi = s, lo = s;
    hi[i] += h;
    lo[i] -= h;
    grad[i] = -(pend::hamiltonian(hi, lambda, u, alpha) -
                pend::hamiltonian(lo, lambda, u, alpha)) /
              (2.0 * h);
  }
  return grad;
}

// Fixed-step RK4 on the state/costate system with the control law applied
// at every stage; independent check of the adaptive integration inside
// residuals.
Eigen::VectorXd rk4_augmented(const Eigen::VectorXd& y0, double alpha,
                              double duration, double h) {
  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1(8), k2(8), k3(8), k4(8);
  const long steps = std::lround(duration / h);
  for (long i = 0; i < steps; ++i) {
    pend::augmented_rate(y, alpha, k1);
    pend::augmented_rate(y + 0.5 * h * k1, alpha, k2);
    pend::augmented_rate(y + 0.5 * h * k2, alpha, k3);
    pend::augmented_rate(y + h * k3, alpha, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

}  // namespace

TEST_CASE("dynamics substitution cases") {
  CHECK(pend::dynamics(make_state(0, 0, M_PI, 0), 0.0).isZero(1e-15));

  const State r1 = pend::dynamics(make_state(0, 1, M_PI / 2, 0), 1.0);
  CHECK(r1[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r1[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r1[2] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r1[3] == doctest::Approx(1.0).epsilon(1e-12));

  const State r2 = pend::dynamics(make_state(0, 0, M_PI, 0), 0.5);
  CHECK(r2[0] == 0.0);
  CHECK(r2[1] == 0.5);
  CHECK(r2[2] == 0.0);
  CHECK(r2[3] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("switching function substitution cases") {
  Costate l = Costate::Zero();
  l[1] = 1.0;
  CHECK(pend::switching_function(make_state(0, 0, 0, 0), l) == 1.0);

  l.setZero();
  l[3] = 1.0;
  CHECK(pend::switching_function(make_state(0, 0, 0, 0), l) == -1.0);

  l.setZero();
  l[1] = 2.0;
  l[3] = 2.0;
  CHECK(pend::switching_function(make_state(0, 0, M_PI / 2, 0), l) ==
        doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("optimal control interior, clamped, and zero cases") {
  Costate l = Costate::Zero();
  l[1] = 2.0;
  CHECK(pend::optimal_control(make_state(0, 0, 0, 0), l, 0.0) == -1.0);

  l[1] = -4.0;
  CHECK(pend::optimal_control(make_state(0, 0, 0, 0), l, 0.0) == 1.0);

  l[1] = 1.0;
  l[3] = 1.0;
  CHECK(pend::optimal_control(make_state(0, 0, 0, 0), l, 0.5) == 0.0);
}

TEST_CASE("interior control is the stationary point of H in u") {
  Costate l;
  l << 0.3, -0.4, 0.2, 0.6;
  const State s = make_state(0.1, -0.2, 2.5, 0.3);
  for (double alpha : {0.0, 0.3, 0.7, 0.9}) {
    const double u = pend::optimal_control(s, l, alpha);
    if (std::abs(u) < 1.0) {
      const double h = 1e-5;
      const double dh = (pend::hamiltonian(s, l, u + h, alpha) -
                         pend::hamiltonian(s, l, u - h, alpha)) /
                        (2.0 * h);
      CHECK(std::abs(dh) < 1e-10);
    }
  }
}

TEST_CASE("control saturates as alpha approaches one") {
  Costate l;
  l << 0.0, 0.8, 0.0, 0.1;
  const State s = make_state(0, 0, 1.0, 0);
  const double sigma = pend::switching_function(s, l);
  REQUIRE(sigma != 0.0);
  for (double alpha : {0.9, 0.99, 0.999}) {
    const double u = pend::optimal_control(s, l, alpha);
    if (alpha == 0.999) CHECK(u == (sigma < 0.0 ? 1.0 : -1.0));
  }
  // The bang-bang branch picks the same sign as the limit.
  CHECK(pend::optimal_control(s, l, 1.0) == (sigma < 0.0 ? 1.0 : -1.0));
  Costate zero = Costate::Zero();
  CHECK(pend::optimal_control(s, zero, 1.0) == 0.0);
}

TEST_CASE("costate rate substitution cases") {
  const State s = make_state(0.0, 0.0, 0.7, 0.0);
  Costate l = Costate::Zero();
  CHECK(pend::costate_rate(s, l, 0.3).isZero(0.0));

  l[0] = 1.0;
  const Costate r = pend::costate_rate(s, l, 0.3);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == -1.0);
  CHECK(r[2] == 0.0);
  CHECK(r[3] == 0.0);
}

TEST_CASE("costate rate equals minus the state gradient of H") {
  const State states[] = {make_state(0.2, -0.5, 2.0, 1.0),
                          make_state(-1.0, 0.3, 0.4, -2.0),
                          make_state(0.0, 0.0, M_PI, 0.0)};
  Costate l;
  l << 0.7, -1.2, 0.5, 0.9;
  for (const State& s : states) {
    for (double u : {-1.0, 0.2, 1.0}) {
      const Costate expect = minus_grad_h_fd(s, l, u, 0.4);
      const Costate got = pend::costate_rate(s, l, u);
      CHECK((got - expect).lpNorm<Eigen::Infinity>() < 1e-7);
    }
  }
}

TEST_CASE("hamiltonian substitution cases") {
  const State zero_s = State::Zero();
  const Costate zero_l = Costate::Zero();
  CHECK(pend::hamiltonian(zero_s, zero_l, 0.0, 0.0) == 0.0);
  CHECK(pend::hamiltonian(zero_s, zero_l, 0.0, 1.0) == 1.0);

  Costate l = Costate::Zero();
  l[0] = 1.0;
  CHECK(pend::hamiltonian(make_state(0, 1, 0, 0), l, 0.0, 0.0) == 1.0);
}

TEST_CASE("residuals at vanishing duration reproduce the start state") {
  const State s0 = pend::nominal_state();
  pend::Decision d;
  d.duration = 1e-9;
  d.costate0 << 0.1, 0.2, 0.3, 0.4;
  const Eigen::VectorXd res = pend::residuals(d.pack(), s0, 0.5);
  CHECK(std::abs(res[0] - 0.0) < 1e-8);
  CHECK(std::abs(res[1] - 0.0) < 1e-8);
  CHECK(std::abs(res[2] - M_PI) < 1e-8);
  CHECK(std::abs(res[3] - 0.0) < 1e-8);
  const double u0 = pend::optimal_control(s0, d.costate0, 0.5);
  CHECK(res[4] ==
        doctest::Approx(pend::hamiltonian(s0, d.costate0, u0, 0.5))
            .epsilon(1e-7));
}

TEST_CASE("residuals match a fixed-step RK4 oracle") {
  const State s0 = pend::nominal_state();
  pend::Decision d;
  d.duration = 2.0;
  d.costate0 << 0.4, -0.3, 0.8, -0.2;
  const double alpha = 0.3;

  Eigen::VectorXd y0(8);
  y0 << s0, d.costate0;
  const Eigen::VectorXd y_oracle = rk4_augmented(y0, alpha, d.duration, 1e-4);

  const Eigen::VectorXd res = pend::residuals(d.pack(), s0, alpha);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(res[i] - y_oracle[i]) < 1e-6);
  const double h_oracle =
      pend::hamiltonian(y_oracle.head<4>(), y_oracle.tail<4>(),
                        pend::optimal_control(y_oracle.head<4>(),
                                              y_oracle.tail<4>(), alpha),
                        alpha);
  CHECK(std::abs(res[4] - h_oracle) < 1e-6);
}

TEST_CASE("residuals reject nonpositive duration") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(5);
  z[0] = -1.0;
  CHECK_THROWS_AS(pend::residuals(z, pend::nominal_state(), 0.0),
                  homopt::OutOfRange);
}

TEST_CASE("a converged swingup closes the boundary conditions") {
  const State s0 = pend::nominal_state();
  const auto report = pend::solve_multistart(s0, 0.0, 2024);
  REQUIRE(report.converged);
  CHECK(report.residual_norm < 1e-8);

  // H stays near zero along the whole extremal, not just at the ends.
  const pend::Decision d = pend::Decision::unpack(report.z);
  Eigen::VectorXd y0(8);
  y0 << s0, d.costate0;
  const auto path = homopt::ode::integrate(
      [](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        pend::augmented_rate(y, 0.0, dy);
      },
      y0, 0.0, d.duration);
  for (int i = 0; i <= 50; ++i) {
    const double t = d.duration * (i / 50.0);
    const Eigen::VectorXd y = homopt::ode::sample_at(path, t);
    const State s = y.head<4>();
    const Costate l = y.tail<4>();
    const double u = pend::optimal_control(s, l, 0.0);
    CHECK(std::abs(pend::hamiltonian(s, l, u, 0.0)) < 1e-6);
  }
}
