#pragma once

// Cart-pole swingup as a free-final-time optimal control problem. The state
// is [x, v, theta, omega] with theta = 0 at the upright; the scalar control
// is the cart acceleration, |u| <= 1. The running cost blends control effort
// against elapsed time, (1 - alpha) u^2 + alpha, and the first-order
// optimality system closes with H(tf) = 0 because tf is free.

#include <Eigen/Dense>

#include "homopt/ode.hpp"
#include "homopt/rng.hpp"
#include "homopt/shooting.hpp"

namespace homopt::pendulum {

using State = Eigen::Vector4d;
using Costate = Eigen::Vector4d;

inline constexpr int kStateDim = 4;
inline constexpr int kDecisionDim = 5;  // [duration, costate0]

// Hanging-at-rest start; the target is the origin (upright, centered).
State nominal_state();

// Shooting decision vector: flight time plus the initial costate.
struct Decision {
  double duration = 0.0;
  Costate costate0 = Costate::Zero();

  Eigen::VectorXd pack() const;
  static Decision unpack(const Eigen::VectorXd& z);
};

State dynamics(const State& s, double u);

// sigma = lambda_v - lambda_omega cos(theta); the minimizing control has the
// opposite sign of sigma when the effort weight vanishes.
double switching_function(const State& s, const Costate& lambda);

// Pointwise Hamiltonian minimizer. Interior solution sigma / (2 (alpha - 1))
// clamped to [-1, 1]; exact bang-bang -sign(sigma) at alpha = 1.
double optimal_control(const State& s, const Costate& lambda, double alpha);

Costate costate_rate(const State& s, const Costate& lambda, double u);

double hamiltonian(const State& s, const Costate& lambda, double u,
                   double alpha);

// Right-hand side of the coupled state/costate system with the minimizing
// control substituted. y = [s, lambda], optionally followed by the running
// cost as one extra quadrature component.
void augmented_rate(const Eigen::VectorXd& y, double alpha,
                    Eigen::VectorXd& dy);
void augmented_rate_with_cost(const Eigen::VectorXd& y, double alpha,
                              Eigen::VectorXd& dy);

// Shooting residual: integrate from [s0, z.costate0] over [0, z.duration]
// and return [s(tf), H(tf)]. Zero residual means the swingup reached the
// upright with a vanishing terminal Hamiltonian.
Eigen::VectorXd residuals(const Eigen::VectorXd& z, const State& s0,
                          double alpha,
                          const ode::IntegratorConfig& cfg = {});

shooting::ResidualMap make_residual_map(const State& s0, double alpha,
                                        const ode::IntegratorConfig& cfg = {});

shooting::SolveReport solve(const State& s0, const Eigen::VectorXd& z_guess,
                            double alpha,
                            const shooting::SolveOptions& opts = {},
                            const ode::IntegratorConfig& cfg = {});

// Random restarts with duration ~ U[1, 10] and costates ~ U[-1, 1]^4.
// Returns the first converged report; the best failure when none converge.
shooting::SolveReport solve_multistart(const State& s0, double alpha,
                                       std::uint64_t seed, int attempts = 64,
                                       const shooting::SolveOptions& opts = {},
                                       const ode::IntegratorConfig& cfg = {});

}  // namespace homopt::pendulum
