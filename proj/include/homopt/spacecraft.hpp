#pragma once

// Planar-free 3D low-thrust Earth-to-Mars rendezvous. State is
// [r (3), v (3), m] in canonical heliocentric units: 1 AU of length, the
// time unit that makes the Sun's gravitational parameter equal one, and the
// wet mass as the mass unit. The control is a throttle in [0, 1] along a
// free thrust direction; costs blend a quadratic throttle penalty against a
// fuel/time objective through the weights (alpha, beta).

#include <Eigen/Dense>

#include "homopt/kepler.hpp"
#include "homopt/ode.hpp"
#include "homopt/rng.hpp"
#include "homopt/shooting.hpp"

namespace homopt::spacecraft {

using State = Eigen::Matrix<double, 7, 1>;    // [r, v, m]
using Costate = Eigen::Matrix<double, 7, 1>;  // [lr, lv, lm]

inline constexpr int kStateDim = 7;
inline constexpr int kDecisionDim = 9;  // [duration, arrival anomaly, costate0]

struct Params {
  double thrust_max = 0.2;  // N
  double isp = 2500.0;      // s
  double g0 = 9.81;         // m/s^2
  double mu = kepler::kSunMu;
  double wet_mass = 1000.0;  // kg
  // Body ephemerides, replaceable through the config [bodies] section.
  kepler::OrbitalElements earth = kepler::earth_elements();
  kepler::OrbitalElements mars = kepler::mars_elements();

  double length_unit() const { return kepler::kAstronomicalUnit; }
  double time_unit() const {
    const double lu = length_unit();
    return std::sqrt(lu * lu * lu / mu);
  }
  double velocity_unit() const { return length_unit() / time_unit(); }

  // Max thrust acceleration at wet mass, canonical: T tu^2 / (m0 lu).
  double thrust_canonical() const {
    const double tu = time_unit();
    return thrust_max * tu * tu / (wet_mass * length_unit());
  }
  // Exhaust velocity Isp g0, canonical.
  double exhaust_velocity_canonical() const {
    return isp * g0 * time_unit() / length_unit();
  }
};

// Earth departure at the J2000 epoch with m = 1 (canonical).
State nominal_state(const Params& p = {});

// Mars position and velocity at the given mean anomaly, canonical.
Eigen::Matrix<double, 6, 1> mars_target(double mean_anomaly,
                                        const Params& p = {});

struct Decision {
  double duration = 0.0;         // canonical flight time
  double arrival_anomaly = 0.0;  // mean anomaly of the Mars rendezvous point
  Costate costate0 = Costate::Zero();

  Eigen::VectorXd pack() const;
  static Eigen::VectorXd pack(double duration, double arrival_anomaly,
                              const Costate& costate0);
  static Decision unpack(const Eigen::VectorXd& z);
};

// Minimizing thrust points against the velocity costate.
// Throws DegenerateCostate when lambda_v vanishes.
Eigen::Vector3d thrust_direction(const Eigen::Vector3d& lambda_v);

// sigma = T' |lv| / m + T' lm / c' + (alpha - 1); positive sigma favors
// full thrust once the quadratic penalty is gone (beta = 1).
double switching_function(const State& s, const Costate& lambda, double alpha,
                          const Params& p);

// Pointwise Hamiltonian minimizer over [0, 1]. Interior solution
// (T'|lv|/m + T' lm / c' + beta (alpha - 1)) / (2 (1 - beta)) clamped;
// exact bang-bang on the switching function at beta = 1.
double throttle(const State& s, const Costate& lambda, double alpha,
                double beta, const Params& p);

State dynamics(const State& s, double u, const Eigen::Vector3d& u_hat,
               const Params& p);

Costate costate_rate(const State& s, const Costate& lambda, double u,
                     const Eigen::Vector3d& u_hat, const Params& p);

double hamiltonian(const State& s, const Costate& lambda, double u,
                   const Eigen::Vector3d& u_hat, double alpha, double beta,
                   const Params& p);

// Free-arrival-anomaly closure: r^3 (lr . v) - (lv . r), normalized by
// sqrt(|r|^2 + |v|^2 |r|^6) (the orbit-tangent norm) so the residual is
// scale-free. Vanishes where the transfer cost is stationary in the
// arrival point. Throws DegenerateGeometry at the origin.
double transversality_orbit(const State& s, const Costate& lambda);

// Coupled state/costate field with the minimizing throttle substituted.
// y = [s, lambda]; coasts whenever the throttle is zero or the thrust
// direction is undefined. Optional trailing running-cost quadrature.
void augmented_rate(const Eigen::VectorXd& y, double alpha, double beta,
                    const Params& p, Eigen::VectorXd& dy);
void augmented_rate_with_cost(const Eigen::VectorXd& y, double alpha,
                              double beta, const Params& p,
                              Eigen::VectorXd& dy);

// Shooting residual, 9 components: position and velocity rendezvous with
// Mars at the arrival anomaly, free final mass (lm(tf) = 0), orbit-tangency
// transversality for the free anomaly, and H(tf) = 0 for the free time.
Eigen::VectorXd residuals(const Eigen::VectorXd& z, const State& s0,
                          double alpha, double beta, const Params& p = {},
                          const ode::IntegratorConfig& cfg = {});

shooting::ResidualMap make_residual_map(const State& s0, double alpha,
                                        double beta, const Params& p = {},
                                        const ode::IntegratorConfig& cfg = {});

shooting::SolveReport solve(const State& s0, const Eigen::VectorXd& z_guess,
                            double alpha, double beta, const Params& p = {},
                            const shooting::SolveOptions& opts = {},
                            const ode::IntegratorConfig& cfg = {});

// Random restarts: duration ~ U[pi/2, 4 pi] (a quarter to two heliocentric
// years), arrival anomaly ~ U[0, 2 pi], costates ~ U[-1, 1]^7.
shooting::SolveReport solve_multistart(const State& s0, double alpha,
                                       double beta, std::uint64_t seed,
                                       int attempts = 128,
                                       const Params& p = {},
                                       const shooting::SolveOptions& opts = {},
                                       const ode::IntegratorConfig& cfg = {});

}  // namespace homopt::spacecraft
