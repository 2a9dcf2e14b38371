#pragma once

#include <Eigen/Core>

namespace homopt::kepler {

inline constexpr double kAstronomicalUnit = 1.495978707e11;  // m
inline constexpr double kSunMu = 1.3271e20;                  // m^3/s^2

/// Classical orbital elements, SI units and radians, mean anomaly at
/// epoch MJD2000 = 0.
struct OrbitalElements {
  double semi_major_axis = 0.0;    // m
  double eccentricity = 0.0;
  double inclination = 0.0;        // rad
  double raan = 0.0;               // rad
  double arg_periapsis = 0.0;      // rad
  double mean_anomaly_epoch = 0.0; // rad
};

struct BodyState {
  Eigen::Vector3d position;  // m
  Eigen::Vector3d velocity;  // m/s
};

/// J2000 mean Keplerian elements (standard almanac values, no secular
/// rates). Earth is the Earth-Moon barycenter entry.
OrbitalElements earth_elements();
OrbitalElements mars_elements();

/// Solves E - e sin(E) = M for the eccentric anomaly. Newton iteration
/// with a bisection fallback; residual below 1e-13 against M wrapped to
/// [0, 2pi). Throws NoConvergence if both fail.
double solve_kepler(double mean_anomaly, double eccentricity);

/// Cartesian state on the conic at the given mean anomaly.
BodyState elements_to_state(const OrbitalElements& el, double mean_anomaly,
                            double mu);

/// Earth state at the MJD2000 = 0 departure epoch.
BodyState earth_departure_state();

/// State along Mars's orbit parameterized by mean anomaly.
BodyState mars_orbit_state(double mean_anomaly);

}  // namespace homopt::kepler
