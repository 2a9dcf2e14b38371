#include "homopt/kepler.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "homopt/errors.hpp"

namespace homopt::kepler {

namespace {

constexpr double kDegree = M_PI / 180.0;

double wrap_two_pi(double angle) {
  double wrapped = std::fmod(angle, 2.0 * M_PI);
  if (wrapped < 0.0) wrapped += 2.0 * M_PI;
  return wrapped;
}

}  // namespace

// JPL approximate mean elements at J2000 (a, e, i, L, long.peri, raan),
// converted to (omega = long.peri - raan, M0 = L - long.peri).
OrbitalElements earth_elements() {
  OrbitalElements el;
  el.semi_major_axis = 1.00000261 * kAstronomicalUnit;
  el.eccentricity = 0.01671123;
  el.inclination = -0.00001531 * kDegree;
  el.raan = 0.0;
  el.arg_periapsis = 102.93768193 * kDegree;
  el.mean_anomaly_epoch = (100.46457166 - 102.93768193) * kDegree;
  return el;
}

OrbitalElements mars_elements() {
  OrbitalElements el;
  el.semi_major_axis = 1.52371034 * kAstronomicalUnit;
  el.eccentricity = 0.09339410;
  el.inclination = 1.84969142 * kDegree;
  el.raan = 49.55953891 * kDegree;
  el.arg_periapsis = (-23.94362959 - 49.55953891) * kDegree;
  el.mean_anomaly_epoch = (-4.55343205 + 23.94362959) * kDegree;
  return el;
}

double solve_kepler(double mean_anomaly, double eccentricity) {
  if (!(eccentricity >= 0.0) || !(eccentricity < 1.0) ||
      !std::isfinite(mean_anomaly))
    throw NoConvergence("solve_kepler: requires 0 <= e < 1 and finite M");

  const double m = wrap_two_pi(mean_anomaly);
  const double e = eccentricity;
  constexpr double kTol = 1e-14;
  constexpr int kMaxNewton = 50;

  double ecc_anomaly = (e > 0.8) ? M_PI : m;
  for (int i = 0; i < kMaxNewton; ++i) {
    const double residual = ecc_anomaly - e * std::sin(ecc_anomaly) - m;
    if (std::abs(residual) < kTol) return ecc_anomaly;
    ecc_anomaly -= residual / (1.0 - e * std::cos(ecc_anomaly));
  }

  // Bisection fallback on [m - e, m + e], which always brackets the root.
  double lo = m - e;
  double hi = m + e;
  auto f = [&](double x) { return x - e * std::sin(x) - m; };
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if (std::abs(fmid) < kTol) return mid;
    if ((flo < 0.0) == (fmid < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  throw NoConvergence("solve_kepler: no convergence");
}

BodyState elements_to_state(const OrbitalElements& el, double mean_anomaly,
                            double mu) {
  const double a = el.semi_major_axis;
  const double e = el.eccentricity;
  const double ecc_anomaly = solve_kepler(mean_anomaly, e);
  const double cos_e = std::cos(ecc_anomaly);
  const double sin_e = std::sin(ecc_anomaly);
  const double sqrt_one_minus_e2 = std::sqrt(1.0 - e * e);
  const double radius = a * (1.0 - e * cos_e);

  const Eigen::Vector3d r_perifocal(a * (cos_e - e),
                                    a * sqrt_one_minus_e2 * sin_e, 0.0);
  const double v_scale = std::sqrt(mu * a) / radius;
  const Eigen::Vector3d v_perifocal(-v_scale * sin_e,
                                    v_scale * sqrt_one_minus_e2 * cos_e, 0.0);

  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(el.raan, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(el.inclination, Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(el.arg_periapsis, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix();

  return BodyState{rot * r_perifocal, rot * v_perifocal};
}

BodyState earth_departure_state() {
  const OrbitalElements el = earth_elements();
  return elements_to_state(el, el.mean_anomaly_epoch, kSunMu);
}

BodyState mars_orbit_state(double mean_anomaly) {
  return elements_to_state(mars_elements(), mean_anomaly, kSunMu);
}

}  // namespace homopt::kepler
