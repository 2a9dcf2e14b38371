#include "homopt/pendulum.hpp"

#include <cmath>

#include "homopt/errors.hpp"

namespace homopt::pendulum {

State nominal_state() { return State{0.0, 0.0, M_PI, 0.0}; }

Eigen::VectorXd Decision::pack() const {
  Eigen::VectorXd z(kDecisionDim);
  z[0] = duration;
  z.tail<4>() = costate0;
  return z;
}

Decision Decision::unpack(const Eigen::VectorXd& z) {
  if (z.size() != kDecisionDim)
    throw OutOfRange("pendulum decision vector must have 5 components");
  Decision d;
  d.duration = z[0];
  d.costate0 = z.tail<4>();
  return d;
}

State dynamics(const State& s, double u) {
  const double theta = s[2];
  return State{s[1], u, s[3], std::sin(theta) - u * std::cos(theta)};
}

double switching_function(const State& s, const Costate& lambda) {
  return lambda[1] - lambda[3] * std::cos(s[2]);
}

double optimal_control(const State& s, const Costate& lambda, double alpha) {
  const double sigma = switching_function(s, lambda);
  if (alpha >= 1.0) {
    // Effort-free limit: H is linear in u, so the minimum sits at the bound
    // opposing sigma. The measure-zero sigma = 0 case coasts.
    if (sigma < 0.0) return 1.0;
    if (sigma > 0.0) return -1.0;
    return 0.0;
  }
  const double interior = sigma / (2.0 * (alpha - 1.0));
  return std::clamp(interior, -1.0, 1.0);
}

Costate costate_rate(const State& s, const Costate& lambda, double u) {
  const double theta = s[2];
  return Costate{0.0, -lambda[0],
                 -lambda[3] * (u * std::sin(theta) + std::cos(theta)),
                 -lambda[2]};
}

double hamiltonian(const State& s, const Costate& lambda, double u,
                   double alpha) {
  return (1.0 - alpha) * u * u + alpha + lambda.dot(dynamics(s, u));
}

void augmented_rate(const Eigen::VectorXd& y, double alpha,
                    Eigen::VectorXd& dy) {
  const State s = y.head<4>();
  const Costate lambda = y.segment<4>(4);
  const double u = optimal_control(s, lambda, alpha);
  dy.head<4>() = dynamics(s, u);
  dy.segment<4>(4) = costate_rate(s, lambda, u);
}

void augmented_rate_with_cost(const Eigen::VectorXd& y, double alpha,
                              Eigen::VectorXd& dy) {
  augmented_rate(y, alpha, dy);
  const State s = y.head<4>();
  const Costate lambda = y.segment<4>(4);
  const double u = optimal_control(s, lambda, alpha);
  dy[8] = (1.0 - alpha) * u * u + alpha;
}

Eigen::VectorXd residuals(const Eigen::VectorXd& z, const State& s0,
                          double alpha, const ode::IntegratorConfig& cfg) {
  const Decision d = Decision::unpack(z);
  if (!(d.duration > 0.0))
    throw OutOfRange("pendulum flight time must be positive");

  Eigen::VectorXd y0(8);
  y0.head<4>() = s0;
  y0.tail<4>() = d.costate0;

  const auto field = [alpha](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    augmented_rate(y, alpha, dy);
  };
  const ode::SolutionPath path = ode::integrate(field, y0, 0.0, d.duration, cfg);

  const State sf = path.final_state().head<4>();
  const Costate lf = path.final_state().tail<4>();
  const double uf = optimal_control(sf, lf, alpha);

  Eigen::VectorXd res(kDecisionDim);
  res.head<4>() = sf;
  res[4] = hamiltonian(sf, lf, uf, alpha);
  return res;
}

shooting::ResidualMap make_residual_map(const State& s0, double alpha,
                                        const ode::IntegratorConfig& cfg) {
  return [s0, alpha, cfg](const Eigen::VectorXd& z) {
    return residuals(z, s0, alpha, cfg);
  };
}

shooting::SolveReport solve(const State& s0, const Eigen::VectorXd& z_guess,
                            double alpha, const shooting::SolveOptions& opts,
                            const ode::IntegratorConfig& cfg) {
  return shooting::solve(make_residual_map(s0, alpha, cfg), z_guess, opts);
}

namespace {

// Pure-effort shooting from a resting state on the theta axis (sin theta = 0,
// v = omega = 0) is degenerate: H(t0) = -sigma0^2/4, so the transversality
// residual is a perfect square and its Jacobian row vanishes on the root set.
// Newton cannot converge through that. Every root has sigma0 = 0, though, so
// pinning lambda_v = lambda_omega cos(theta0) drops the transversality
// equation and leaves a regular 4x4 problem in [T, lambda_x, lambda_theta,
// lambda_omega].
shooting::SolveReport solve_multistart_rest_effort(
    const State& s0, double alpha, Rng& rng, int attempts,
    const shooting::SolveOptions& opts, const ode::IntegratorConfig& cfg) {
  const double cos0 = std::cos(s0[2]);
  const auto lift = [cos0](const Eigen::VectorXd& z4) {
    Eigen::VectorXd z5(kDecisionDim);
    z5 << z4[0], z4[1], z4[3] * cos0, z4[2], z4[3];
    return z5;
  };
  const auto reduced_map = [&s0, alpha, lift](const ode::IntegratorConfig& c) {
    return [s0, alpha, lift, c](const Eigen::VectorXd& z4) -> Eigen::VectorXd {
      return residuals(lift(z4), s0, alpha, c).head<4>();
    };
  };

  // Loose probes find the basin much more reliably than tight ones; the
  // winner is re-solved at the caller's tolerance before verification.
  ode::IntegratorConfig probe_cfg = cfg;
  probe_cfg.rtol *= 100.0;
  probe_cfg.atol *= 100.0;
  const auto probe_f = reduced_map(probe_cfg);
  const auto full_f = reduced_map(cfg);

  shooting::SolveOptions probe_opts = opts;
  probe_opts.max_iterations = std::min(opts.max_iterations, 40);

  shooting::SolveReport best;
  for (int k = 0; k < attempts; ++k) {
    Eigen::VectorXd z4(4);
    z4[0] = rng.uniform(1.0, 10.0);
    for (int i = 1; i < 4; ++i) z4[i] = rng.uniform(-1.0, 1.0);

    shooting::SolveReport probe = shooting::solve(probe_f, z4, probe_opts);
    if (!shooting::successful(probe)) continue;
    const shooting::SolveReport polished =
        shooting::solve(full_f, probe.z, opts);
    if (polished.z.size() != 4 || !polished.z.allFinite() ||
        !(polished.z[0] > 0.0))
      continue;

    // Verdict comes from the full five-equation residual.
    shooting::SolveReport report;
    report.z = lift(polished.z);
    report.residual_norm =
        residuals(report.z, s0, alpha, cfg).lpNorm<Eigen::Infinity>();
    report.iterations = probe.iterations + polished.iterations;
    report.converged = report.residual_norm < opts.tol;
    report.failure = report.converged ? shooting::Failure::None
                                      : shooting::Failure::MaxIterations;
    if (report.converged) return report;
    if (report.residual_norm < best.residual_norm) best = report;
  }
  return best;
}

}  // namespace

shooting::SolveReport solve_multistart(const State& s0, double alpha,
                                       std::uint64_t seed, int attempts,
                                       const shooting::SolveOptions& opts,
                                       const ode::IntegratorConfig& cfg) {
  Rng rng(seed);

  const bool rest_effort = alpha == 0.0 && std::abs(s0[1]) < 1e-12 &&
                           std::abs(s0[3]) < 1e-12 &&
                           std::abs(std::sin(s0[2])) < 1e-9;
  if (rest_effort)
    return solve_multistart_rest_effort(s0, alpha, rng, attempts, opts, cfg);

  const auto f = make_residual_map(s0, alpha, cfg);

  // Cheaper per-attempt budget; the winner is polished at full strength.
  shooting::SolveOptions probe = opts;
  probe.max_iterations = std::min(opts.max_iterations, 60);

  shooting::SolveReport best;
  for (int k = 0; k < attempts; ++k) {
    Eigen::VectorXd z(kDecisionDim);
    z[0] = rng.uniform(1.0, 10.0);
    for (int i = 1; i < kDecisionDim; ++i) z[i] = rng.uniform(-1.0, 1.0);

    shooting::SolveReport report = shooting::solve(f, z, probe);
    if (shooting::successful(report)) {
      if (probe.max_iterations < opts.max_iterations)
        report = shooting::solve(f, report.z, opts);
      if (shooting::successful(report)) return report;
    }
    if (report.residual_norm < best.residual_norm) best = report;
  }
  return best;
}

}  // namespace homopt::pendulum
