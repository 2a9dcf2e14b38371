#include "homopt/homotopy.hpp"

#include <algorithm>
#include <cmath>

#include "homopt/errors.hpp"

namespace homopt::homotopy {

namespace {

double blend_value(const HomotopyParams& p, BlendAxis axis) {
  return axis == BlendAxis::Alpha ? p.alpha : p.beta;
}

void set_blend(HomotopyParams& p, BlendAxis axis, double value) {
  (axis == BlendAxis::Alpha ? p.alpha : p.beta) = value;
}

}  // namespace

std::vector<SolutionRecord> homotopy_criteria(const SolveFn& solve,
                                              const SolutionRecord& start,
                                              BlendAxis axis,
                                              const CriteriaOptions& opts) {
  if (start.params.alpha < 0.0 || start.params.alpha > 1.0 ||
      start.params.beta < 0.0 || start.params.beta > 1.0)
    throw OutOfRange("blend weights must lie in [0, 1]");

  std::vector<SolutionRecord> records{start};
  double blend = blend_value(start.params, axis);
  double step = opts.initial_step;

  while (blend < 1.0) {
    if (step < opts.stall_threshold)
      throw Stalled("criteria sweep stalled at blend " + std::to_string(blend));

    const SolutionRecord& current = records.back();
    const double candidate = std::min(blend + step, 1.0);
    HomotopyParams params = current.params;
    set_blend(params, axis, candidate);

    const shooting::SolveReport report = solve(current.s0, current.z, params);
    if (shooting::successful(report)) {
      records.push_back(SolutionRecord{current.problem, current.s0, report.z,
                                       params, report.residual_norm});
      blend = candidate;
      step = std::min({2.0 * step, opts.max_step, 1.0 - blend});
    } else {
      step *= 0.5;
    }
  }
  return records;
}

StateOptions pendulum_state_options() {
  StateOptions opts;
  opts.scales = Eigen::Vector4d{0.5, 0.5, M_PI / 4.0, 0.5};
  return opts;
}

StateOptions spacecraft_state_options() {
  StateOptions opts;
  opts.scales.resize(7);
  opts.scales << 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05;
  opts.mass_index = 6;
  opts.mass_floor = 0.5;
  return opts;
}

Eigen::VectorXd perturb(const Eigen::VectorXd& s0, double delta,
                        const Eigen::VectorXd& scales, Rng& rng,
                        int mass_index, double mass_floor) {
  Eigen::VectorXd out = s0;
  for (Eigen::Index i = 0; i < s0.size(); ++i)
    out[i] += delta * scales[i] * rng.normal();
  if (mass_index >= 0 && mass_index < out.size())
    out[mass_index] = std::max(out[mass_index], mass_floor);
  return out;
}

std::vector<SolutionRecord> homotopy_state(const SolveFn& solve,
                                           const SolutionRecord& start, int n,
                                           const StateOptions& opts,
                                           Rng& rng) {
  std::vector<SolutionRecord> records;
  records.reserve(std::max(n, 0));

  SolutionRecord current = start;
  double delta = opts.initial_fraction;

  while (static_cast<int>(records.size()) < n) {
    if (delta < opts.stall_threshold)
      throw Stalled("state sweep stalled after " +
                    std::to_string(records.size()) + " records");

    const Eigen::VectorXd s0 = perturb(current.s0, delta, opts.scales, rng,
                                       opts.mass_index, opts.mass_floor);
    const shooting::SolveReport report = solve(s0, current.z, current.params);
    if (shooting::successful(report)) {
      current = SolutionRecord{current.problem, s0, report.z, current.params,
                               report.residual_norm};
      records.push_back(current);
      delta = std::min(delta * opts.growth, 1.0);
    } else {
      delta *= opts.shrink;
    }
  }
  return records;
}

}  // namespace homopt::homotopy
