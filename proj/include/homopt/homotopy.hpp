#pragma once

// Continuation drivers. A sweep repeatedly re-solves the boundary-value
// problem while creeping one blend weight toward 1 (criteria sweep) or
// random-walking the initial state (state sweep), warm-starting every solve
// from the last converged decision vector.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "homopt/rng.hpp"
#include "homopt/shooting.hpp"

namespace homopt::homotopy {

struct HomotopyParams {
  double alpha = 0.0;
  double beta = 1.0;  // pinned at 1 for the pendulum
};

enum class BlendAxis { Alpha, Beta };

struct SolutionRecord {
  std::string problem;
  Eigen::VectorXd s0;
  Eigen::VectorXd z;
  HomotopyParams params;
  double residual_norm = 0.0;
};

// Re-solve the problem at (s0, params) warm-started from z.
using SolveFn = std::function<shooting::SolveReport(
    const Eigen::VectorXd& s0, const Eigen::VectorXd& z,
    const HomotopyParams& params)>;

struct CriteriaOptions {
  double initial_step = 0.05;
  double max_step = 0.2;
  double stall_threshold = 1e-6;  // below this the sweep gives up
};

// Sweep the chosen blend from its start value to 1. Steps double after a
// success (capped by max_step and by the gap left to 1) and halve after a
// failure. Returns the start record followed by every accepted record.
// Throws Stalled when the step underflows before reaching 1.
std::vector<SolutionRecord> homotopy_criteria(
    const SolveFn& solve, const SolutionRecord& start, BlendAxis axis,
    const CriteriaOptions& opts = {});

struct StateOptions {
  Eigen::VectorXd scales;         // per-component perturbation caps
  double initial_fraction = 0.1;  // starting delta, as a fraction of scales
  double growth = 1.5;
  double shrink = 0.5;
  double stall_threshold = 1e-6;
  int mass_index = -1;     // if >= 0, clamp this component from below
  double mass_floor = 0.5;
};

StateOptions pendulum_state_options();
StateOptions spacecraft_state_options();

// s0 + delta * (scales .* g), g standard normal per component.
Eigen::VectorXd perturb(const Eigen::VectorXd& s0, double delta,
                        const Eigen::VectorXd& scales, Rng& rng,
                        int mass_index = -1, double mass_floor = 0.5);

// Collect n additional converged records by perturbing the latest accepted
// initial state. delta grows by `growth` on success (never above 1, where
// the perturbation reaches the full component scales) and shrinks on
// failure. Throws Stalled when delta underflows.
std::vector<SolutionRecord> homotopy_state(const SolveFn& solve,
                                           const SolutionRecord& start, int n,
                                           const StateOptions& opts, Rng& rng);

}  // namespace homopt::homotopy
