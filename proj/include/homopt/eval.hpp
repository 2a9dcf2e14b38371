#pragma once

// Closed-loop evaluation: fixed-step RK4 rollouts of a control law under a
// piecewise-constant blend schedule, blended-cost bookkeeping, and the
// optimality-gap tables comparing policy rollouts against the open-loop
// optima. Costs on both sides are truncated at goal capture, checked on the
// same fixed time grid, so the comparison is apples to apples.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "homopt/dataset.hpp"
#include "homopt/homotopy.hpp"
#include "homopt/mlp.hpp"
#include "homopt/ode.hpp"
#include "homopt/problem.hpp"
#include "homopt/spacecraft.hpp"

namespace homopt::eval {

// alpha(t) holds each listed value from its switch time to the next.
struct Schedule {
  std::vector<std::pair<double, double>> switches;  // (time, alpha)
  double alpha_at(double t) const;
};

Schedule constant_schedule(double alpha);
// "t0:a0,t1:a1,..." with t0 = 0, strictly increasing times, alpha in [0,1].
Schedule parse_schedule(const std::string& text);

// A state-feedback control law. Pendulum laws return a 1-vector
// acceleration in [-1,1]; spacecraft laws return the thrust vector u*uhat.
using ControlLaw = std::function<Eigen::VectorXd(
    double t, const Eigen::VectorXd& state, double alpha)>;

ControlLaw policy_law(const mlp::MlpParams& params, Problem problem);

// Open-loop replay of a realized trajectory: interpolates the stored
// controls in time and ignores the live state.
ControlLaw replay_law(dataset::Trajectory traj);

// PMP feedback: costate interpolated from the stored augmented path
// (state block then costate block), control law evaluated on the live state.
ControlLaw pmp_law(ode::SolutionPath augmented, Problem problem,
                   homotopy::HomotopyParams params,
                   spacecraft::Params sc = {});

struct RolloutOptions {
  double step = 0.005;  // RK4 grid, also the capture-check grid
  bool capture = true;
  double capture_tol_pendulum = 0.05;    // on the state infinity norm
  double capture_tol_spacecraft = 0.01;  // AU to the Mars-orbit conic
  spacecraft::Params spacecraft;
};

enum class Termination { Captured, Horizon };

struct RolloutResult {
  dataset::Trajectory trajectory;  // one row per grid step, costates empty
  double cost = 0.0;               // blended running cost at termination
  double terminal_defect = 0.0;    // goal distance at termination
  Termination termination = Termination::Horizon;
};

RolloutResult rollout(const ControlLaw& law, Problem problem,
                      const Eigen::VectorXd& s0, const Schedule& schedule,
                      double horizon, const RolloutOptions& opts = {});

// Trapezoidal blended cost of a sampled trajectory (spacecraft at beta=1).
double trajectory_cost(const dataset::Trajectory& traj, double alpha);

// 100 |J_policy - J_optimal| / J_optimal. Throws DegenerateReference when
// the reference cost is not positive.
double optimality_gap(double j_policy, double j_optimal);

// Distance from a canonical heliocentric position to Mars's orbit curve.
double mars_orbit_distance(const Eigen::Vector3d& r, const spacecraft::Params& p = {});

// Per-alpha reference: the open-loop optimum realized from a converged
// record, cost truncated at its own capture point on the rollout grid.
struct Reference {
  double alpha = 0.0;
  double optimal_cost = 0.0;
  double duration = 0.0;  // converged flight time T*
};

Reference make_reference(const homotopy::SolutionRecord& record,
                         const RolloutOptions& opts = {});

struct GapRow {
  double alpha = 0.0;
  double gap_percent = 0.0;  // +inf when the rollout never captures
  double policy_cost = 0.0;
  double optimal_cost = 0.0;
  double terminal_defect = 0.0;
  bool captured = false;
};

struct GapTable {
  std::string label;  // column header, e.g. the architecture "100x4"
  std::vector<GapRow> rows;
  double mean_gap() const;
};

// One rollout per reference alpha from s0 with a constant schedule and
// horizon 1.5 T* (pendulum) or 2 T* (spacecraft).
GapTable eval_grid(const ControlLaw& law, const std::string& label,
                   Problem problem, const Eigen::VectorXd& s0,
                   const std::vector<Reference>& references,
                   const RolloutOptions& opts = {});

// alpha column, one gap column per table, and a trailing mean row.
void save_gap_tables(const std::vector<GapTable>& tables,
                     const std::string& path);
// Full per-alpha diagnostics for a single table.
void save_gap_details(const GapTable& table, const std::string& path);

// Plot-ready rollout dump: t, state..., alpha, control..., running cost.
void save_rollout_csv(const RolloutResult& result, const Schedule& schedule,
                      const std::string& path);

}  // namespace homopt::eval
