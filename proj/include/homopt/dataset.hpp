#pragma once

// Supervised data out of converged solutions: densely re-integrate each
// record, sample it uniformly in time, recompute the control from the PMP
// law at every sample, and stack everything into flat (state, alpha,
// control) rows with a trajectory-level train/validation split.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "homopt/homotopy.hpp"
#include "homopt/ode.hpp"
#include "homopt/problem.hpp"
#include "homopt/spacecraft.hpp"

namespace homopt::dataset {

struct Trajectory {
  Problem problem = Problem::Pendulum;
  homotopy::HomotopyParams params;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> costates;
  std::vector<Eigen::VectorXd> controls;  // pendulum: [u]; spacecraft: u*uhat
  std::vector<double> running_cost;       // blended cost accumulated to t

  double duration() const { return times.empty() ? 0.0 : times.back(); }
};

struct RealizeOptions {
  int samples = 200;
  spacecraft::Params spacecraft;
  ode::IntegratorConfig integrator;
};

Trajectory realize_trajectory(const homotopy::SolutionRecord& record,
                              const RealizeOptions& opts = {});

// Flat sample table. Row layout: state components, alpha, control
// components, trajectory_id, split (0 train, 1 validation).
struct Dataset {
  Problem problem = Problem::Pendulum;
  std::vector<std::string> columns;
  Eigen::MatrixXd rows;

  int state_size() const { return state_dim(problem); }
  int control_size() const { return control_dim(problem); }
  int input_size() const { return state_size() + 1; }  // state ++ alpha
  Eigen::Index id_column() const { return rows.cols() - 2; }
  Eigen::Index split_column() const { return rows.cols() - 1; }
};

enum class Split { Train, Validation };

struct BuildOptions {
  RealizeOptions realize;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

// One block of rows per record, in input order; whole trajectories are
// hashed into the validation split so no trajectory leaks across splits.
Dataset build(const std::vector<homotopy::SolutionRecord>& records,
              const BuildOptions& opts = {});

// Path ending in .csv gets the text format, .bin the packed little-endian
// binary; both carry a version header and round-trip bit-exactly.
void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

int split_count(const Dataset& ds, Split split);

struct Batch {
  Eigen::MatrixXd inputs;   // k x (state_dim + 1)
  Eigen::MatrixXd targets;  // k x control_dim
};

// k rows drawn uniformly without replacement from the given split.
Batch minibatch(const Dataset& ds, int k, Split split, std::uint64_t seed);

}  // namespace homopt::dataset
