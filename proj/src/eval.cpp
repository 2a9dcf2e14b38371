#include "homopt/eval.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "homopt/errors.hpp"
#include "homopt/io.hpp"
#include "homopt/kepler.hpp"
#include "homopt/pendulum.hpp"

namespace homopt::eval {

namespace {

void validate_schedule(const Schedule& schedule) {
  if (schedule.switches.empty())
    throw OutOfRange("schedule needs at least one entry");
  if (schedule.switches.front().first != 0.0)
    throw OutOfRange("schedule must start at t=0");
  for (std::size_t i = 0; i < schedule.switches.size(); ++i) {
    const auto& [t, alpha] = schedule.switches[i];
    if (alpha < 0.0 || alpha > 1.0)
      throw OutOfRange("schedule alpha outside [0, 1]");
    if (i > 0 && t <= schedule.switches[i - 1].first)
      throw OutOfRange("schedule times must be strictly increasing");
  }
}

Eigen::Vector3d mars_conic_point(const kepler::OrbitalElements& el,
                                 const Eigen::Matrix3d& rot, double ecc_anom,
                                 double length_unit) {
  const double a = el.semi_major_axis / length_unit;
  const double e = el.eccentricity;
  const Eigen::Vector3d perifocal(a * (std::cos(ecc_anom) - e),
                                  a * std::sqrt(1.0 - e * e) *
                                      std::sin(ecc_anom),
                                  0.0);
  return rot * perifocal;
}

double goal_distance(Problem problem, const Eigen::VectorXd& s,
                     const RolloutOptions& opts) {
  if (problem == Problem::Pendulum) return s.lpNorm<Eigen::Infinity>();
  return mars_orbit_distance(s.head<3>(), opts.spacecraft);
}

double capture_tolerance(Problem problem, const RolloutOptions& opts) {
  return problem == Problem::Pendulum ? opts.capture_tol_pendulum
                                      : opts.capture_tol_spacecraft;
}

}  // namespace

double Schedule::alpha_at(double t) const {
  double alpha = switches.front().second;
  for (const auto& [time, value] : switches) {
    if (time > t) break;
    alpha = value;
  }
  return alpha;
}

Schedule constant_schedule(double alpha) {
  Schedule s;
  s.switches.emplace_back(0.0, alpha);
  validate_schedule(s);
  return s;
}

Schedule parse_schedule(const std::string& text) {
  Schedule s;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(',', begin);
    if (end == std::string::npos) end = text.size();
    const std::string_view pair =
        std::string_view(text).substr(begin, end - begin);
    const std::size_t colon = pair.find(':');
    if (pair.empty() || colon == std::string_view::npos)
      throw OutOfRange("malformed schedule entry: expected t:alpha");
    try {
      s.switches.emplace_back(io::parse_double(pair.substr(0, colon)),
                              io::parse_double(pair.substr(colon + 1)));
    } catch (const SchemaMismatch& e) {
      throw OutOfRange(std::string("malformed schedule entry: ") + e.what());
    }
    begin = end + 1;
    if (end == text.size()) break;
  }
  validate_schedule(s);
  return s;
}

ControlLaw policy_law(const mlp::MlpParams& params, Problem problem) {
  return [params, problem](double, const Eigen::VectorXd& state,
                           double alpha) {
    Eigen::VectorXd input(state.size() + 1);
    input.head(state.size()) = state;
    input[state.size()] = alpha;
    return mlp::map_output(mlp::forward_one(params, input), problem);
  };
}

ControlLaw replay_law(dataset::Trajectory traj) {
  return [traj = std::move(traj)](double t, const Eigen::VectorXd&, double) {
    const auto& times = traj.times;
    if (t <= times.front()) return traj.controls.front();
    if (t >= times.back()) return traj.controls.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return Eigen::VectorXd((1.0 - w) * traj.controls[i - 1] +
                           w * traj.controls[i]);
  };
}

ControlLaw pmp_law(ode::SolutionPath augmented, Problem problem,
                   homotopy::HomotopyParams params, spacecraft::Params sc) {
  return [path = std::move(augmented), problem, params,
          sc](double t, const Eigen::VectorXd& state, double alpha) {
    const double tc = std::clamp(t, path.t_begin(), path.t_end());
    const Eigen::VectorXd y = ode::sample_at(path, tc);
    const int dim = state_dim(problem);
    const Eigen::VectorXd lambda = y.segment(dim, dim);

    if (problem == Problem::Pendulum) {
      return Eigen::VectorXd::Constant(
                 1, pendulum::optimal_control(state, lambda, alpha))
          .eval();
    }
    const spacecraft::State s = state;
    const spacecraft::Costate l = lambda;
    const Eigen::Vector3d lv = l.segment<3>(3);
    double u = spacecraft::throttle(s, l, alpha, params.beta, sc);
    Eigen::Vector3d thrust = Eigen::Vector3d::Zero();
    if (u > 0.0 && lv.norm() > 0.0)
      thrust = u * spacecraft::thrust_direction(lv);
    return Eigen::VectorXd(thrust);
  };
}

RolloutResult rollout(const ControlLaw& law, Problem problem,
                      const Eigen::VectorXd& s0, const Schedule& schedule,
                      double horizon, const RolloutOptions& opts) {
  validate_schedule(schedule);
  if (!(horizon > 0.0)) throw OutOfRange("horizon must be positive");
  const int dim = state_dim(problem);
  if (s0.size() != dim) throw OutOfRange("initial state has the wrong size");
  const double tol = capture_tolerance(problem, opts);

  // State plus the blended running cost as a trailing quadrature component.
  const auto rate = [&](double t, const Eigen::VectorXd& y,
                        double alpha) -> Eigen::VectorXd {
    const Eigen::VectorXd s = y.head(dim);
    Eigen::VectorXd dy(dim + 1);
    if (problem == Problem::Pendulum) {
      const double u =
          std::clamp(law(t, s, alpha)(0), -1.0, 1.0);
      dy.head(4) = pendulum::dynamics(s, u);
      dy[dim] = (1.0 - alpha) * u * u + alpha;
    } else {
      Eigen::Vector3d tv = law(t, s, alpha);
      double u = tv.norm();
      if (u > 1.0) {
        tv /= u;
        u = 1.0;
      }
      const auto& p = opts.spacecraft;
      const Eigen::Vector3d r = s.head<3>();
      const double r3 = std::pow(r.norm(), 3);
      dy.head(3) = s.segment<3>(3);
      dy.segment<3>(3) = (p.thrust_canonical() / s[6]) * tv - r / r3;
      dy[6] = -p.thrust_canonical() * u / p.exhaust_velocity_canonical();
      dy[dim] = alpha + (1.0 - alpha) * u;
    }
    return dy;
  };

  RolloutResult out;
  out.trajectory.problem = problem;
  out.trajectory.params.alpha = schedule.switches.front().second;

  Eigen::VectorXd y(dim + 1);
  y.head(dim) = s0;
  y[dim] = 0.0;

  const auto record_sample = [&](double t, double alpha) {
    const Eigen::VectorXd s = y.head(dim);
    out.trajectory.times.push_back(t);
    out.trajectory.states.push_back(s);
    out.trajectory.controls.push_back(law(t, s, alpha));
    out.trajectory.running_cost.push_back(y[dim]);
  };

  record_sample(0.0, schedule.alpha_at(0.0));
  bool captured = opts.capture && goal_distance(problem, s0, opts) < tol;

  for (std::size_t seg = 0; !captured && seg < schedule.switches.size();
       ++seg) {
    const double start = schedule.switches[seg].first;
    const double alpha = schedule.switches[seg].second;
    const double end = std::min(seg + 1 < schedule.switches.size()
                                    ? schedule.switches[seg + 1].first
                                    : horizon,
                                horizon);
    if (start >= horizon) break;

    long k = 0;
    double t = start;
    while (t < end - 1e-12) {
      const double t_next = std::min(start + (k + 1) * opts.step, end);
      const double h = t_next - t;
      const Eigen::VectorXd k1 = rate(t, y, alpha);
      const Eigen::VectorXd k2 = rate(t + 0.5 * h, y + 0.5 * h * k1, alpha);
      const Eigen::VectorXd k3 = rate(t + 0.5 * h, y + 0.5 * h * k2, alpha);
      const Eigen::VectorXd k4 = rate(t + h, y + h * k3, alpha);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!y.allFinite()) throw NonFiniteState("rollout state diverged");
      ++k;
      t = t_next;
      record_sample(t, schedule.alpha_at(t));
      if (opts.capture && goal_distance(problem, y.head(dim), opts) < tol) {
        captured = true;
        break;
      }
    }
  }

  out.cost = y[dim];
  out.terminal_defect = goal_distance(problem, y.head(dim), opts);
  out.termination = captured ? Termination::Captured : Termination::Horizon;
  return out;
}

double trajectory_cost(const dataset::Trajectory& traj, double alpha) {
  if (traj.times.size() < 2) return 0.0;
  const auto integrand = [&](std::size_t i) {
    if (traj.problem == Problem::Pendulum) {
      const double u = traj.controls[i](0);
      return (1.0 - alpha) * u * u + alpha;
    }
    return alpha + (1.0 - alpha) * traj.controls[i].norm();
  };
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < traj.times.size(); ++i)
    cost += 0.5 * (integrand(i) + integrand(i + 1)) *
            (traj.times[i + 1] - traj.times[i]);
  return cost;
}

double optimality_gap(double j_policy, double j_optimal) {
  if (!(j_optimal > 0.0))
    throw DegenerateReference("reference cost must be positive");
  return 100.0 * std::abs(j_policy - j_optimal) / j_optimal;
}

double mars_orbit_distance(const Eigen::Vector3d& r,
                           const spacecraft::Params& p) {
  const kepler::OrbitalElements& el = p.mars;
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(el.raan, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(el.inclination, Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(el.arg_periapsis, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix();
  const double lu = p.length_unit();

  // Coarse scan over the eccentric anomaly, then golden-section refinement
  // inside the bracketing arc.
  constexpr int kScan = 720;
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double ecc_anom = 2.0 * M_PI * i / kScan;
    const double d2 = (mars_conic_point(el, rot, ecc_anom, lu) - r).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  double lo = 2.0 * M_PI * (best - 1) / kScan;
  double hi = 2.0 * M_PI * (best + 1) / kScan;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = (mars_conic_point(el, rot, x1, lu) - r).squaredNorm();
  double f2 = (mars_conic_point(el, rot, x2, lu) - r).squaredNorm();
  for (int iter = 0; iter < 60; ++iter) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = (mars_conic_point(el, rot, x1, lu) - r).squaredNorm();
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = (mars_conic_point(el, rot, x2, lu) - r).squaredNorm();
    }
  }
  return std::sqrt(std::min(f1, f2));
}

Reference make_reference(const homotopy::SolutionRecord& record,
                         const RolloutOptions& opts) {
  const Problem problem = problem_from_string(record.problem);
  const int dim = state_dim(problem);

  Reference ref;
  ref.alpha = record.params.alpha;
  ref.duration = record.z[0];

  Eigen::VectorXd y0(2 * dim + 1);
  y0.head(dim) = record.s0;
  y0.segment(dim, dim) = record.z.tail(dim);
  y0[2 * dim] = 0.0;

  const double alpha = record.params.alpha;
  const double beta = record.params.beta;
  const spacecraft::Params sc = opts.spacecraft;
  const auto field = [&](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    if (problem == Problem::Pendulum)
      pendulum::augmented_rate_with_cost(y, alpha, dy);
    else
      spacecraft::augmented_rate_with_cost(y, alpha, beta, sc, dy);
  };
  const ode::SolutionPath path =
      ode::integrate(field, y0, 0.0, ref.duration, ode::IntegratorConfig{});

  // Truncate the optimal cost at capture on the same grid the rollouts use,
  // so gaps measure control quality rather than stopping-rule mismatch.
  const double tol = capture_tolerance(problem, opts);
  for (long j = 0;; ++j) {
    const double t = std::min(j * opts.step, ref.duration);
    const Eigen::VectorXd y = ode::sample_at(path, t);
    const bool captured =
        opts.capture && goal_distance(problem, y.head(dim), opts) < tol;
    if (captured || t >= ref.duration) {
      ref.optimal_cost = y[2 * dim];
      break;
    }
  }
  return ref;
}

double GapTable::mean_gap() const {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : rows) sum += row.gap_percent;
  return sum / static_cast<double>(rows.size());
}

GapTable eval_grid(const ControlLaw& law, const std::string& label,
                   Problem problem, const Eigen::VectorXd& s0,
                   const std::vector<Reference>& references,
                   const RolloutOptions& opts) {
  GapTable table;
  table.label = label;
  for (const auto& ref : references) {
    const double horizon =
        (problem == Problem::Pendulum ? 1.5 : 2.0) * ref.duration;
    const RolloutResult res = rollout(
        law, problem, s0, constant_schedule(ref.alpha), horizon, opts);
    GapRow row;
    row.alpha = ref.alpha;
    row.policy_cost = res.cost;
    row.optimal_cost = ref.optimal_cost;
    row.terminal_defect = res.terminal_defect;
    row.captured = res.termination == Termination::Captured;
    row.gap_percent = row.captured
                          ? optimality_gap(res.cost, ref.optimal_cost)
                          : std::numeric_limits<double>::infinity();
    table.rows.push_back(row);
  }
  return table;
}

void save_gap_tables(const std::vector<GapTable>& tables,
                     const std::string& path) {
  if (tables.empty()) throw OutOfRange("no gap tables to save");
  for (const auto& table : tables)
    if (table.rows.size() != tables.front().rows.size())
      throw SchemaMismatch("gap tables cover different alpha grids");

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out << "alpha";
  for (const auto& table : tables) out << ',' << table.label;
  out << '\n';
  for (std::size_t i = 0; i < tables.front().rows.size(); ++i) {
    out << io::format_double(tables.front().rows[i].alpha);
    for (const auto& table : tables)
      out << ',' << io::format_double(table.rows[i].gap_percent);
    out << '\n';
  }
  out << "mean";
  for (const auto& table : tables)
    out << ',' << io::format_double(table.mean_gap());
  out << '\n';
  if (!out) throw IOFailure("write failed: " + path);
}

void save_gap_details(const GapTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out << "alpha,gap_percent,policy_cost,optimal_cost,terminal_defect,"
         "captured\n";
  for (const auto& row : table.rows)
    out << io::format_double(row.alpha) << ','
        << io::format_double(row.gap_percent) << ','
        << io::format_double(row.policy_cost) << ','
        << io::format_double(row.optimal_cost) << ','
        << io::format_double(row.terminal_defect) << ','
        << (row.captured ? 1 : 0) << '\n';
  if (!out) throw IOFailure("write failed: " + path);
}

void save_rollout_csv(const RolloutResult& result, const Schedule& schedule,
                      const std::string& path) {
  const auto& traj = result.trajectory;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  if (traj.problem == Problem::Pendulum)
    out << "t,x,v,theta,omega,alpha,u,cost\n";
  else
    out << "t,rx,ry,rz,vx,vy,vz,m,alpha,ux,uy,uz,cost\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out << io::format_double(traj.times[i]);
    for (Eigen::Index c = 0; c < traj.states[i].size(); ++c)
      out << ',' << io::format_double(traj.states[i][c]);
    out << ',' << io::format_double(schedule.alpha_at(traj.times[i]));
    for (Eigen::Index c = 0; c < traj.controls[i].size(); ++c)
      out << ',' << io::format_double(traj.controls[i][c]);
    out << ',' << io::format_double(traj.running_cost[i]);
    out << '\n';
  }
  if (!out) throw IOFailure("write failed: " + path);
}

}  // namespace homopt::eval
