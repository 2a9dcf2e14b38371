#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "homopt/errors.hpp"
#include "homopt/eval.hpp"
#include "homopt/kepler.hpp"
#include "homopt/mlp.hpp"
#include "homopt/pendulum.hpp"

namespace ev = homopt::eval;
namespace ht = homopt::homotopy;
namespace pend = homopt::pendulum;
using homopt::Problem;

namespace {

// The alpha=0 swingup everything downstream leans on; solved once.
struct SwingupFixture {
  ht::SolutionRecord record;
  homopt::dataset::Trajectory trajectory;
  homopt::ode::SolutionPath augmented;
};

const SwingupFixture& swingup() {
  static const SwingupFixture fixture = [] {
    const pend::State s0 = pend::nominal_state();
    const auto report = pend::solve_multistart(s0, 0.0, 2024);
    REQUIRE(report.converged);

    SwingupFixture f;
    f.record.problem = "pendulum";
    f.record.s0 = s0;
    f.record.z = report.z;
    f.record.params.alpha = 0.0;
    f.record.residual_norm = report.residual_norm;
    // The swingup is open-loop unstable, so the stored control needs a
    // denser grid than the training datasets use before a feedback-free
    // replay can re-enter the capture ball.
    homopt::dataset::RealizeOptions realize;
    realize.samples = 2000;
    f.trajectory = homopt::dataset::realize_trajectory(f.record, realize);

    Eigen::VectorXd y0(8);
    y0 << s0, report.z.tail(4);
    f.augmented = homopt::ode::integrate(
        [](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
          pend::augmented_rate(y, 0.0, dy);
        },
        y0, 0.0, report.z[0]);
    return f;
  }();
  return fixture;
}

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

const ev::ControlLaw kZeroLaw = [](double, const Eigen::VectorXd&, double) {
  return Eigen::VectorXd::Zero(1).eval();
};

}  // namespace

TEST_CASE("schedules hold each alpha until the next switch") {
  const ev::Schedule s = ev::parse_schedule("0:0,2:0.5,4:1");
  REQUIRE(s.switches.size() == 3);
  CHECK(s.alpha_at(0.0) == 0.0);
  CHECK(s.alpha_at(1.99) == 0.0);
  CHECK(s.alpha_at(2.0) == 0.5);
  CHECK(s.alpha_at(3.9) == 0.5);
  CHECK(s.alpha_at(4.0) == 1.0);
  CHECK(s.alpha_at(100.0) == 1.0);

  const ev::Schedule c = ev::constant_schedule(0.3);
  CHECK(c.alpha_at(0.0) == 0.3);
  CHECK(c.alpha_at(7.0) == 0.3);
}

TEST_CASE("malformed schedules are rejected") {
  CHECK_THROWS_AS(ev::parse_schedule(""), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("1:0,2:1"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:1.5"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:-0.1"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:0,2:0.5,2:1"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:0,4:1,2:0.5"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:0,abc"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0:0,"), homopt::OutOfRange);
  CHECK_THROWS_AS(ev::parse_schedule("0"), homopt::OutOfRange);
}

TEST_CASE("a vanishing horizon returns the initial state and no cost") {
  const Eigen::VectorXd s0 = pend::nominal_state();
  const ev::RolloutResult res = ev::rollout(
      kZeroLaw, Problem::Pendulum, s0, ev::constant_schedule(0.5), 1e-9);
  CHECK(res.termination == ev::Termination::Horizon);
  CHECK((res.trajectory.states.front().array() == s0.array()).all());
  CHECK((res.trajectory.states.back() - s0).norm() < 1e-6);
  CHECK(res.cost < 1e-8);
}

TEST_CASE("rollout cost integrates the blended running cost") {
  // Zero control from rest: only the alpha dt term accumulates, and RK4
  // integrates a constant exactly.
  const ev::RolloutResult res =
      ev::rollout(kZeroLaw, Problem::Pendulum, pend::nominal_state(),
                  ev::constant_schedule(0.4), 0.005);
  REQUIRE(res.trajectory.times.size() == 2);
  CHECK(res.trajectory.times[1] == 0.005);
  CHECK(res.cost == doctest::Approx(0.4 * 0.005).epsilon(1e-12));
  CHECK(res.terminal_defect == doctest::Approx(M_PI));
}

TEST_CASE("rollout captures immediately at the goal") {
  const ev::RolloutResult res =
      ev::rollout(kZeroLaw, Problem::Pendulum, Eigen::VectorXd::Zero(4),
                  ev::constant_schedule(0.0), 10.0);
  CHECK(res.termination == ev::Termination::Captured);
  CHECK(res.trajectory.times.size() == 1);
  CHECK(res.cost == 0.0);
}

TEST_CASE("rollout validates horizon and state size") {
  CHECK_THROWS_AS(ev::rollout(kZeroLaw, Problem::Pendulum,
                              pend::nominal_state(),
                              ev::constant_schedule(0.0), 0.0),
                  homopt::OutOfRange);
  CHECK_THROWS_AS(ev::rollout(kZeroLaw, Problem::Pendulum,
                              Eigen::VectorXd::Zero(7),
                              ev::constant_schedule(0.0), 1.0),
                  homopt::OutOfRange);
}

TEST_CASE("trajectory cost follows the trapezoidal blend") {
  homopt::dataset::Trajectory traj;
  traj.problem = Problem::Pendulum;
  for (int i = 0; i <= 20; ++i) {
    traj.times.push_back(0.1 * i);
    traj.states.push_back(Eigen::VectorXd::Zero(4));
    traj.controls.push_back(Eigen::VectorXd::Constant(1, 1.0));
  }
  // Constant u=1 on [0,2]: pure time cost is the duration, pure quadratic
  // cost is the same integral of 1.
  CHECK(ev::trajectory_cost(traj, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ev::trajectory_cost(traj, 0.0) == doctest::Approx(2.0).epsilon(1e-12));

  for (auto& u : traj.controls) u.setZero();
  CHECK(ev::trajectory_cost(traj, 0.0) == 0.0);

  // Spacecraft blend at beta=1 prices time and throttle magnitude.
  homopt::dataset::Trajectory sc;
  sc.problem = Problem::Spacecraft;
  for (int i = 0; i <= 10; ++i) {
    sc.times.push_back(0.1 * i);
    sc.states.push_back(Eigen::VectorXd::Zero(7));
    sc.controls.push_back(Eigen::Vector3d(0.0, 0.6, 0.0));
  }
  CHECK(ev::trajectory_cost(sc, 0.5) ==
        doctest::Approx(0.5 + 0.5 * 0.6).epsilon(1e-12));

  homopt::dataset::Trajectory single;
  single.problem = Problem::Pendulum;
  single.times.push_back(0.0);
  single.controls.push_back(Eigen::VectorXd::Zero(1));
  CHECK(ev::trajectory_cost(single, 0.7) == 0.0);
}

TEST_CASE("optimality gap is a relative absolute percentage") {
  CHECK(ev::optimality_gap(1.0, 1.0) == 0.0);
  CHECK(ev::optimality_gap(1.02, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ev::optimality_gap(0.98, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(ev::optimality_gap(1.0, 0.0), homopt::DegenerateReference);
  CHECK_THROWS_AS(ev::optimality_gap(1.0, -2.0), homopt::DegenerateReference);
}

TEST_CASE("mars orbit distance agrees with a brute-force conic scan") {
  const homopt::spacecraft::Params p;
  const double lu = p.length_unit();

  // Points on the orbit itself sit at distance zero.
  for (double m : {0.0, 1.3, 2.9, 5.5}) {
    const Eigen::Vector3d on =
        homopt::kepler::mars_orbit_state(m).position / lu;
    CHECK(ev::mars_orbit_distance(on, p) < 1e-9);
  }

  // Off-orbit points against a dense independent sweep of the same conic.
  const auto scan_min = [&](const Eigen::Vector3d& r) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20000; ++i) {
      const double m = 2.0 * M_PI * i / 20000.0;
      const Eigen::Vector3d q =
          homopt::kepler::mars_orbit_state(m).position / lu;
      best = std::min(best, (q - r).norm());
    }
    return best;
  };
  for (const Eigen::Vector3d& r :
       {Eigen::Vector3d(1.2, -0.4, 0.1), Eigen::Vector3d(0.0, 0.0, 0.0),
        Eigen::Vector3d(-2.0, 1.5, -0.3)}) {
    CHECK(ev::mars_orbit_distance(r, p) ==
          doctest::Approx(scan_min(r)).epsilon(1e-5));
  }
}

TEST_CASE("replaying the open-loop optimum closes the loop within a tenth "
          "of a percent") {
  const SwingupFixture& f = swingup();
  const ev::Reference ref = ev::make_reference(f.record);
  CHECK(ref.alpha == 0.0);
  CHECK(ref.duration == f.record.z[0]);
  CHECK(ref.optimal_cost > 0.0);

  const ev::RolloutResult res = ev::rollout(
      ev::replay_law(f.trajectory), Problem::Pendulum, f.record.s0,
      ev::constant_schedule(0.0), 1.5 * ref.duration);
  REQUIRE(res.termination == ev::Termination::Captured);
  CHECK(ev::optimality_gap(res.cost, ref.optimal_cost) < 0.1);
}

TEST_CASE("pmp feedback from the stored costate path reproduces the "
          "open-loop trajectory") {
  const SwingupFixture& f = swingup();
  const double duration = f.record.z[0];

  const ev::ControlLaw law =
      ev::pmp_law(f.augmented, Problem::Pendulum, f.record.params);
  const ev::RolloutResult res =
      ev::rollout(law, Problem::Pendulum, f.record.s0,
                  ev::constant_schedule(0.0), 1.5 * duration);
  REQUIRE(res.termination == ev::Termination::Captured);

  double worst = 0.0;
  for (std::size_t i = 0; i < res.trajectory.times.size(); ++i) {
    const double t = res.trajectory.times[i];
    if (t > duration) break;
    const Eigen::VectorXd y = homopt::ode::sample_at(f.augmented, t);
    worst = std::max(worst, (res.trajectory.states[i] - y.head(4))
                                .lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("eval grid scores a replayed optimum near zero and a dead policy "
          "as infinite") {
  const SwingupFixture& f = swingup();
  const std::vector<ev::Reference> refs{ev::make_reference(f.record)};

  const ev::GapTable good =
      ev::eval_grid(ev::replay_law(f.trajectory), "replay", Problem::Pendulum,
                    f.record.s0, refs);
  REQUIRE(good.rows.size() == 1);
  CHECK(good.rows[0].captured);
  CHECK(good.rows[0].gap_percent < 0.1);
  CHECK(good.mean_gap() == good.rows[0].gap_percent);

  const ev::GapTable dead = ev::eval_grid(kZeroLaw, "zero", Problem::Pendulum,
                                          f.record.s0, refs);
  REQUIRE(dead.rows.size() == 1);
  CHECK(!dead.rows[0].captured);
  CHECK(std::isinf(dead.rows[0].gap_percent));
}

TEST_CASE("policy law feeds state and alpha through the network") {
  const homopt::mlp::MlpParams params = homopt::mlp::init({5, 8, 2, 1}, 17);
  const ev::ControlLaw law = ev::policy_law(params, Problem::Pendulum);
  const Eigen::VectorXd s = Eigen::Vector4d{0.1, -0.2, 2.0, 0.5};
  const Eigen::VectorXd u = law(0.0, s, 0.75);
  REQUIRE(u.size() == 1);
  CHECK(std::abs(u[0]) < 1.0);

  Eigen::VectorXd input(5);
  input << s, 0.75;
  CHECK(u[0] == homopt::mlp::forward_one(params, input)[0]);
}

TEST_CASE("gap tables and rollout dumps land on disk in the agreed shape") {
  ev::GapTable t1;
  t1.label = "50x2";
  t1.rows.push_back(ev::GapRow{0.0, 1.5, 1.015, 1.0, 0.01, true});
  t1.rows.push_back(ev::GapRow{1.0, 2.5, 1.025, 1.0, 0.02, true});
  ev::GapTable t2 = t1;
  t2.label = "100x4";
  t2.rows[0].gap_percent = 0.5;
  t2.rows[1].gap_percent = 1.5;

  const std::string path = temp_path("homopt_gaps.csv");
  ev::save_gap_tables({t1, t2}, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "alpha,50x2,100x4");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
    ++rows;
  }
  CHECK(rows == 3);  // two alphas and the mean row
  CHECK(last.rfind("mean,", 0) == 0);
  CHECK(last == "mean,2,1");
  std::remove(path.c_str());

  ev::GapTable mismatched = t2;
  mismatched.rows.pop_back();
  CHECK_THROWS_AS(ev::save_gap_tables({t1, mismatched}, temp_path("g.csv")),
                  homopt::SchemaMismatch);
  CHECK_THROWS_AS(ev::save_gap_tables({}, temp_path("g.csv")),
                  homopt::OutOfRange);

  const ev::RolloutResult res =
      ev::rollout(kZeroLaw, Problem::Pendulum, pend::nominal_state(),
                  ev::constant_schedule(0.5), 0.02);
  const std::string rpath = temp_path("homopt_rollout.csv");
  ev::save_rollout_csv(res, ev::constant_schedule(0.5), rpath);
  std::ifstream rin(rpath);
  REQUIRE(std::getline(rin, line));
  CHECK(line == "t,x,v,theta,omega,alpha,u,cost");
  int samples = 0;
  while (std::getline(rin, line))
    if (!line.empty()) ++samples;
  CHECK(samples == static_cast<int>(res.trajectory.times.size()));
  std::remove(rpath.c_str());
}
