#include "doctest.h"

#include <cmath>
#include <vector>

#include "homopt/errors.hpp"
#include "homopt/homotopy.hpp"
#include "homopt/rng.hpp"

namespace ht = homopt::homotopy;
using homopt::shooting::SolveReport;

namespace {

ht::SolutionRecord make_start(double alpha, double beta) {
  ht::SolutionRecord rec;
  rec.problem = "toy";
  rec.s0 = Eigen::Vector2d{1.0, 2.0};
  rec.z = Eigen::Vector3d{3.0, 0.5, -0.5};
  rec.params.alpha = alpha;
  rec.params.beta = beta;
  return rec;
}

SolveReport succeed(const Eigen::VectorXd& z) {
  SolveReport rep;
  rep.z = z;
  rep.residual_norm = 1e-12;
  rep.converged = true;
  return rep;
}

SolveReport fail(const Eigen::VectorXd& z) {
  SolveReport rep;
  rep.z = z;
  rep.residual_norm = 1.0;
  return rep;
}

}  // namespace

TEST_CASE("criteria sweep returns the input when already at one") {
  int calls = 0;
  const ht::SolveFn solver = [&](const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z,
                                 const ht::HomotopyParams&) {
    ++calls;
    return succeed(z);
  };
  const auto recs =
      ht::homotopy_criteria(solver, make_start(1.0, 1.0), ht::BlendAxis::Alpha);
  CHECK(recs.size() == 1);
  CHECK(calls == 0);
  CHECK(recs[0].params.alpha == 1.0);
}

TEST_CASE("criteria sweep doubles its step when everything converges") {
  std::vector<double> blends;
  const ht::SolveFn solver = [&](const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z,
                                 const ht::HomotopyParams& p) {
    blends.push_back(p.alpha);
    return succeed(z);
  };
  ht::CriteriaOptions opts;
  opts.initial_step = 0.1;
  opts.max_step = 1.0;
  const auto recs = ht::homotopy_criteria(solver, make_start(0.0, 1.0),
                                          ht::BlendAxis::Alpha, opts);
  const std::vector<double> expected{0.1, 0.3, 0.7, 1.0};
  REQUIRE(blends.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(blends[i] == doctest::Approx(expected[i]));
  REQUIRE(recs.size() == 5);  // start + four accepted
  CHECK(recs.back().params.alpha == 1.0);
}

TEST_CASE("criteria sweep halves on failure and recovers") {
  // Accept only careful steps; the sweep must shrink, then re-grow.
  double counter = 0.0;
  double last = 0.0;
  const ht::SolveFn solver = [&](const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z,
                                 const ht::HomotopyParams& p) {
    const double step = p.beta - last;
    if (step > 0.026) return fail(z);
    last = p.beta;
    Eigen::VectorXd zn = z;
    zn[0] = ++counter;  // tag so warm-start chaining is observable
    return succeed(zn);
  };
  const auto recs = ht::homotopy_criteria(solver, make_start(0.3, 0.0),
                                          ht::BlendAxis::Beta);
  CHECK(recs.back().params.beta == 1.0);
  CHECK(recs.back().params.alpha == 0.3);  // other axis untouched
  for (size_t i = 1; i < recs.size(); ++i) {
    CHECK(recs[i].params.beta > recs[i - 1].params.beta);
    // Each accepted record carries the solver's decision vector.
    CHECK(recs[i].z[0] == static_cast<double>(i));
  }
}

TEST_CASE("criteria sweep rejects blends outside the unit interval") {
  const ht::SolveFn solver = [](const Eigen::VectorXd&,
                                const Eigen::VectorXd& z,
                                const ht::HomotopyParams&) {
    return succeed(z);
  };
  auto bad = make_start(1.5, 1.0);
  CHECK_THROWS_AS(ht::homotopy_criteria(solver, bad, ht::BlendAxis::Alpha),
                  homopt::OutOfRange);
  bad = make_start(0.0, -0.2);
  CHECK_THROWS_AS(ht::homotopy_criteria(solver, bad, ht::BlendAxis::Beta),
                  homopt::OutOfRange);
}

TEST_CASE("criteria sweep stalls when nothing converges") {
  int calls = 0;
  const ht::SolveFn solver = [&](const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z,
                                 const ht::HomotopyParams&) {
    ++calls;
    return fail(z);
  };
  CHECK_THROWS_AS(
      ht::homotopy_criteria(solver, make_start(0.0, 1.0), ht::BlendAxis::Alpha),
      homopt::Stalled);
  // 0.05 halves below 1e-6 after 16 failures.
  CHECK(calls == 16);
}

TEST_CASE("state sweep with zero requested records is empty") {
  const ht::SolveFn solver = [](const Eigen::VectorXd&,
                                const Eigen::VectorXd& z,
                                const ht::HomotopyParams&) {
    return succeed(z);
  };
  homopt::Rng rng(7);
  const auto recs = ht::homotopy_state(solver, make_start(0.0, 1.0), 0,
                                       ht::pendulum_state_options(), rng);
  CHECK(recs.empty());
}

TEST_CASE("state sweep collects the requested number of converged records") {
  std::vector<Eigen::VectorXd> seen;
  const ht::SolveFn solver = [&](const Eigen::VectorXd& s0,
                                 const Eigen::VectorXd& z,
                                 const ht::HomotopyParams&) {
    seen.push_back(s0);
    return succeed(z);
  };
  homopt::Rng rng(7);
  auto start = make_start(0.2, 1.0);
  start.s0 = Eigen::Vector4d{0.0, 0.0, M_PI, 0.0};
  const auto recs =
      ht::homotopy_state(solver, start, 25, ht::pendulum_state_options(), rng);
  REQUIRE(recs.size() == 25);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].params.alpha == 0.2);
    CHECK(recs[i].s0 == seen[i]);
    if (i > 0) CHECK(recs[i].s0 != recs[i - 1].s0);
  }
}

TEST_CASE("state sweep stalls when the solver never accepts") {
  const ht::SolveFn solver = [](const Eigen::VectorXd&,
                                const Eigen::VectorXd& z,
                                const ht::HomotopyParams&) {
    return fail(z);
  };
  homopt::Rng rng(7);
  CHECK_THROWS_AS(ht::homotopy_state(solver, make_start(0.0, 1.0), 3,
                                     ht::pendulum_state_options(), rng),
                  homopt::Stalled);
}

TEST_CASE("zero perturbation returns the state unchanged") {
  homopt::Rng rng(3);
  const Eigen::Vector4d s0{0.4, -0.2, 2.8, 0.1};
  const Eigen::Vector4d scales{0.5, 0.5, M_PI / 4.0, 0.5};
  const Eigen::VectorXd out = ht::perturb(s0, 0.0, scales, rng);
  CHECK(out == s0);
}

TEST_CASE("perturbation is deterministic and centered") {
  const Eigen::Vector2d s0{1.0, -2.0};
  const Eigen::Vector2d scales{0.3, 0.7};

  homopt::Rng a(11), b(11);
  CHECK(ht::perturb(s0, 0.5, scales, a) == ht::perturb(s0, 0.5, scales, b));

  homopt::Rng rng(12);
  const int n = 10000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i)
    mean += (ht::perturb(s0, 1.0, scales, rng) - s0) / n;
  // Sample mean of N(0, scale^2) stays within 3 sigma / sqrt(n).
  for (int j = 0; j < 2; ++j)
    CHECK(std::abs(mean[j]) < 3.0 * scales[j] / std::sqrt(double(n)));
}

TEST_CASE("perturbation respects the mass floor") {
  Eigen::VectorXd s0(7);
  s0 << 1, 0, 0, 0, 1, 0, 0.55;
  const auto opts = ht::spacecraft_state_options();
  homopt::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd out = ht::perturb(s0, 1.0, opts.scales, rng,
                                            opts.mass_index, opts.mass_floor);
    CHECK(out[6] >= opts.mass_floor);
  }
}
