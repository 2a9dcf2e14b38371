#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "homopt/detail/dop853_coefficients.hpp"
#include "homopt/errors.hpp"

namespace homopt::ode {

struct IntegratorConfig {
  double rtol = 1e-12;
  double atol = 1e-12;
  double h_init = 1e-4;
  double h_max = 10.0;
  long max_steps = 500000;
};

/// Accepted-node samples of one integration plus the dense-output
/// coefficients of every accepted step.
struct SolutionPath {
  std::vector<double> times;                // strictly increasing
  std::vector<Eigen::VectorXd> states;      // states.size() == times.size()
  std::vector<Eigen::MatrixXd> interp;      // (dim x 7) block per step

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  const Eigen::VectorXd& final_state() const { return states.back(); }
};

namespace detail {

struct Dop853Tables {
  Eigen::MatrixXd a;   // 16 x 16
  Eigen::VectorXd b;   // 12
  Eigen::VectorXd c;   // 16
  Eigen::MatrixXd d;   // 4 x 16
  Eigen::VectorXd e3;  // 13
  Eigen::VectorXd e5;  // 13

  Dop853Tables() {
    namespace t = homopt::detail::dop853;
    a.setZero(t::kStagesExtended, t::kStagesExtended);
    for (int i = 0; i < t::kStagesExtended; ++i)
      for (int j = 0; j < t::kStagesExtended; ++j) a(i, j) = t::kA[i][j];
    b.resize(t::kStages);
    for (int i = 0; i < t::kStages; ++i) b[i] = t::kB[i];
    c.resize(t::kStagesExtended);
    for (int i = 0; i < t::kStagesExtended; ++i) c[i] = t::kC[i];
    d.resize(4, t::kStagesExtended);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < t::kStagesExtended; ++j) d(i, j) = t::kD[i][j];
    e3.resize(t::kStages + 1);
    e5.resize(t::kStages + 1);
    for (int i = 0; i <= t::kStages; ++i) {
      e3[i] = t::kE3[i];
      e5[i] = t::kE5[i];
    }
  }
};

inline const Dop853Tables& tables() {
  static const Dop853Tables t;
  return t;
}

}  // namespace detail

/// Integrates the autonomous field dy/dt = f(y) from t0 to tf with the
/// Dormand-Prince 8(5,3) pair. `field` must have the signature
/// void(const Eigen::VectorXd& y, Eigen::VectorXd& dydt).
template <class Field>
SolutionPath integrate(Field&& field, const Eigen::VectorXd& y0, double t0,
                       double tf, const IntegratorConfig& cfg = {}) {
  if (!(tf > t0)) throw OutOfRange("integrate: requires tf > t0");
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0) || !(cfg.h_init > 0.0) ||
      !(cfg.h_init <= cfg.h_max) || cfg.max_steps <= 0)
    throw OutOfRange("integrate: invalid IntegratorConfig");

  const auto& tab = detail::tables();
  const int n = static_cast<int>(y0.size());
  constexpr int kStages = homopt::detail::dop853::kStages;
  constexpr int kStagesExt = homopt::detail::dop853::kStagesExtended;
  constexpr double kSafety = 0.9;
  constexpr double kMinFactor = 0.2;
  constexpr double kMaxFactor = 10.0;
  constexpr double kErrorExponent = -1.0 / 8.0;  // order 8(5,3) pair

  SolutionPath path;
  path.times.push_back(t0);
  path.states.push_back(y0);

  Eigen::MatrixXd k(n, kStagesExt);
  Eigen::VectorXd y = y0, y_new(n), y_stage(n), f(n), f_new(n), scale(n);

  field(y, f);
  if (!f.allFinite() || !y.allFinite())
    throw NonFiniteState("integrate: non-finite field at initial state");

  double t = t0;
  double h = std::min({cfg.h_init, cfg.h_max, tf - t0});
  bool rejected = false;
  bool saw_nonfinite = false;
  long attempts = 0;

  while (t < tf) {
    if (++attempts > cfg.max_steps)
      throw StepLimitExceeded("integrate: max_steps exceeded");
    const double min_step = 10.0 * (std::nextafter(t, tf) - t);
    if (h < min_step) {
      if (saw_nonfinite)
        throw NonFiniteState("integrate: NaN/Inf produced; step underflow");
      throw StepLimitExceeded("integrate: step size underflow");
    }

    double t_new = t + h;
    if (t_new > tf) t_new = tf;
    const double h_step = t_new - t;

    k.col(0) = f;
    for (int s = 1; s < kStages; ++s) {
      y_stage.noalias() = y + h_step * (k.leftCols(s) * tab.a.row(s).head(s).transpose());
      field(y_stage, f_new);
      k.col(s) = f_new;
    }
    y_new.noalias() = y + h_step * (k.leftCols(kStages) * tab.b);
    field(y_new, f_new);
    k.col(kStages) = f_new;

    double error_norm;
    if (!y_new.allFinite() || !f_new.allFinite()) {
      error_norm = std::numeric_limits<double>::infinity();
      saw_nonfinite = true;
    } else {
      scale = cfg.atol + cfg.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array();
      const Eigen::VectorXd err5 =
          (k.leftCols(kStages + 1) * tab.e5).cwiseQuotient(scale);
      const Eigen::VectorXd err3 =
          (k.leftCols(kStages + 1) * tab.e3).cwiseQuotient(scale);
      const double err5_sq = err5.squaredNorm();
      const double err3_sq = err3.squaredNorm();
      if (err5_sq == 0.0 && err3_sq == 0.0) {
        error_norm = 0.0;
      } else {
        error_norm =
            h_step * err5_sq / std::sqrt((err5_sq + 0.01 * err3_sq) * n);
      }
      if (!std::isfinite(error_norm)) {
        error_norm = std::numeric_limits<double>::infinity();
        saw_nonfinite = true;
      }
    }

    if (error_norm < 1.0) {
      // Extra stages of the 7th-order interpolant, then the coefficient
      // block F used by sample_at.
      for (int s = kStages + 1; s < kStagesExt; ++s) {
        y_stage.noalias() =
            y + h_step * (k.leftCols(s) * tab.a.row(s).head(s).transpose());
        field(y_stage, f_new);
        k.col(s) = f_new;
      }
      Eigen::MatrixXd interp(n, 7);
      const Eigen::VectorXd delta = y_new - y;
      interp.col(0) = delta;
      interp.col(1) = h_step * k.col(0) - delta;
      interp.col(2) = 2.0 * delta - h_step * (k.col(kStages) + k.col(0));
      interp.rightCols(4).noalias() = h_step * (k * tab.d.transpose());

      path.times.push_back(t_new);
      path.states.push_back(y_new);
      path.interp.push_back(std::move(interp));

      double factor = kMaxFactor;
      if (error_norm > 0.0)
        factor =
            std::min(kMaxFactor, kSafety * std::pow(error_norm, kErrorExponent));
      if (rejected) factor = std::min(1.0, factor);

      t = t_new;
      y = y_new;
      f = k.col(kStages);
      h = std::min(h_step * factor, cfg.h_max);
      rejected = false;
      saw_nonfinite = false;
    } else {
      const double factor =
          std::isfinite(error_norm)
              ? std::max(kMinFactor, kSafety * std::pow(error_norm, kErrorExponent))
              : kMinFactor;
      h = h_step * factor;
      rejected = true;
    }
  }
  return path;
}

/// Dense-output evaluation at time t inside the integrated span. Exact at
/// accepted nodes.
inline Eigen::VectorXd sample_at(const SolutionPath& path, double t) {
  if (path.times.empty()) throw OutOfRange("sample_at: empty path");
  if (t < path.t_begin() || t > path.t_end())
    throw OutOfRange("sample_at: t outside integrated span");
  if (t == path.t_begin()) return path.states.front();
  if (t == path.t_end()) return path.states.back();

  // Index of the step whose interval [times[i], times[i+1]] contains t.
  const auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - path.times.begin());
  if (i > 0) --i;
  if (i >= path.interp.size()) i = path.interp.size() - 1;

  if (t == path.times[i]) return path.states[i];

  const double h = path.times[i + 1] - path.times[i];
  const double x = (t - path.times[i]) / h;
  const Eigen::MatrixXd& coef = path.interp[i];
  Eigen::VectorXd y = Eigen::VectorXd::Zero(coef.rows());
  for (int j = 6; j >= 0; --j) {
    y += coef.col(j);
    y *= ((6 - j) % 2 == 0) ? x : (1.0 - x);
  }
  y += path.states[i];
  return y;
}

}  // namespace homopt::ode
