#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "crfbp/dynamics.hpp"
#include "crfbp/errors.hpp"

namespace crfbp {

struct IntegratorOptions {
  double tol = 1e-12;
  // Integration stops once any primary distance drops below this radius.
  double collision_radius = 1e-3;
  std::size_t max_steps = 5'000'000;
};

namespace detail {

template <class State>
Eigen::VectorXd to_vector(const State& x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

}  // namespace detail

// Fehlberg 7(8) pair driven by a PI step-size controller. `State` is any odeint-compatible
// container (std::array, std::vector). `guard(x)` returns false to abort the run; the
// thrown IntegrationError then holds the last accepted state.
template <class State, class System, class Guard>
void integrate(System&& sys, State& x, double t0, double t1, const IntegratorOptions& opt, Guard&& guard) {
  if (t1 == t0) return;
  boost::numeric::odeint::runge_kutta_fehlberg78<State> stepper;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double tol = opt.tol;
  double h = dir * std::min(std::abs(t1 - t0), 0.02);
  double t = t0;
  double err_prev = 1e-4;
  State xnew = x, xerr = x;
  std::size_t steps = 0;
  constexpr double order = 8.0;

  while (dir * (t1 - t) > 0.0) {
    if (++steps > opt.max_steps) throw IntegrationError("step budget exhausted", detail::to_vector(x), t);
    bool last = false;
    if (dir * (t + h - t1) >= 0.0) {
      h = t1 - t;
      last = true;
    }
    stepper.do_step(sys, x, t, xnew, h, xerr);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double scale = tol * (1.0 + std::max(std::abs(x[i]), std::abs(xnew[i])));
      err = std::max(err, std::abs(xerr[i]) / scale);
    }
    if (!(err <= 1.0)) {
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -1.0 / order)) : 0.2;
      h *= fac;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
        throw IntegrationError("step size underflow", detail::to_vector(x), t);
      continue;
    }
    if (!guard(xnew)) throw IntegrationError("near-collision or escape", detail::to_vector(x), t);
    x = xnew;
    t = last ? t1 : t + h;
    err = std::max(err, 1e-10);
    double fac = 0.9 * std::pow(err, -0.7 / order) * std::pow(err_prev, 0.4 / order);
    fac = std::clamp(fac, 0.2, 5.0);
    err_prev = err;
    h *= fac;
  }
}

template <class State, class System>
void integrate(System&& sys, State& x, double t0, double t1, const IntegratorOptions& opt) {
  integrate(sys, x, t0, t1, opt, [](const State&) { return true; });
}

// Flow of the lifted field. Aborts with IntegrationError when any r_i < collision_radius.
State9 flow(const State9& v, double t, const MassConfig& cfg, const IntegratorOptions& opt = {});
State9 flow(const State9& v, double t, const MassConfig& cfg, double tol);

// Samples the flow at monotone times (all of one sign, measured from the initial state).
std::vector<State9> flow_samples(const State9& v, const std::vector<double>& times, const MassConfig& cfg,
                                 const IntegratorOptions& opt = {});

// State transition matrix of the 6D variational equations over [0, t].
Mat6 transition_matrix6(const State6& u, double t, const MassConfig& cfg, const IntegratorOptions& opt = {});
// Same for the lifted field.
Mat9 transition_matrix9(const State9& v, double t, const MassConfig& cfg, const IntegratorOptions& opt = {});

}  // namespace crfbp
