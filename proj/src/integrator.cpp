#include "crfbp/integrator.hpp"

#include <array>

namespace crfbp {

namespace {

using Arr9 = std::array<double, 9>;

Arr9 to_array(const State9& v) {
  Arr9 a;
  for (int i = 0; i < 9; ++i) a[i] = v[i];
  return a;
}

State9 to_state(const Arr9& a) { return Eigen::Map<const State9>(a.data()); }

auto lifted_guard(const IntegratorOptions& opt) {
  const double wmax = 1.0 / opt.collision_radius;
  return [wmax](const auto& x) {
    for (std::size_t i = 0; i < 9; ++i)
      if (!std::isfinite(x[i])) return false;
    return x[6] < wmax && x[7] < wmax && x[8] < wmax;
  };
}

}  // namespace

State9 flow(const State9& v, double t, const MassConfig& cfg, const IntegratorOptions& opt) {
  if (t == 0.0) return v;
  Arr9 x = to_array(v);
  auto rhs = [&cfg](const Arr9& s, Arr9& ds, double) {
    Eigen::Map<State9>(ds.data()) = field9(Eigen::Map<const State9>(s.data()), cfg);
  };
  integrate(rhs, x, 0.0, t, opt, lifted_guard(opt));
  return to_state(x);
}

State9 flow(const State9& v, double t, const MassConfig& cfg, double tol) {
  IntegratorOptions opt;
  opt.tol = tol;
  return flow(v, t, cfg, opt);
}

std::vector<State9> flow_samples(const State9& v, const std::vector<double>& times, const MassConfig& cfg,
                                 const IntegratorOptions& opt) {
  std::vector<State9> out;
  out.reserve(times.size());
  Arr9 x = to_array(v);
  auto rhs = [&cfg](const Arr9& s, Arr9& ds, double) {
    Eigen::Map<State9>(ds.data()) = field9(Eigen::Map<const State9>(s.data()), cfg);
  };
  double t = 0.0;
  for (double tn : times) {
    integrate(rhs, x, t, tn, opt, lifted_guard(opt));
    t = tn;
    out.push_back(to_state(x));
  }
  return out;
}

Mat6 transition_matrix6(const State6& u, double t, const MassConfig& cfg, const IntegratorOptions& opt) {
  using Arr = std::array<double, 42>;
  Arr x{};
  for (int i = 0; i < 6; ++i) x[i] = u[i];
  Eigen::Map<Mat6>(x.data() + 6).setIdentity();
  auto rhs = [&cfg](const Arr& s, Arr& ds, double) {
    const Eigen::Map<const State6> y(s.data());
    Eigen::Map<State6>(ds.data()) = field6(y, cfg);
    Eigen::Map<Mat6>(ds.data() + 6).noalias() = jacobian6(y, cfg) * Eigen::Map<const Mat6>(s.data() + 6);
  };
  const double rmin = opt.collision_radius;
  auto guard = [&cfg, rmin](const Arr& s) {
    for (double v : s)
      if (!std::isfinite(v)) return false;
    for (int i = 0; i < 3; ++i) {
      const double dx = s[0] - cfg.x[i], dy = s[2] - cfg.y[i], dz = s[4] - cfg.z[i];
      if (dx * dx + dy * dy + dz * dz < rmin * rmin) return false;
    }
    return true;
  };
  integrate(rhs, x, 0.0, t, opt, guard);
  return Eigen::Map<const Mat6>(x.data() + 6);
}

Mat9 transition_matrix9(const State9& v, double t, const MassConfig& cfg, const IntegratorOptions& opt) {
  using Arr = std::array<double, 90>;
  Arr x{};
  for (int i = 0; i < 9; ++i) x[i] = v[i];
  Eigen::Map<Mat9>(x.data() + 9).setIdentity();
  auto rhs = [&cfg](const Arr& s, Arr& ds, double) {
    const Eigen::Map<const State9> y(s.data());
    Eigen::Map<State9>(ds.data()) = field9(y, cfg);
    Eigen::Map<Mat9>(ds.data() + 9).noalias() = jacobian9(y, cfg) * Eigen::Map<const Mat9>(s.data() + 9);
  };
  integrate(rhs, x, 0.0, t, opt, lifted_guard(opt));
  return Eigen::Map<const Mat9>(x.data() + 9);
}

}  // namespace crfbp
