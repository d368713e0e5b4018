#include "crfbp/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "crfbp/errors.hpp"
#include "crfbp/integrator.hpp"

namespace crfbp {

namespace {

constexpr int kDim = 9;

double primary_coord(const MassConfig& cfg, int c, int i) {
  return c == 0 ? cfg.x[i] : c == 1 ? cfg.y[i] : cfg.z[i];
}

// Polynomial field evaluated coefficientwise on Fourier-Taylor data. The intermediate products are
// kept for every multi-index so that order alpha only needs lower orders plus itself.
//   rows of `inter`: 0-2 w_i^2, 3-5 w_i^3, 6-14 u_{2c} w_i^3 (c*3+i), 15-17 u_{2c} u_{2c+1}, 18-20 d_i . vel
class FieldAlgebra {
 public:
  FieldAlgebra(int order, int modes, const MassConfig& cfg, double sign)
      : order_(order), modes_(modes), len_(2 * modes - 1), cfg_(cfg), sign_(sign) {
    a_.assign(taylor_count(order), Eigen::MatrixXcd::Zero(kDim, len_));
    inter_.assign(taylor_count(order), Eigen::MatrixXcd::Zero(21, len_));
  }

  Eigen::MatrixXcd& coeff(int idx) { return a_[idx]; }
  const std::vector<Eigen::MatrixXcd>& coefficients() const { return a_; }

  // F(a)_alpha using the current a at every index <= alpha; refreshes the intermediates at alpha.
  Eigen::MatrixXcd compute_at(int a1, int a2) {
    const int idx = taylor_index(a1, a2);
    Eigen::MatrixXcd& I = inter_[idx];
    const Eigen::MatrixXcd& A = a_[idx];
    auto prod = [&](auto&& x, auto&& y) {
      Eigen::VectorXcd s = Eigen::VectorXcd::Zero(len_);
      for (int b1 = 0; b1 <= a1; ++b1)
        for (int b2 = 0; b2 <= a2; ++b2) s += fourier_convolve(x(taylor_index(b1, b2)), y(taylor_index(a1 - b1, a2 - b2)));
      return s;
    };
    auto comp = [&](int i) { return [this, i](int j) -> Eigen::VectorXcd { return a_[j].row(i).transpose(); }; };
    auto inter = [&](int r) { return [this, r](int j) -> Eigen::VectorXcd { return inter_[j].row(r).transpose(); }; };

    for (int i = 0; i < 3; ++i) I.row(i) = prod(comp(6 + i), comp(6 + i)).transpose();
    for (int i = 0; i < 3; ++i) I.row(3 + i) = prod(inter(i), comp(6 + i)).transpose();
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 3; ++i) I.row(6 + 3 * c + i) = prod(comp(2 * c), inter(3 + i)).transpose();
    for (int c = 0; c < 3; ++c) I.row(15 + c) = prod(comp(2 * c), comp(2 * c + 1)).transpose();
    for (int i = 0; i < 3; ++i) {
      Eigen::RowVectorXcd dv = Eigen::RowVectorXcd::Zero(len_);
      for (int c = 0; c < 3; ++c) dv += primary_coord(cfg_, c, i) * A.row(2 * c + 1) - I.row(15 + c);
      I.row(18 + i) = dv;
    }

    Eigen::MatrixXcd F(kDim, len_);
    for (int i = 0; i < 3; ++i) F.row(6 + i) = prod(inter(18 + i), inter(3 + i)).transpose();
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(3, len_);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 3; ++i)
        acc.row(c) += cfg_.m[i] * (primary_coord(cfg_, c, i) * I.row(3 + i) - I.row(6 + 3 * c + i));
    F.row(0) = A.row(1);
    F.row(1) = 2.0 * A.row(3) + A.row(0) + acc.row(0);
    F.row(2) = A.row(3);
    F.row(3) = -2.0 * A.row(1) + A.row(2) + acc.row(1);
    F.row(4) = A.row(5);
    F.row(5) = acc.row(2);
    return sign_ * F;
  }

  // Derivative of compute_at(alpha) with respect to a_alpha for |alpha| > 0: depends on order 0 only.
  Eigen::MatrixXcd linearized(const Eigen::MatrixXcd& d) const {
    const Eigen::MatrixXcd& A = a_[0];
    const Eigen::MatrixXcd& I = inter_[0];
    auto cv = [](const Eigen::RowVectorXcd& x, const Eigen::RowVectorXcd& y) -> Eigen::RowVectorXcd {
      return fourier_convolve(x.transpose(), y.transpose()).transpose();
    };
    Eigen::MatrixXcd dcb(3, len_);
    for (int i = 0; i < 3; ++i) {
      const Eigen::RowVectorXcd dsq = 2.0 * cv(A.row(6 + i), d.row(6 + i));
      dcb.row(i) = cv(dsq, A.row(6 + i)) + cv(I.row(i), d.row(6 + i));
    }
    Eigen::MatrixXcd F(kDim, len_);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(3, len_);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 3; ++i) {
        const Eigen::RowVectorXcd dp = cv(d.row(2 * c), I.row(3 + i)) + cv(A.row(2 * c), dcb.row(i));
        acc.row(c) += cfg_.m[i] * (primary_coord(cfg_, c, i) * dcb.row(i) - dp);
      }
    Eigen::MatrixXcd dq(3, len_);
    for (int c = 0; c < 3; ++c) dq.row(c) = cv(d.row(2 * c), A.row(2 * c + 1)) + cv(A.row(2 * c), d.row(2 * c + 1));
    for (int i = 0; i < 3; ++i) {
      Eigen::RowVectorXcd ddv = Eigen::RowVectorXcd::Zero(len_);
      for (int c = 0; c < 3; ++c) ddv += primary_coord(cfg_, c, i) * d.row(2 * c + 1) - dq.row(c);
      F.row(6 + i) = cv(ddv, I.row(3 + i)) + cv(I.row(18 + i), dcb.row(i));
    }
    F.row(0) = d.row(1);
    F.row(1) = 2.0 * d.row(3) + d.row(0) + acc.row(0);
    F.row(2) = d.row(3);
    F.row(3) = -2.0 * d.row(1) + d.row(2) + acc.row(1);
    F.row(4) = d.row(5);
    F.row(5) = acc.row(2);
    return sign_ * F;
  }

  // Dense matrix of `linearized` in the layout component * (2K-1) + (k + K - 1).
  Eigen::MatrixXcd linearized_matrix() const {
    const int n = kDim * len_;
    Eigen::MatrixXcd M(n, n);
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(kDim, len_);
    for (int i = 0; i < kDim; ++i)
      for (int k = 0; k < len_; ++k) {
        e(i, k) = 1.0;
        const Eigen::MatrixXcd col = linearized(e);
        e(i, k) = 0.0;
        for (int r = 0; r < kDim; ++r) M.block(r * len_, i * len_ + k, len_, 1) = col.row(r).transpose();
      }
    return M;
  }

 private:
  int order_, modes_, len_;
  const MassConfig& cfg_;
  double sign_;
  std::vector<Eigen::MatrixXcd> a_;
  std::vector<Eigen::MatrixXcd> inter_;
};

Eigen::VectorXcd fourier_phases(int modes, double omega, double theta) {
  Eigen::VectorXcd e(2 * modes - 1);
  for (int k = -(modes - 1); k < modes; ++k) e(k + modes - 1) = std::polar(1.0, omega * k * theta);
  return e;
}

cd ipow(cd z, int n) {
  cd r = 1.0;
  for (int j = 0; j < n; ++j) r *= z;
  return r;
}

Eigen::MatrixXcd conjugate_mirror(const Eigen::MatrixXcd& m) { return m.rowwise().reverse().conjugate(); }

}  // namespace

std::pair<int, int> taylor_multi_index(int index) {
  int n = 0;
  while ((n + 1) * (n + 2) / 2 <= index) ++n;
  const int a2 = index - n * (n + 1) / 2;
  return {n - a2, a2};
}

FTSeries::FTSeries(int order_, int modes_)
    : order(order_), modes(modes_), c(taylor_count(order_), Eigen::VectorXcd::Zero(2 * modes_ - 1)) {}

cd FTSeries::evaluate(double omega, double theta, cd z1, cd z2) const {
  const Eigen::VectorXcd e = fourier_phases(modes, omega, theta);
  cd sum = 0.0;
  for (int j = 0; j < static_cast<int>(c.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    sum += (c[j].transpose() * e).value() * ipow(z1, a1) * ipow(z2, a2);
  }
  return sum;
}

Eigen::VectorXcd fourier_convolve(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const int len = static_cast<int>(a.size());
  const int K = (len + 1) / 2;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(len);
  for (int k = -(K - 1); k < K; ++k) {
    const int lo = std::max(-(K - 1), k - (K - 1)), hi = std::min(K - 1, k + K - 1);
    cd s = 0.0;
    for (int k1 = lo; k1 <= hi; ++k1) s += a(k1 + K - 1) * b(k - k1 + K - 1);
    c(k + K - 1) = s;
  }
  return c;
}

FTSeries ft_convolve(const FTSeries& a, const FTSeries& b) {
  if (a.order != b.order || a.modes != b.modes) throw Error("ft_convolve: truncations differ");
  FTSeries out(a.order, a.modes);
  for (int j = 0; j < static_cast<int>(out.c.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    for (int b1 = 0; b1 <= a1; ++b1)
      for (int b2 = 0; b2 <= a2; ++b2)
        out.c[j] += fourier_convolve(a.c[taylor_index(b1, b2)], b.c[taylor_index(a1 - b1, a2 - b2)]);
  }
  return out;
}

const char* to_string(Stability s) { return s == Stability::Stable ? "stable" : "unstable"; }

std::vector<Resonance> resonance_check(cd lambda1, cd lambda2, const std::vector<cd>& exponents, int order,
                                       double tol) {
  std::vector<Resonance> out;
  for (int n = 2; n <= order; ++n)
    for (int a2 = 0; a2 <= n; ++a2) {
      const int a1 = n - a2;
      const cd s = static_cast<double>(a1) * lambda1 + static_cast<double>(a2) * lambda2;
      for (const cd& l : exponents)
        if (std::abs(s - l) <= tol) out.push_back({a1, a2, l, std::abs(s - l)});
    }
  return out;
}

FTSeries FourierTaylor::component(int i) const {
  FTSeries s(order, modes);
  for (int j = 0; j < static_cast<int>(coefficients.size()); ++j) s.c[j] = coefficients[j].row(i).transpose();
  return s;
}

double FourierTaylor::period() const { return 2.0 * std::numbers::pi / omega; }

Eigen::VectorXcd FourierTaylor::evaluate_complex(double theta, cd z1, cd z2) const {
  const Eigen::VectorXcd e = fourier_phases(modes, omega, theta);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(kDim);
  for (int j = 0; j < static_cast<int>(coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    out += (coefficients[j] * e) * (ipow(z1, a1) * ipow(z2, a2));
  }
  return out;
}

Eigen::VectorXcd FourierTaylor::theta_derivative(double theta, cd z1, cd z2) const {
  Eigen::VectorXcd e = fourier_phases(modes, omega, theta);
  for (int k = -(modes - 1); k < modes; ++k) e(k + modes - 1) *= cd(0.0, omega * k);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(kDim);
  for (int j = 0; j < static_cast<int>(coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    out += (coefficients[j] * e) * (ipow(z1, a1) * ipow(z2, a2));
  }
  return out;
}

Eigen::VectorXcd FourierTaylor::angle_derivative(double theta, cd z1, cd z2) const {
  const Eigen::VectorXcd e = fourier_phases(modes, omega, theta);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(kDim);
  for (int j = 0; j < static_cast<int>(coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    out += (coefficients[j] * e) * (cd(0.0, a1 - a2) * ipow(z1, a1) * ipow(z2, a2));
  }
  return out;
}

long FourierTaylor::coefficient_slots() const {
  return static_cast<long>(kDim) * static_cast<long>(coefficients.size()) * (2L * modes - 1);
}

double FourierTaylor::top_order_norm() const {
  double m = 0.0;
  for (int a2 = 0; a2 <= order; ++a2) m = std::max(m, at(order - a2, a2).cwiseAbs().maxCoeff());
  return m;
}

double FourierTaylor::symmetry_defect() const {
  double d = 0.0;
  for (int j = 0; j < static_cast<int>(coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    d = std::max(d, (coefficients[j] - conjugate_mirror(at(a2, a1))).cwiseAbs().maxCoeff());
  }
  return d;
}

FourierTaylor solve_homological(const FourierSeries& orbit, const FourierSeries& bundle1,
                                const FourierSeries& bundle2, cd lambda1, cd lambda2, double energy,
                                Stability stability, const MassConfig& cfg, const ManifoldOptions& opt) {
  const int K = opt.modes, N = opt.order, len = 2 * K - 1;
  if (orbit.modes() != K || bundle1.modes() != K || bundle2.modes() != K)
    throw Error("solve_homological: orbit and bundles must have " + std::to_string(K) + " modes");
  if (orbit.dim() != kDim || bundle1.dim() != kDim || bundle2.dim() != kDim)
    throw Error("solve_homological: lifted nine-component series required");
  const double omega = orbit.omega();

  FieldAlgebra alg(N, K, cfg, opt.reverse_time ? -1.0 : 1.0);
  alg.coeff(taylor_index(0, 0)) = orbit.coefficients();
  alg.compute_at(0, 0);
  if (N >= 1) {
    alg.coeff(taylor_index(1, 0)) = bundle1.coefficients();
    alg.coeff(taylor_index(0, 1)) = bundle2.coefficients();
    alg.compute_at(1, 0);
    alg.compute_at(0, 1);
  }

  const Eigen::MatrixXcd DF = N >= 2 ? alg.linearized_matrix() : Eigen::MatrixXcd();
  for (int n = 2; n <= N; ++n) {
    for (int a2 = 0; a2 <= n; ++a2) {
      const int a1 = n - a2;
      if (opt.symmetry_reduced && a1 < a2) continue;
      const Eigen::MatrixXcd rhs = alg.compute_at(a1, a2);  // a_alpha is still zero here
      Eigen::MatrixXcd M = -DF;
      const cd shift = static_cast<double>(a1) * lambda1 + static_cast<double>(a2) * lambda2;
      for (int i = 0; i < kDim; ++i)
        for (int k = -(K - 1); k < K; ++k) M(i * len + k + K - 1, i * len + k + K - 1) += cd(0.0, omega * k) + shift;
      Eigen::VectorXcd b(kDim * len);
      for (int i = 0; i < kDim; ++i) b.segment(i * len, len) = rhs.row(i).transpose();
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
      if (!(lu.rcond() > 1e-14))
        throw ResonanceError("singular homological system at alpha = (" + std::to_string(a1) + ", " +
                                 std::to_string(a2) + ")",
                             a1, a2);
      const Eigen::VectorXcd x = lu.solve(b);
      Eigen::MatrixXcd& A = alg.coeff(taylor_index(a1, a2));
      for (int i = 0; i < kDim; ++i) A.row(i) = x.segment(i * len, len).transpose();
      alg.compute_at(a1, a2);
      if (opt.symmetry_reduced && a1 > a2) {
        alg.coeff(taylor_index(a2, a1)) = conjugate_mirror(A);
        alg.compute_at(a2, a1);
      }
    }
  }

  FourierTaylor P;
  P.order = N;
  P.modes = K;
  P.omega = omega;
  P.energy = energy;
  P.scale = opt.scale;
  P.lambda1 = lambda1;
  P.lambda2 = lambda2;
  P.stability = stability;
  P.coefficients = alg.coefficients();
  return P;
}

FourierTaylor solve_homological(const PeriodicOrbit& orbit, Stability stability, const MassConfig& cfg,
                                const ManifoldOptions& opt) {
  const PeriodicOrbit base =
      orbit.modes() == opt.modes ? orbit : refine_orbit(orbit.state.resized(opt.modes), orbit.energy, cfg, opt.modes);
  const FloquetData fd = base.floquet ? *base.floquet : floquet(base, cfg);
  const cd lambda = stability == Stability::Stable ? fd.leading_stable() : fd.leading_unstable();
  if ((stability == Stability::Stable) != (lambda.real() < 0.0)) throw Error("orbit has no such hyperbolic pair");
  const cd mu = std::exp(lambda * base.period());
  if (std::abs(mu.imag()) <= 1e-10 * std::abs(mu))
    throw Error("real Floquet multipliers: no saddle-focus pair for a three-dimensional manifold");

  const auto res = resonance_check(lambda, std::conj(lambda), fd.lifted_exponents(),
                                   opt.tail_target > 0.0 ? opt.max_order : opt.order);
  if (!res.empty())
    throw ResonanceError("resonant exponent combination at alpha = (" + std::to_string(res[0].a1) + ", " +
                             std::to_string(res[0].a2) + ")",
                         res[0].a1, res[0].a2);

  BundleOptions bo;
  bo.scale = opt.scale;
  const Bundle b = bundle_solve(base, lambda, cfg, opt.modes, bo);
  if (b.antiperiodic) throw Error("antiperiodic bundle for a complex exponent");
  FourierSeries b2(conjugate_mirror(b.series.coefficients()), b.series.omega());
  ManifoldOptions o = opt;
  for (;;) {
    FourierTaylor P =
        solve_homological(base.state, b.series, b2, lambda, std::conj(lambda), base.energy, stability, cfg, o);
    if (!(opt.tail_target > 0.0) || P.top_order_norm() < opt.tail_target || o.order >= opt.max_order) return P;
    ++o.order;
  }
}

std::vector<double> homological_residuals(const FourierTaylor& P, const MassConfig& cfg, bool reverse_time) {
  const int K = P.modes;
  FieldAlgebra alg(P.order, K, cfg, reverse_time ? -1.0 : 1.0);
  for (int j = 0; j < static_cast<int>(P.coefficients.size()); ++j) alg.coeff(j) = P.coefficients[j];
  std::vector<double> out(P.coefficients.size());
  for (int j = 0; j < static_cast<int>(P.coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    Eigen::MatrixXcd r = -alg.compute_at(a1, a2);
    const cd shift = static_cast<double>(a1) * P.lambda1 + static_cast<double>(a2) * P.lambda2;
    for (int k = -(K - 1); k < K; ++k) r.col(k + K - 1) += (cd(0.0, P.omega * k) + shift) * P.coefficients[j].col(k + K - 1);
    out[j] = r.cwiseAbs().maxCoeff();
  }
  return out;
}

State9 eval_real(const FourierTaylor& P, double theta, double s1, double s2) {
  const Eigen::VectorXcd v = P.evaluate_complex(theta, cd(s1, s2), cd(s1, -s2));
  const double residue = v.imag().cwiseAbs().maxCoeff();
  if (residue > 1e-10) throw SymmetryError("imaginary residue " + std::to_string(residue) + " in real evaluation");
  return v.real();
}

TorusPoint torus_point(const FourierTaylor& P, double theta, double angle, double radius) {
  TorusPoint p{theta, angle, radius, State6::Zero()};
  p.state = project(eval_real(P, theta, radius * std::cos(angle), radius * std::sin(angle)));
  return p;
}

std::vector<TorusPoint> sample_torus(const FourierTaylor& P, int n_theta, int n_angle, double radius) {
  std::vector<TorusPoint> out;
  out.reserve(static_cast<std::size_t>(n_theta) * n_angle);
  for (int i = 0; i < n_theta; ++i)
    for (int j = 0; j < n_angle; ++j)
      out.push_back(torus_point(P, P.period() * i / n_theta, 2.0 * std::numbers::pi * j / n_angle, radius));
  return out;
}

TorusPoint closest_torus_point(const FourierTaylor& P, const State6& u, double radius) {
  const int nt = 64, na = 32;
  TorusPoint best;
  double dbest = 1e300;
  for (const auto& p : sample_torus(P, nt, na, radius)) {
    const double d = (p.state - u).norm();
    if (d < dbest) dbest = d, best = p;
  }
  // Levenberg-Marquardt polish in (theta, angle).
  double th = best.theta, an = best.angle, lm = 1e-3;
  for (int it = 0; it < 100; ++it) {
    const cd z = std::polar(radius, an);
    const Eigen::VectorXd r = project(State9(P.evaluate_complex(th, z, std::conj(z)).real())) - u;
    Eigen::Matrix<double, 6, 2> J;
    J.col(0) = project(State9(P.theta_derivative(th, z, std::conj(z)).real()));
    J.col(1) = project(State9(P.angle_derivative(th, z, std::conj(z)).real()));
    Eigen::Matrix2d H = J.transpose() * J;
    const Eigen::Vector2d g = J.transpose() * r;
    H.diagonal() *= 1.0 + lm;
    const Eigen::Vector2d step = -H.ldlt().solve(g);
    const TorusPoint trial = torus_point(P, th + step[0], an + step[1], radius);
    const double dt = (trial.state - u).norm();
    if (dt < r.norm()) {
      th += step[0];
      an += step[1];
      lm *= 0.3;
      if (step.norm() < 1e-15 * (1.0 + std::abs(th) + std::abs(an))) break;
    } else {
      lm *= 10.0;
      if (lm > 1e12) break;
    }
  }
  th = std::fmod(th, P.period());
  if (th < 0) th += P.period();
  an = std::fmod(an, 2.0 * std::numbers::pi);
  if (an < 0) an += 2.0 * std::numbers::pi;
  return torus_point(P, th, an, radius);
}

FourierTaylor rotate_manifold(const FourierTaylor& P, int turns) {
  Mat9 R;
  for (int j = 0; j < 9; ++j) R.col(j) = rotate_state(State9(State9::Unit(j)), turns);
  FourierTaylor out = P;
  for (auto& c : out.coefficients) c = R.cast<cd>() * c;
  return out;
}

double conjugacy_error(const FourierTaylor& P, double theta0, double s1, double s2, double t, const MassConfig& cfg,
                       double tol) {
  if (P.stability == Stability::Stable && t < 0.0) throw Error("stable manifold conjugacy needs t >= 0");
  if (P.stability == Stability::Unstable && t > 0.0) throw Error("unstable manifold conjugacy needs t <= 0");
  const State9 start = eval_real(P, theta0, s1, s2);
  const State9 lhs = flow(start, t, cfg, tol);
  const cd z = std::exp(P.lambda1 * t) * cd(s1, s2);
  const State9 rhs = eval_real(P, theta0 + t, z.real(), z.imag());
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace crfbp
