#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "crfbp/errors.hpp"
#include "crfbp/io.hpp"
#include "crfbp/manifolds.hpp"

using namespace crfbp;

namespace {

const MassConfig kCfg = primary_positions(0.4, 0.35, 0.25);

const PeriodicOrbit& l0_orbit() {
  static const PeriodicOrbit orbit = [] {
    State6 u;
    u << 0.134934339930888, 0.003888013139251, 0.117443350170703, 0.000936082833871, 0.216240831347475,
        0.101389225000425;
    return vertical_orbit(libration_point(find_libration_points(kCfg), 0), jacobi(u, kCfg), kCfg, 50);
  }();
  return orbit;
}

const FourierTaylor& stable_manifold() {
  static const FourierTaylor P = solve_homological(l0_orbit(), Stability::Stable, kCfg);
  return P;
}

FTSeries random_series(std::mt19937& rng, int order, int modes, int max_degree, int max_mode) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  FTSeries s(order, modes);
  for (int j = 0; j < static_cast<int>(s.c.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    if (a1 + a2 > max_degree) continue;
    for (int k = -max_mode; k <= max_mode; ++k) s.at(a1, a2, k) = cd(U(rng), U(rng));
  }
  return s;
}

FTSeries axpy(double a, const FTSeries& x, const FTSeries& y) {
  FTSeries out = y;
  for (std::size_t j = 0; j < out.c.size(); ++j) out.c[j] += a * x.c[j];
  return out;
}

FTSeries constant(double v, int order, int modes) {
  FTSeries s(order, modes);
  s.at(0, 0, 0) = v;
  return s;
}

// Field of the lifted system written with ft_convolve, nested differently from the solver.
std::vector<FTSeries> field_of(const FourierTaylor& P, const MassConfig& cfg) {
  const int N = P.order, K = P.modes;
  std::vector<FTSeries> u(9);
  for (int i = 0; i < 9; ++i) u[i] = P.component(i);
  std::vector<FTSeries> f(9, FTSeries(N, K));
  f[0] = u[1];
  f[2] = u[3];
  f[4] = u[5];
  f[1] = axpy(2.0, u[3], u[0]);
  f[3] = axpy(-2.0, u[1], u[2]);
  f[5] = FTSeries(N, K);
  const std::array<double, 3>* pos[3] = {&cfg.x, &cfg.y, &cfg.z};
  for (int i = 0; i < 3; ++i) {
    const FTSeries w3 = ft_convolve(u[6 + i], ft_convolve(u[6 + i], u[6 + i]));
    FTSeries dv(N, K);
    for (int c = 0; c < 3; ++c) {
      const FTSeries d = axpy(-1.0, u[2 * c], constant((*pos[c])[i], N, K));
      const FTSeries acc = ft_convolve(d, w3);
      f[2 * c + 1] = axpy(cfg.m[i], acc, f[2 * c + 1]);
      dv = axpy(1.0, ft_convolve(d, u[2 * c + 1]), dv);
    }
    f[6 + i] = ft_convolve(dv, w3);
  }
  return f;
}

}  // namespace

TEST_CASE("ft_convolve: identity and monomial square") {
  std::mt19937 rng(7);
  const FTSeries a = random_series(rng, 3, 8, 3, 7);
  const FTSeries c = ft_convolve(a, constant(1.0, 3, 8));
  for (std::size_t j = 0; j < a.c.size(); ++j) CHECK((c.c[j] - a.c[j]).cwiseAbs().maxCoeff() == 0.0);

  FTSeries m(3, 8);
  m.at(1, 0, 1) = 1.0;
  const FTSeries sq = ft_convolve(m, m);
  for (int j = 0; j < static_cast<int>(sq.c.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    for (int k = -7; k <= 7; ++k) CHECK(sq.at(a1, a2, k) == (a1 == 2 && a2 == 0 && k == 2 ? cd(1.0) : cd(0.0)));
  }
}

TEST_CASE("ft_convolve: pointwise evaluation oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  // Degrees chosen so the product fits in (N, K) = (3, 8) without truncation.
  const FTSeries a = random_series(rng, 3, 8, 1, 3);
  const FTSeries b = random_series(rng, 3, 8, 2, 4);
  const FTSeries c = ft_convolve(a, b);
  const double omega = 1.7;
  for (int n = 0; n < 25; ++n) {
    const double th = 4.0 * U(rng);
    const cd z1(U(rng), U(rng)), z2(U(rng), U(rng));
    const cd lhs = c.evaluate(omega, th, z1, z2), rhs = a.evaluate(omega, th, z1, z2) * b.evaluate(omega, th, z1, z2);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("resonance_check") {
  const cd lam(-1.24, 0.83);
  const std::vector<cd> ex = {lam, std::conj(lam), -lam, -std::conj(lam), cd(0, 0.7), cd(0, -0.7), 0.0, 0.0};
  CHECK(resonance_check(lam, std::conj(lam), ex, 12).empty());

  const auto r = resonance_check(1.0, 2.0, {1.0, 2.0}, 4);
  bool found = false;
  for (const auto& x : r) found |= x.a1 == 2 && x.a2 == 0 && x.exponent == cd(2.0);
  CHECK(found);

  CHECK(resonance_check(cd(1, 1), cd(1, -1), {cd(1, 1), cd(1, -1)}, 10).empty());
}

TEST_CASE("homological solve: low orders, size and residuals") {
  const FourierTaylor& P = stable_manifold();
  CHECK(P.order == 5);
  CHECK(P.modes == 20);
  CHECK(P.coefficient_slots() == 7371);
  CHECK(P.lambda1.real() < 0.0);
  CHECK(P.lambda2 == std::conj(P.lambda1));

  const PeriodicOrbit base = refine_orbit(l0_orbit().state.resized(20), l0_orbit().energy, kCfg, 20);
  CHECK((P.at(0, 0) - base.state.coefficients()).cwiseAbs().maxCoeff() == 0.0);
  const Bundle b = bundle_solve(base, P.lambda1, kCfg, 20);
  CHECK((P.at(1, 0) - b.series.coefficients()).cwiseAbs().maxCoeff() == 0.0);
  double low = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int k = -4; k <= 4; ++k) low += std::norm(P.at(1, 0)(i, k + 19));
  CHECK(std::sqrt(low) == doctest::Approx(0.1).epsilon(1e-12));

  const auto res = homological_residuals(P, kCfg);
  for (int j = 3; j < static_cast<int>(res.size()); ++j) CHECK(res[j] <= 1e-10);
  CHECK(P.symmetry_defect() <= 1e-13);
}

TEST_CASE("homological solve: symmetry-reduced equals full") {
  ManifoldOptions full;
  full.symmetry_reduced = false;
  const FourierTaylor F = solve_homological(l0_orbit(), Stability::Stable, kCfg, full);
  const FourierTaylor& R = stable_manifold();
  for (std::size_t j = 0; j < R.coefficients.size(); ++j)
    CHECK((F.coefficients[j] - R.coefficients[j]).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(F.symmetry_defect() <= 1e-13);
}

TEST_CASE("homological solve: decay certificate at the default order") {
  // Top-order coefficients must be below 1e-10 for the chosen scale.
  CHECK(stable_manifold().top_order_norm() <= 1e-10);
}

TEST_CASE("homological solve: tail-based order selection reaches the certificate") {
  ManifoldOptions opt;
  opt.tail_target = 1e-10;
  const FourierTaylor P = solve_homological(l0_orbit(), Stability::Stable, kCfg, opt);
  CHECK(P.top_order_norm() < 1e-10);
  CHECK(P.order > 5);
  const auto res = homological_residuals(P, kCfg);
  for (int j = 3; j < static_cast<int>(res.size()); ++j) CHECK(res[j] <= 1e-10);
}

TEST_CASE("homological solve: exact resonance is reported") {
  const FourierTaylor& P = stable_manifold();
  const FourierSeries orbit(P.at(0, 0), P.omega);
  ManifoldOptions opt;
  opt.order = 2;
  // <alpha, Lambda> = 0 hits the zero exponent of the time-shift direction at k = 0.
  bool thrown = false;
  try {
    solve_homological(orbit, FourierSeries(P.at(1, 0), P.omega), FourierSeries(P.at(0, 1), P.omega), 0.0, 0.0,
                      P.energy, Stability::Stable, kCfg, opt);
  } catch (const ResonanceError& e) {
    thrown = true;
    CHECK(e.alpha1() + e.alpha2() == 2);
  }
  CHECK(thrown);
}

TEST_CASE("re-substitution into the invariance equation") {
  const FourierTaylor& P = stable_manifold();
  const auto F = field_of(P, kCfg);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const double th = P.period() * U(rng);
    const cd z = std::polar(std::sqrt(U(rng)), 2.0 * std::numbers::pi * U(rng));
    Eigen::VectorXcd lhs = P.theta_derivative(th, z, std::conj(z));
    // sum_alpha <alpha, lambda> A_alpha(theta) sigma^alpha
    for (int j = 0; j < static_cast<int>(P.coefficients.size()); ++j) {
      const auto [a1, a2] = taylor_multi_index(j);
      FourierTaylor single = P;
      for (auto& c : single.coefficients) c.setZero();
      single.coefficients[j] = P.coefficients[j];
      lhs += (static_cast<double>(a1) * P.lambda1 + static_cast<double>(a2) * P.lambda2) *
             single.evaluate_complex(th, z, std::conj(z));
    }
    for (int i = 0; i < 9; ++i) worst = std::max(worst, std::abs(lhs(i) - F[i].evaluate(P.omega, th, z, std::conj(z))));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("scale covariance") {
  const FourierTaylor& P = stable_manifold();
  const double c = 0.5;
  ManifoldOptions opt;
  const FourierTaylor Q =
      solve_homological(FourierSeries(P.at(0, 0), P.omega), FourierSeries(c * P.at(1, 0), P.omega),
                        FourierSeries(c * P.at(0, 1), P.omega), P.lambda1, P.lambda2, P.energy, P.stability, kCfg, opt);
  for (int j = 0; j < static_cast<int>(P.coefficients.size()); ++j) {
    const auto [a1, a2] = taylor_multi_index(j);
    CHECK((Q.coefficients[j] - std::pow(c, a1 + a2) * P.coefficients[j]).cwiseAbs().maxCoeff() <= 1e-11);
  }
}

TEST_CASE("stable and unstable duality under time reversal") {
  const FourierTaylor& P = stable_manifold();
  auto flip = [](const Eigen::MatrixXcd& m) -> Eigen::MatrixXcd { return m.rowwise().reverse(); };
  ManifoldOptions opt;
  opt.reverse_time = true;
  const FourierTaylor U =
      solve_homological(FourierSeries(flip(P.at(0, 0)), P.omega), FourierSeries(flip(P.at(1, 0)), P.omega),
                        FourierSeries(flip(P.at(0, 1)), P.omega), -P.lambda1, -P.lambda2, P.energy,
                        Stability::Unstable, kCfg, opt);
  for (double r : homological_residuals(U, kCfg, true)) CHECK(r <= 1e-10);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double th = P.period() * i / 10, an = 2.0 * std::numbers::pi * j / 10;
      worst = std::max(worst, (eval_real(U, th, std::cos(an), std::sin(an)) -
                               eval_real(P, -th, std::cos(an), std::sin(an)))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  CHECK(worst <= 1e-10);
}

TEST_CASE("eval_real: orbit, realness, energy") {
  const FourierTaylor& P = stable_manifold();
  const FourierSeries orbit(P.at(0, 0), P.omega);
  for (int i = 0; i < 8; ++i) {
    const double th = P.period() * i / 8;
    CHECK((eval_real(P, th, 0.0, 0.0) - orbit.evaluate(th)).cwiseAbs().maxCoeff() <= 1e-14);
    const cd z = std::polar(0.9, 0.7 * i);
    CHECK(P.evaluate_complex(th, z, std::conj(z)).imag().cwiseAbs().maxCoeff() <= 1e-12);
  }
  double dJ = 0.0;
  for (const auto& p : sample_torus(P, 20, 20)) dJ = std::max(dJ, std::abs(jacobi(p.state, kCfg) - P.energy));
  CHECK(dJ <= 1e-6);

  FourierTaylor broken = P;
  broken.at(1, 0)(0, 19) += cd(0.0, 1e-6);
  CHECK_THROWS_AS(eval_real(broken, 0.0, 1.0, 0.0), SymmetryError);
}

TEST_CASE("torus derivatives and closest point") {
  const FourierTaylor& P = stable_manifold();
  const double th = 0.8, an = 2.1, h = 1e-6;
  auto ev = [&](double t, double a) { return eval_real(P, t, std::cos(a), std::sin(a)); };
  const cd z = std::polar(1.0, an);
  const Eigen::VectorXd dth = (ev(th + h, an) - ev(th - h, an)) / (2 * h);
  const Eigen::VectorXd dan = (ev(th, an + h) - ev(th, an - h)) / (2 * h);
  CHECK((P.theta_derivative(th, z, std::conj(z)).real() - dth).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((P.angle_derivative(th, z, std::conj(z)).real() - dan).cwiseAbs().maxCoeff() <= 1e-8);

  const TorusPoint target = torus_point(P, 1.234, 4.321);
  const TorusPoint found = closest_torus_point(P, target.state);
  CHECK((found.state - target.state).norm() <= 1e-12);
  CHECK(found.theta == doctest::Approx(1.234).epsilon(1e-9));
  CHECK(found.angle == doctest::Approx(4.321).epsilon(1e-9));
}

TEST_CASE("conjugacy error ladder on 100 boundary points") {
  const FourierTaylor& P = stable_manifold();
  auto max_error = [&](double t) {
    double m = 0.0;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const double an = 2.0 * std::numbers::pi * j / 10;
        m = std::max(m, conjugacy_error(P, P.period() * i / 10, std::cos(an), std::sin(an), t, kCfg));
      }
    return m;
  };
  CHECK(max_error(1e-10) <= 5e-10);
  CHECK(max_error(1e-2) <= 5e-7);

  double prev = 0.0;
  for (double t : {1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1}) {
    const double e = max_error(t);
    CHECK(e * 10.0 >= prev);
    prev = e;
  }
  CHECK_THROWS(conjugacy_error(P, 0.0, 1.0, 0.0, -0.1, kCfg));
}

TEST_CASE("conjugacy error with zero sigma is orbit closure") {
  const FourierTaylor& P = stable_manifold();
  for (double t : {0.1, 0.5, 1.0}) CHECK(conjugacy_error(P, 0.3, 0.0, 0.0, t, kCfg) <= 1e-9);
}

TEST_CASE("manifold JSON round trip is bit exact") {
  const FourierTaylor& P = stable_manifold();
  const json j = to_json(P);
  const FourierTaylor Q = manifold_from_json(json::parse(j.dump()));
  CHECK(Q.order == P.order);
  CHECK(Q.stability == P.stability);
  CHECK(Q.lambda1 == P.lambda1);
  for (std::size_t k = 0; k < P.coefficients.size(); ++k)
    CHECK((Q.coefficients[k].array() == P.coefficients[k].array()).all());
  CHECK(to_json(Q).dump() == j.dump());
}
