#include <doctest.h>

#include <cmath>
#include <numbers>

#include "crfbp/errors.hpp"
#include "crfbp/io.hpp"
#include "crfbp/orbits.hpp"

using namespace crfbp;

namespace {

const MassConfig kEqual = primary_positions(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
const MassConfig kTable1 = primary_positions(0.4, 0.35, 0.25);

State6 l0_anchor() {
  State6 u;
  u << 0.134934339930888, 0.003888013139251, 0.117443350170703, 0.000936082833871, 0.216240831347475,
      0.101389225000425;
  return u;
}

State6 l5_anchor() {
  State6 u;
  u << 0.919523300342616, -0.018021865086785, -0.005720721776858, 0.001586045655911, 0.140748196680255,
      0.142288965593486;
  return u;
}

const PeriodicOrbit& l0_orbit() {
  static const PeriodicOrbit orbit = [] {
    const auto pts = find_libration_points(kTable1);
    return vertical_orbit(libration_point(pts, 0), jacobi(l0_anchor(), kTable1), kTable1, 50);
  }();
  return orbit;
}

const PeriodicOrbit& l5_orbit() {
  static const PeriodicOrbit orbit = [] {
    const auto pts = find_libration_points(kEqual);
    return vertical_orbit(libration_point(pts, 5), jacobi(l5_anchor(), kEqual), kEqual, 50);
  }();
  return orbit;
}

double z_amplitude(const PeriodicOrbit& o) {
  double z = 0.0;
  for (int j = 0; j < 256; ++j) z = std::max(z, std::abs(o.at(o.period() * j / 256)[4]));
  return z;
}

}  // namespace

TEST_CASE("vertical seed: zero amplitude is the lifted equilibrium") {
  const auto pts = find_libration_points(kEqual);
  const auto& lp = libration_point(pts, 0);
  const FourierSeries s = vertical_seed(lp, 0.0, kEqual, 10);
  const State9 v = lift(lp.state(), kEqual);
  for (int k = -9; k <= 9; ++k)
    for (int i = 0; i < 9; ++i) CHECK(std::abs(s.at(i, k) - (k == 0 ? cd(v[i]) : cd(0.0))) <= 1e-14);
  CHECK(s.omega() == doctest::Approx(lp.omega_z));
}

TEST_CASE("vertical seed: L0 equal masses converges quickly") {
  const auto pts = find_libration_points(kEqual);
  const FourierSeries seed = vertical_seed(libration_point(pts, 0), 1e-2, kEqual, 50);
  const PeriodicOrbit o = refine_orbit(seed, jacobi9(seed.evaluate(0.0), kEqual), kEqual, 50);
  CHECK(o.iterations <= 10);
  CHECK(o.residual <= 1e-11);
}

TEST_CASE("vertical seed: L5 orbit stays tangent to the vertical direction") {
  const auto pts = find_libration_points(kEqual);
  const FourierSeries seed = vertical_seed(libration_point(pts, 5), 1e-2, kEqual, 50);
  const PeriodicOrbit o = refine_orbit(seed, jacobi9(seed.evaluate(0.0), kEqual), kEqual, 50);
  CHECK(std::abs(z_amplitude(o) - 1e-2) <= 0.2e-2);
}

TEST_CASE("refine: high-precision anchors") {
  {
    const auto& o = l0_orbit();
    CHECK(std::abs(o.period() - 2.998307362412966) <= 1e-9);
    CHECK(align_phase(o.state, l0_anchor()).second <= 1e-9);
  }
  {
    const auto& o = l5_orbit();
    CHECK(std::abs(o.period() - 5.485186773053060) <= 1e-9);
    CHECK(align_phase(o.state, l5_anchor()).second <= 1e-9);
  }
}

TEST_CASE("refine: converged orbit invariants") {
  for (const auto* o : {&l0_orbit(), &l5_orbit()}) {
    const MassConfig& cfg = o == &l0_orbit() ? kTable1 : kEqual;
    CHECK(o->residual <= 1e-11);
    CHECK(galerkin_residual(o->state, cfg) <= 1e-11);
    CHECK(o->state.symmetry_defect() <= 1e-13);
    CHECK(o->state.tail_norm() <= 1e-12);
    CHECK(energy_variation(*o, cfg) <= 1e-10);
    CHECK(std::abs(jacobi(o->at6(0.0), cfg) - o->energy) <= 1e-11);
    for (double u : o->unfolding) CHECK(std::abs(u) <= 1e-12);
    // Closure by periodicity of the representation and by integration.
    CHECK((o->at(0.0) - o->at(o->period())).norm() <= 1e-12);
    const State9 v0 = lift(o->at6(0.0), cfg);
    CHECK((flow(v0, o->period(), cfg) - v0).norm() <= 1e-9);
  }
}

TEST_CASE("refine: fixed point of Newton") {
  const auto& o = l0_orbit();
  const PeriodicOrbit again = refine_orbit(o.state, o.energy, kTable1, 50);
  CHECK((again.state.coefficients() - o.state.coefficients()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(again.period() - o.period()) <= 1e-12);
}

TEST_CASE("refine: divergence reports residual history") {
  const auto& o = l0_orbit();
  OrbitSolverOptions opt;
  opt.max_iterations = 1;
  bool thrown = false;
  try {
    refine_orbit(o.state, o.energy - 0.5, kTable1, 50, opt);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(!e.residual_history().empty());
  }
  CHECK(thrown);
}

TEST_CASE("continuation: zero steps and step bound") {
  const auto& o = l0_orbit();
  const FamilyResult f = continue_family(o, -0.05, 0, kTable1, 50);
  REQUIRE(f.members.size() == 1);
  CHECK(f.members[0].period() == o.period());
  CHECK_THROWS(continue_family(o, 0.2, 1, kTable1, 50));
}

TEST_CASE("continuation: members reproduce from adjacent coefficients") {
  const auto& o = l0_orbit();
  const FamilyResult f = continue_family(o, -0.05, 2, kTable1, 50);
  REQUIRE(f.members.size() == 3);
  CHECK(!f.truncated);
  for (std::size_t i = 1; i < f.members.size(); ++i) {
    const auto& prev = f.members[i - 1];
    const auto& cur = f.members[i];
    CHECK(std::abs(cur.energy - (o.energy - 0.05 * static_cast<double>(i))) <= 1e-12);
    const PeriodicOrbit again = refine_orbit(prev.state, cur.energy, kTable1, 50, {}, &prev.state);
    CHECK((again.state.coefficients() - cur.state.coefficients()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("floquet: symplectic pattern and lift zeros") {
  for (const auto* o : {&l0_orbit(), &l5_orbit()}) {
    const MassConfig& cfg = o == &l0_orbit() ? kTable1 : kEqual;
    const FloquetData fd = floquet(*o, cfg);
    CHECK(fd.n_unstable == 2);
    for (int i = 0; i < 6; ++i) {
      if (fd.trivial[i]) {
        CHECK(std::abs(fd.exponents[i]) <= 1e-6);
        continue;
      }
      double best = 1e300;
      for (int j = 0; j < 6; ++j) best = std::min(best, std::abs(fd.exponents[j] + fd.exponents[i]));
      CHECK(best <= 1e-8);
    }
    const auto lifted = fd.lifted_exponents();
    REQUIRE(lifted.size() == 9);
    for (int i = 6; i < 9; ++i) CHECK(std::abs(lifted[i]) == 0.0);
    // Lifted monodromy: three extra unit multipliers from the lift.
    const Mat9 M9 = transition_matrix9(o->at(0.0), o->period(), cfg);
    Eigen::EigenSolver<Mat9> es(M9);
    int unit = 0;
    for (int i = 0; i < 9; ++i) unit += std::abs(es.eigenvalues()[i] - 1.0) <= 1e-5;
    CHECK(unit == 5);
  }
}

TEST_CASE("floquet: L0 table rows 3.2 and 2.0") {
  State6 row20;
  row20 << 0.1108, -0.0339, 0.1004, -0.0068, 0.7468, 0.3387;
  const FamilyResult f = continue_to_energies(l0_orbit(), {jacobi(row20, kTable1)}, kTable1, 50);
  REQUIRE(f.members.size() == 1);
  CHECK(floquet(f.members[0], kTable1).n_unstable == 1);
  const FloquetData fd = floquet(l0_orbit(), kTable1);
  CHECK(fd.n_unstable == 2);
  CHECK(std::abs(fd.leading_unstable().imag()) > 0.1);
}

TEST_CASE("bundle: residual, normalization, conjugate pair, lift identity") {
  const auto& o = l5_orbit();
  const FloquetData fd = floquet(o, kEqual);
  const cd lam = fd.leading_unstable();
  const Bundle b = bundle_solve(o, lam, kEqual, 20);
  CHECK(!b.antiperiodic);
  CHECK(b.residual <= 1e-10);
  CHECK(std::abs(b.exponent - lam) <= 1e-8);
  double low = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int k = -4; k <= 4; ++k) low += std::norm(b.series.at(i, k));
  CHECK(std::sqrt(low) == doctest::Approx(0.1).epsilon(1e-12));

  const Bundle bc = bundle_solve(o, std::conj(lam), kEqual, 20);
  for (int j = 0; j < 16; ++j) {
    const double t = o.period() * j / 16;
    CHECK((bc.series.evaluate_complex(t) - b.series.evaluate_complex(t).conjugate()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Lifted bundle: components 7..9 are DR(gamma) applied to the first six, and the 6D
  // projection solves the 6D bundle equation.
  for (int j = 0; j < 16; ++j) {
    const double t = o.period() * j / 16;
    const State6 g = o.at6(t);
    const Eigen::VectorXcd v = b.series.evaluate_complex(t);
    const Eigen::VectorXcd xi = lift_jacobian(g, kEqual).cast<cd>() * v.head(6);
    CHECK((xi - v).cwiseAbs().maxCoeff() <= 1e-9);
    Eigen::VectorXcd dv = Eigen::VectorXcd::Zero(9);
    for (int k = -19; k <= 19; ++k)
      dv += cd(0.0, o.omega() * k) * b.series.coefficients().col(k + 19) * std::polar(1.0, o.omega() * k * t);
    const Eigen::VectorXcd r6 = -dv.head(6) + jacobian6(g, kEqual).cast<cd>() * v.head(6) - lam * v.head(6);
    CHECK(r6.cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("bundle: half-frequency shifted exponent gives an antiperiodic bundle") {
  const auto& o = l0_orbit();
  const FloquetData fd = floquet(o, kTable1);
  const cd lam = fd.leading_unstable() + cd(0.0, o.omega() / 2.0);
  const Bundle b = bundle_solve(o, lam, kTable1, 20);
  CHECK(b.antiperiodic);
  CHECK(b.residual <= 1e-10);
  const double T = o.period();
  CHECK((b.series.evaluate_complex(0.3) + b.series.evaluate_complex(0.3 + T)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rotation by 120 degrees maps L5 orbits to orbits") {
  const auto& o = l5_orbit();
  for (int turns : {1, -1}) {
    const FourierSeries r = rotate_series(o.state, turns);
    CHECK(galerkin_residual(r, kEqual) <= 1e-11);
  }
}

TEST_CASE("orbit JSON round trip is bit exact") {
  PeriodicOrbit o = l0_orbit();
  o.floquet = floquet(o, kTable1);
  o.bundles.push_back(bundle_solve(o, o.floquet->leading_unstable(), kTable1, 20));
  const json j = to_json(o, kTable1);
  const PeriodicOrbit back = orbit_from_json(json::parse(j.dump()));
  CHECK((back.state.coefficients().array() == o.state.coefficients().array()).all());
  CHECK(back.state.omega() == o.state.omega());
  CHECK(back.energy == o.energy);
  REQUIRE(back.bundles.size() == 1);
  CHECK((back.bundles[0].series.coefficients().array() == o.bundles[0].series.coefficients().array()).all());
  CHECK(back.floquet->exponents == o.floquet->exponents);
  CHECK(to_json(back, kTable1).dump() == j.dump());
}
