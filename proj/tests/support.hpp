#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crfbp/bvp.hpp"
#include "crfbp/errors.hpp"
#include "crfbp/io.hpp"
#include "crfbp/manifolds.hpp"
#include "crfbp/orbits.hpp"

namespace crfbp::testing {

inline std::string data_path(const std::string& name) { return std::string(CRFBP_DATA_DIR) + "/" + name; }

inline const MassConfig& l0_masses() {
  static const MassConfig cfg = primary_positions(0.4, 0.35, 0.25);
  return cfg;
}

inline const MassConfig& equal_masses() {
  static const MassConfig cfg = primary_positions(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  return cfg;
}

// Vertical orbit through the high-precision L0 initial condition (J = 3.2).
inline const PeriodicOrbit& l0_orbit() {
  static const PeriodicOrbit orbit = [] {
    const auto& cfg = l0_masses();
    State6 u;
    u << 0.134934339930888, 0.003888013139251, 0.117443350170703, 0.000936082833871, 0.216240831347475,
        0.101389225000425;
    return vertical_orbit(libration_point(find_libration_points(cfg), 0), jacobi(u, cfg), cfg, 50);
  }();
  return orbit;
}

inline const PeriodicOrbit& l5_orbit() {
  static const PeriodicOrbit orbit = [] {
    const auto& cfg = equal_masses();
    return vertical_orbit(libration_point(find_libration_points(cfg), 5), 2.9, cfg, 50);
  }();
  return orbit;
}

// Manifolds for connection work: order raised until the top-order norm is below 1e-12.
inline ManifoldOptions connection_manifold_options() {
  ManifoldOptions opt;
  opt.tail_target = 1e-12;
  return opt;
}

inline const FourierTaylor& l0_unstable() {
  static const FourierTaylor P =
      solve_homological(l0_orbit(), Stability::Unstable, l0_masses(), connection_manifold_options());
  return P;
}

inline const FourierTaylor& l0_stable() {
  static const FourierTaylor Q =
      solve_homological(l0_orbit(), Stability::Stable, l0_masses(), connection_manifold_options());
  return Q;
}

struct ConnectionFixture {
  std::string orbit, group;
  double T = 0.0;
  State6 midpoint;
};

inline std::vector<ConnectionFixture> connection_fixtures() {
  const json j = read_json(data_path("fixtures/connections.json"));
  std::vector<ConnectionFixture> out;
  for (const auto& c : j.at("connections")) {
    ConnectionFixture f;
    f.orbit = c.at("orbit");
    f.group = c.at("group");
    f.T = c.at("T");
    const auto m = c.at("midpoint").get<std::vector<double>>();
    for (int i = 0; i < 6; ++i) f.midpoint[i] = m[i];
    out.push_back(f);
  }
  return out;
}

// Converged L0 connection from the continued-family midpoint with half flight time 1.7643.
inline const ConnectionSolution& l0_connection() {
  static const ConnectionSolution sol = [] {
    for (const auto& f : connection_fixtures())
      if (f.group == "continued" && std::abs(f.T - 1.7643) < 1e-9) {
        const auto guess = guess_from_midpoint(l0_unstable(), l0_stable(), f.midpoint, f.T, l0_masses());
        return newton_connect(guess, l0_unstable(), l0_stable(), l0_masses());
      }
    throw Error("connection fixture missing");
  }();
  return sol;
}

}  // namespace crfbp::testing
