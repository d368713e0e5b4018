#include <doctest.h>

#include <cmath>
#include <random>

#include "crfbp/integrator.hpp"
#include "crfbp/search.hpp"
#include "support.hpp"

using namespace crfbp;
using namespace crfbp::testing;

namespace {

Eigen::Vector3d l0_center() {
  const auto lp = libration_point(find_libration_points(l0_masses()), 0);
  return {lp.position[0], lp.position[1], 0.0};
}

MeshLimits l0_limits() { return {l0_center(), 3.0, 2.0}; }

// Unstable and stable L0 meshes advected for one time unit.
const std::pair<Mesh, Mesh>& advected_pair() {
  static const std::pair<Mesh, Mesh> meshes = [] {
    SearchParams sp;
    sp.d_max = 0.1;
    Mesh U = triangulate_torus(l0_unstable(), sp.d_max);
    Mesh S = triangulate_torus(l0_stable(), sp.d_max);
    for (int i = 0; i < 10; ++i) {
      advect(U, sp.dt, l0_unstable(), l0_masses(), l0_limits(), sp);
      advect(S, sp.dt, l0_stable(), l0_masses(), l0_limits(), sp);
    }
    return std::pair{U, S};
  }();
  return meshes;
}

}  // namespace

TEST_CASE("torus triangulation meets the edge bounds") {
  const double d_max = 0.05;
  const Mesh m = triangulate_torus(l0_stable(), d_max);
  CHECK(m.direction == -1);
  CHECK(m.max_average_edge() <= d_max);
  CHECK(m.max_edge() <= 2.0 * d_max);
  CHECK(m.alive_count() == m.vertices.size());
  for (const auto& v : m.vertices) {
    const State9 w = eval_real(l0_stable(), v.theta, std::cos(v.alpha), std::sin(v.alpha));
    REQUIRE((w - v.state).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(triangulate_torus(l0_unstable(), d_max).direction == 1);
  CHECK_THROWS_AS(triangulate_torus(l0_stable(), 0.0), Error);
}

TEST_CASE("halving d_max at least quadruples the vertex count") {
  const auto coarse = triangulate_torus(l0_unstable(), 0.1).vertices.size();
  const auto fine = triangulate_torus(l0_unstable(), 0.05).vertices.size();
  CHECK(fine >= 4 * coarse);
}

TEST_CASE("advecting by zero time is the identity") {
  Mesh m = triangulate_torus(l0_unstable(), 0.1);
  const Mesh before = m;
  advect(m, 0.0, l0_unstable(), l0_masses(), l0_limits(), SearchParams{});
  REQUIRE(m.vertices.size() == before.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK(m.vertices[i].state == before.vertices[i].state);
  CHECK(m.triangles == before.triangles);
}

TEST_CASE("a vertex falling into a primary is culled for speed") {
  const auto& cfg = l0_masses();
  State6 u = State6::Zero();
  u[0] = cfg.x[0] + 0.1;
  u[2] = cfg.y[0];
  u[1] = -0.5;  // straight at primary 1
  Mesh m;
  m.vertices.push_back({0.0, 0.0, lift(u, cfg), 0.0, true});
  MeshLimits lim{Eigen::Vector3d(cfg.x[0], cfg.y[0], 0.0), 3.0, 2.0};
  advect(m, 1.0, l0_unstable(), cfg, lim, SearchParams{});
  CHECK_FALSE(m.vertices[0].alive);
  CHECK(m.culled_speed == 1);
  CHECK(m.failed == 0);
}

TEST_CASE("alive vertices keep their energy and obey the limits") {
  const auto& [U, S] = advected_pair();
  const double J = l0_unstable().energy;
  for (const Mesh* m : {&U, &S}) {
    CHECK(m->alive_count() > 0);
    double drift = 0.0;
    for (const auto& v : m->vertices) {
      if (!v.alive) continue;
      drift = std::max(drift, std::abs(jacobi(project(v.state), l0_masses()) - J));
      CHECK(std::hypot(v.state[1], v.state[3], v.state[5]) <= 3.0);
      CHECK(std::hypot(v.state[0] - l0_center()[0], v.state[2] - l0_center()[1], v.state[4]) <= 2.0);
    }
    CHECK(drift <= 1e-9);
    CHECK(m->max_average_edge() <= 0.1);
  }
}

TEST_CASE("mesh vertices equal the flow of their torus points") {
  const auto& [U, S] = advected_pair();
  const double tol = SearchParams{}.tol;
  std::mt19937 rng(17);
  for (const auto* pm : {&U, &S}) {
    const Mesh& m = *pm;
    const FourierTaylor& P = m.direction > 0 ? l0_unstable() : l0_stable();
    std::uniform_int_distribution<std::size_t> pick(0, m.vertices.size() - 1);
    const std::size_t samples = std::max<std::size_t>(5, m.vertices.size() / 100);
    double err = 0.0;
    for (std::size_t n = 0; n < samples; ++n) {
      const auto& v = m.vertices[pick(rng)];
      if (!v.alive) continue;
      const State9 start = eval_real(P, v.theta, std::cos(v.alpha), std::sin(v.alpha));
      const State9 w = flow(start, m.direction * v.elapsed, l0_masses(), tol);
      err = std::max(err, (w - v.state).cwiseAbs().maxCoeff());
    }
    CHECK(err <= 10.0 * tol);
  }
}

TEST_CASE("closest pair of a mesh with itself has zero gap") {
  const auto& [U, S] = advected_pair();
  const auto c = closest_pair(U, U);
  REQUIRE(c);
  CHECK(c->gap == 0.0);
  CHECK_FALSE(closest_pair(U, Mesh{}));
}

TEST_CASE("hashed closest pair agrees with the brute-force scan") {
  const auto& [U, S] = advected_pair();
  REQUIRE(U.vertices.size() <= 2000);
  REQUIRE(S.vertices.size() <= 2000);
  const auto fast = closest_pair(U, S);
  const auto slow = brute_force_closest_pair(U, S);
  REQUIRE(fast);
  REQUIRE(slow);
  CHECK(fast->gap == slow->gap);
  CHECK(fast->unstable == slow->unstable);
  CHECK(fast->stable == slow->stable);

  const Mesh S0 = triangulate_torus(l0_stable(), 0.1);
  CHECK(closest_pair(U, S0)->gap == brute_force_closest_pair(U, S0)->gap);
}

TEST_CASE("a zero gap threshold finds nothing") {
  SearchParams sp;
  sp.T_max = 0.3;
  sp.d_max = 0.1;
  sp.gap_threshold = 0.0;
  const auto report = search_connections(l0_unstable(), l0_stable(), l0_masses(), l0_center(), sp);
  CHECK(report.solutions.empty());
  CHECK(report.candidates.empty());
  CHECK(report.epochs.size() == 3);
}

TEST_CASE("search rejects mismatched manifolds") {
  SearchParams sp;
  CHECK_THROWS_AS(search_connections(l0_stable(), l0_unstable(), l0_masses(), l0_center(), sp), Error);
}

TEST_CASE("deduplication respects the torus periods") {
  ConnectionSolution a = l0_connection();
  ConnectionSolution b = a;
  b.unknowns.theta += l0_unstable().period();
  b.unknowns.beta -= 2.0 * std::numbers::pi;
  CHECK(same_connection(a, b, l0_unstable().period(), l0_stable().period()));
  b.flight_time += 1e-5;
  CHECK_FALSE(same_connection(a, b, l0_unstable().period(), l0_stable().period()));
}
