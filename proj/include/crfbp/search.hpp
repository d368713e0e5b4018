#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crfbp/bvp.hpp"
#include "crfbp/dynamics.hpp"
#include "crfbp/manifolds.hpp"

namespace crfbp {

struct SearchParams {
  double d_max = 0.05;
  double dt = 0.1;
  double T_max = 5.0;
  double v_max = 3.0;
  double d_lib = 2.0;
  double gap_threshold = 5e-2;
  // Also compare meshes whose epochs differ by up to this many steps (0 keeps the synchronized rule).
  int offset_epochs = 0;
  // Distinct candidates kept per epoch comparison; pairs closer than cluster_radius to a kept one are merged.
  int candidates_per_epoch = 4;
  double cluster_radius = 0.1;
  double tol = 1e-12;
  std::size_t max_vertices = 400000;
  int jobs = 1;
  int M = 50;  // Chebyshev coefficients per segment of the Newton guess
};

struct MeshVertex {
  double theta = 0.0, alpha = 0.0;  // torus coordinates at radius 1
  State9 state;
  double elapsed = 0.0;  // absolute advection time
  bool alive = true;
};

struct Mesh {
  int direction = 1;  // +1 forward (unstable torus), -1 backward (stable torus)
  double elapsed = 0.0;
  double period = 1.0;  // theta period of the torus
  std::vector<MeshVertex> vertices;
  std::vector<std::array<int, 3>> triangles;
  long culled_speed = 0, culled_distance = 0, failed = 0;
  bool truncated = false;  // refinement stopped at the vertex budget

  std::size_t alive_count() const;
  // Longest edge and largest per-triangle average edge, in the 6D phase-space norm.
  double max_edge() const;
  double max_average_edge() const;
};

// Limits applied while advecting: speed and distance from the libration point the orbit shadows.
struct MeshLimits {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double v_max = 3.0;
  double d_lib = 2.0;
};

// Structured (theta, angle) grid on the radius-1 torus, refined until every triangle has
// average edge length at most d_max. Unstable tori advect forward, stable ones backward.
Mesh triangulate_torus(const FourierTaylor& P, double d_max, int jobs = 1);

// Advances alive vertices by dt along the mesh direction, culls vertices outside the limits and
// refines triangles whose average edge exceeds d_max through parameter-space midpoints flowed from
// the torus for the full elapsed time.
void advect(Mesh& mesh, double dt, const FourierTaylor& P, const MassConfig& cfg, const MeshLimits& limits,
            const SearchParams& params);

struct CandidatePair {
  int unstable = -1, stable = -1;
  double gap = 0.0;
  double time_unstable = 0.0, time_stable = 0.0;
};

// Globally minimal 6D gap between alive vertices, via a spatial hash on positions.
std::optional<CandidatePair> closest_pair(const Mesh& unstable, const Mesh& stable);
std::optional<CandidatePair> brute_force_closest_pair(const Mesh& unstable, const Mesh& stable);
// For each alive unstable vertex, its nearest stable vertex when within radius; ordered by gap.
std::vector<CandidatePair> near_pairs(const Mesh& unstable, const Mesh& stable, double radius);

struct CandidateRecord {
  CandidatePair pair;
  double theta = 0.0, alpha = 0.0, phi = 0.0, beta = 0.0;
  bool converged = false;
  std::string message;
  double flight_time = 0.0;
};

struct EpochStats {
  double time = 0.0;
  std::size_t alive_unstable = 0, alive_stable = 0;
  double min_gap = -1.0;  // negative when a mesh is empty
};

struct SearchReport {
  std::vector<ConnectionSolution> solutions;  // deduplicated, sorted by flight time
  std::vector<CandidateRecord> candidates;
  std::vector<EpochStats> epochs;
  long culled_speed = 0, culled_distance = 0, failed = 0;
  bool truncated = false;
};

// Same connection when (theta, alpha, phi, beta, T) agree within tol, modulo the periods.
bool same_connection(const ConnectionSolution& a, const ConnectionSolution& b, double theta_period,
                     double phi_period, double tol = 1e-6);

// Runs the epoch loop up to T_max and hands every candidate with gap <= gap_threshold to newton_connect.
SearchReport search_connections(const FourierTaylor& P, const FourierTaylor& Q, const MassConfig& cfg,
                                const Eigen::Vector3d& libration, const SearchParams& params = {},
                                const BvpOptions& bvp = {});

}  // namespace crfbp
